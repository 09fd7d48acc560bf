//! Command-line front end for the adaptive Steklov eigenvalue solver.
//!
//! Three subcommands: `solve` runs one strategy and writes its
//! history, `compare` runs the three adaptive strategies on the same
//! problem, and `mesh-gen` writes a uniform starting mesh. Exit codes
//! distinguish bad input (1) from numerical failure inside a run (2).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use steklov_afem::config::{default_init_diameter, Algorithm, MeshSource, RunConfig};
use steklov_afem::driver::{run, RunOutcome};
use steklov_afem::error::Error;
use steklov_afem::mesh::{DomainSpec, TriangleMesh};
use steklov_afem::{io, Result};

#[derive(Parser)]
#[command(
    name = "steklov",
    version,
    about = "Adaptive finite element solver for Steklov eigenvalue problems",
    after_help = "Exit codes: 0 success, 1 bad input, 2 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one refinement strategy and report the final eigenvalue.
    Solve(SolveArgs),
    /// Run strategies 1, 2, and 3 on the same problem, one history each.
    Compare(CompareArgs),
    /// Generate a uniform mesh file for one of the built-in domains.
    MeshGen(MeshGenArgs),
}

/// Flags shared by `solve` and `compare`. Every value is optional on
/// the command line so that a configuration file can fill the gaps;
/// built-in defaults apply last.
#[derive(Args)]
struct ProblemArgs {
    /// Domain: square, lshape, or file:PATH for a mesh file
    #[arg(long)]
    domain: Option<String>,

    /// Index of the eigenvalue to track, 1-based [default: 1]
    #[arg(long)]
    k: Option<usize>,

    /// Bulk marking fraction in (0, 1) [default: 0.25]
    #[arg(long)]
    omega: Option<f64>,

    /// Stop once the mesh has this many degrees of freedom [default: 400000]
    #[arg(long)]
    max_dof: Option<usize>,

    /// Stop after this many adaptive iterations
    #[arg(long)]
    max_iters: Option<usize>,

    /// Stop once the global error estimate falls below this
    #[arg(long)]
    eta_tol: Option<f64>,

    /// Reference eigenvalue for the history's error column
    /// [default: a built-in value, when one is known for the domain and k]
    #[arg(long)]
    lambda_ref: Option<f64>,

    /// Target diameter of the generated initial mesh [default: 2^(1/2)/128]
    #[arg(long)]
    init_diameter: Option<f64>,

    /// Write the per-iteration history CSV here
    #[arg(long)]
    history: Option<PathBuf>,

    /// Directory for a snapshot of the final mesh
    #[arg(long)]
    mesh_out: Option<PathBuf>,

    /// Directory for the final per-triangle error indicators
    #[arg(long)]
    indicators_out: Option<PathBuf>,

    /// Key=value file supplying defaults for unset flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Strategy: 1 (eigensolve per level), 2 (inverse iteration),
    /// 3 (shifted inverse iteration), or scheme1 (uniform refinement)
    #[arg(long)]
    algorithm: Option<String>,

    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Args)]
struct MeshGenArgs {
    /// Domain: square or lshape
    #[arg(long)]
    domain: String,

    /// Target diameter of the mesh triangles [default: 2^(1/2)/128]
    #[arg(long)]
    diameter: Option<f64>,

    /// Output mesh file
    #[arg(long, default_value = "mesh.txt")]
    out: PathBuf,
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here as non-error kinds.
            let _ = err.print();
            return if err.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Compare(args) => compare(args),
        Command::MeshGen(args) => mesh_gen(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_input_error() {
                1
            } else {
                2
            }
        }
    }
}

/// Keys a configuration file may set. `algorithm` is accepted only by
/// `solve`; the strategies of `compare` are fixed.
const CONFIG_KEYS: &[&str] = &[
    "algorithm",
    "domain",
    "k",
    "omega",
    "max-dof",
    "max-iters",
    "eta-tol",
    "lambda-ref",
    "init-diameter",
    "history",
    "mesh-out",
    "indicators-out",
];

fn solve(mut args: SolveArgs) -> Result<()> {
    let file = load_config_file(&args.problem, true)?;
    if args.algorithm.is_none() {
        args.algorithm = file.get("algorithm").cloned();
    }
    let algorithm = args
        .algorithm
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("missing --algorithm".into()))?
        .parse::<Algorithm>()?;
    let problem = merge(args.problem, &file)?;
    let config = build_run_config(&problem, algorithm)?;

    let outcome = run(&config)?;
    report(&outcome);
    write_outputs(&problem, &outcome, run_label(algorithm), false)
}

fn compare(args: CompareArgs) -> Result<()> {
    let file = load_config_file(&args.problem, false)?;
    let problem = merge(args.problem, &file)?;

    for algorithm in [
        Algorithm::FullEigensolve,
        Algorithm::InverseIteration,
        Algorithm::ShiftedInverse,
    ] {
        let config = build_run_config(&problem, algorithm)?;
        let outcome = run(&config)?;
        report(&outcome);
        write_outputs(&problem, &outcome, run_label(algorithm), true)?;
    }
    Ok(())
}

fn mesh_gen(args: MeshGenArgs) -> Result<()> {
    let domain = DomainSpec::from_str(&args.domain)?;
    let diameter = args.diameter.unwrap_or_else(default_init_diameter);
    let mesh = TriangleMesh::uniform(domain, diameter)?;
    io::write_mesh(&mesh, &args.out)?;
    say(format_args!(
        "wrote {} with {} vertices and {} triangles",
        args.out.display(),
        mesh.n_vertices(),
        mesh.n_triangles()
    ));
    Ok(())
}

fn load_config_file(
    problem: &ProblemArgs,
    allow_algorithm: bool,
) -> Result<BTreeMap<String, String>> {
    let Some(path) = &problem.config else {
        return Ok(BTreeMap::new());
    };
    let map = io::read_config_file(path)?;
    for key in map.keys() {
        let known = CONFIG_KEYS.contains(&key.as_str());
        let allowed = known && (allow_algorithm || key != "algorithm");
        if !allowed {
            return Err(Error::InvalidConfig(format!(
                "configuration file {} sets unsupported key {key:?}",
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Fills every unset flag from the configuration file. Values are
/// parsed here so a bad file line is reported by key name.
fn merge(mut problem: ProblemArgs, file: &BTreeMap<String, String>) -> Result<ProblemArgs> {
    fill(&mut problem.domain, file, "domain", Ok)?;
    fill(&mut problem.k, file, "k", parse_value)?;
    fill(&mut problem.omega, file, "omega", parse_value)?;
    fill(&mut problem.max_dof, file, "max-dof", parse_value)?;
    fill(&mut problem.max_iters, file, "max-iters", parse_value)?;
    fill(&mut problem.eta_tol, file, "eta-tol", parse_value)?;
    fill(&mut problem.lambda_ref, file, "lambda-ref", parse_value)?;
    fill(
        &mut problem.init_diameter,
        file,
        "init-diameter",
        parse_value,
    )?;
    fill(&mut problem.history, file, "history", |v| {
        Ok(PathBuf::from(v))
    })?;
    fill(&mut problem.mesh_out, file, "mesh-out", |v| {
        Ok(PathBuf::from(v))
    })?;
    fill(&mut problem.indicators_out, file, "indicators-out", |v| {
        Ok(PathBuf::from(v))
    })?;
    Ok(problem)
}

fn fill<T>(
    slot: &mut Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
    parse: impl Fn(String) -> Result<T>,
) -> Result<()> {
    if slot.is_none() {
        if let Some(raw) = file.get(key) {
            *slot = Some(parse(raw.clone())?);
        }
    }
    Ok(())
}

fn parse_value<T: FromStr>(raw: String) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        context: "config".into(),
        message: format!("cannot parse value {raw:?}"),
    })
}

fn build_run_config(problem: &ProblemArgs, algorithm: Algorithm) -> Result<RunConfig> {
    let domain = problem
        .domain
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("missing --domain".into()))?;
    let diameter = problem.init_diameter.unwrap_or_else(default_init_diameter);
    let source = match domain.strip_prefix("file:") {
        Some(path) if !path.is_empty() => MeshSource::File(PathBuf::from(path)),
        Some(_) => {
            return Err(Error::InvalidConfig(
                "file: domain needs a path, e.g. file:mesh.txt".into(),
            ))
        }
        None => MeshSource::Generate {
            domain: DomainSpec::from_str(domain)?,
            diameter,
        },
    };

    let mut config = RunConfig::new(source, algorithm, problem.k.unwrap_or(1));
    if let Some(omega) = problem.omega {
        config.omega = omega;
    }
    if let Some(max_dof) = problem.max_dof {
        config.max_dof = Some(max_dof);
    }
    config.max_iters = problem.max_iters;
    config.eta_tol = problem.eta_tol;
    config.lambda_ref = problem.lambda_ref;
    config.validate()?;
    Ok(config)
}

/// File-name tag for one run: alg1, alg2, alg3, or scheme1.
fn run_label(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::FullEigensolve => "alg1",
        Algorithm::InverseIteration => "alg2",
        Algorithm::ShiftedInverse => "alg3",
        Algorithm::UniformShifted => "scheme1",
    }
}

/// Prints a status line, ignoring a closed stdout so that piping
/// into `head` ends the program quietly instead of panicking.
fn say(line: std::fmt::Arguments) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn report(outcome: &RunOutcome) {
    let history = &outcome.history;
    let last = history
        .records
        .last()
        .expect("a finished run has at least one record");
    let error = match history.lambda_ref {
        Some(reference) => format!(", error = {:.2e}", (last.lambda - reference).abs()),
        None => String::new(),
    };
    say(format_args!(
        "algorithm {}, k = {}: lambda = {:.8} after {} iterations, {} dofs, eta = {:.3e}{}, stop = {}",
        history.algorithm.name(),
        history.k,
        last.lambda,
        last.iter,
        last.dofs,
        last.eta_global,
        error,
        outcome.stop_reason.name(),
    ));
}

/// Writes whichever outputs were requested. For `compare` the history
/// path serves as a base name and each strategy's tag is inserted
/// before the extension.
fn write_outputs(
    problem: &ProblemArgs,
    outcome: &RunOutcome,
    label: &str,
    tag_history: bool,
) -> Result<()> {
    if let Some(base) = &problem.history {
        let path = if tag_history {
            labeled_path(base, label)
        } else {
            base.clone()
        };
        io::write_history(&outcome.history, &path)?;
        say(format_args!("history written to {}", path.display()));
    }
    if let Some(dir) = &problem.mesh_out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("mesh_{label}.txt"));
        io::write_mesh(&outcome.final_mesh, &path)?;
        say(format_args!("final mesh written to {}", path.display()));
    }
    if let Some(dir) = &problem.indicators_out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("indicators_{label}.csv"));
        io::write_indicators(&outcome.final_field, &path)?;
        say(format_args!("indicators written to {}", path.display()));
    }
    Ok(())
}

/// out/history.csv tagged with alg2 becomes out/history_alg2.csv.
fn labeled_path(base: &Path, label: &str) -> PathBuf {
    let stem = base.file_stem().unwrap_or_default().to_string_lossy();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_{label}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{label}"),
    };
    base.with_file_name(name)
}
