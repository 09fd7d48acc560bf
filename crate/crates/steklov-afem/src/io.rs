//! Text formats for meshes, convergence histories, indicator fields,
//! and the key=value configuration files the CLI accepts.
//!
//! Meshes are stored as a count header followed by one line per
//! vertex and one line per triangle. Coordinates are printed with 17
//! significant digits, enough for a write-read cycle to reproduce
//! every coordinate bit for bit. Triangle lines keep the corner order,
//! which is meaningful: the edge opposite the first corner is the
//! refinement edge, so connectivity alone carries the bisection
//! structure.
//!
//! Histories and indicator fields are plain CSV for external plotting
//! tools. Eigenvalues are printed with 8 decimal places; all other
//! floating columns use exponent notation with shortest round-trip
//! digits, so identical runs produce identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::driver::ConvergenceHistory;
use crate::error::Error;
use crate::estimator::IndicatorField;
use crate::mesh::TriangleMesh;
use crate::Result;

fn parse_err(context: &str, message: String) -> Error {
    Error::Parse {
        context: context.to_string(),
        message,
    }
}

/// Prefixes an I/O failure with the path it happened on; the bare OS
/// message does not say which file was meant.
fn io_at(path: &Path, err: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        err.kind(),
        format!("{}: {err}", path.display()),
    ))
}

/// Renders a mesh in the text format: a "vertices triangles" count
/// line, then coordinate lines, then zero-based index lines.
pub fn format_mesh(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", mesh.n_vertices(), mesh.n_triangles());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e}", v[0], v[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

/// Parses the text format produced by [`format_mesh`] and validates
/// the connectivity.
pub fn parse_mesh(text: &str) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err("mesh", "empty input".into()))?;
    let mut counts = header.split_whitespace();
    let n_vertices: usize = parse_field(counts.next(), "mesh", 1, "vertex count")?;
    let n_triangles: usize = parse_field(counts.next(), "mesh", 1, "triangle count")?;
    if counts.next().is_some() {
        return Err(parse_err("mesh", "header has more than two fields".into()));
    }

    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err("mesh", format!("expected {n_vertices} vertex lines")))?;
        let mut fields = line.split_whitespace();
        let x: f64 = parse_field(fields.next(), "mesh", idx + 1, "x coordinate")?;
        let y: f64 = parse_field(fields.next(), "mesh", idx + 1, "y coordinate")?;
        if fields.next().is_some() {
            return Err(parse_err("mesh", format!("line {}: extra fields", idx + 1)));
        }
        vertices.push([x, y]);
    }

    let mut triangles = Vec::with_capacity(n_triangles);
    for _ in 0..n_triangles {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err("mesh", format!("expected {n_triangles} triangle lines")))?;
        let mut fields = line.split_whitespace();
        let a: u32 = parse_field(fields.next(), "mesh", idx + 1, "corner index")?;
        let b: u32 = parse_field(fields.next(), "mesh", idx + 1, "corner index")?;
        let c: u32 = parse_field(fields.next(), "mesh", idx + 1, "corner index")?;
        if fields.next().is_some() {
            return Err(parse_err("mesh", format!("line {}: extra fields", idx + 1)));
        }
        triangles.push([a, b, c]);
    }

    for (idx, line) in lines {
        if !line.trim().is_empty() {
            return Err(parse_err(
                "mesh",
                format!("line {}: trailing content after the mesh", idx + 1),
            ));
        }
    }

    TriangleMesh::new(vertices, triangles)
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    context: &str,
    line: usize,
    what: &str,
) -> Result<T> {
    let raw = field.ok_or_else(|| parse_err(context, format!("line {line}: missing {what}")))?;
    raw.parse().map_err(|_| {
        parse_err(
            context,
            format!("line {line}: cannot parse {what} from {raw:?}"),
        )
    })
}

/// Writes a mesh to `path` in the text format.
pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    fs::write(path, format_mesh(mesh)).map_err(|e| io_at(path, e))
}

/// Reads a mesh from a file written by [`write_mesh`].
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    parse_mesh(&fs::read_to_string(path).map_err(|e| io_at(path, e))?)
}

/// Renders a convergence history as CSV.
///
/// The `abs_error` column is `|lambda - lambda_ref|` and is left empty
/// when the history has no reference eigenvalue. Eigenvalues carry 8
/// decimal places; `wall_time_s` is the only column not reproduced
/// exactly by a rerun of the same configuration.
pub fn format_history(history: &ConvergenceHistory) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::InvalidConfig(
            "refusing to write an empty history".into(),
        ));
    }
    let mut out = String::from(
        "algorithm,k,iter,dofs,lambda,eta_global,abs_error,marked_count,wall_time_s\n",
    );
    for r in &history.records {
        let abs_error = match history.lambda_ref {
            Some(reference) => format!("{:e}", (r.lambda - reference).abs()),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.8},{:e},{},{},{:.3}",
            history.algorithm.name(),
            history.k,
            r.iter,
            r.dofs,
            r.lambda,
            r.eta_global,
            abs_error,
            r.marked_count,
            r.wall_time_s,
        );
    }
    Ok(out)
}

/// Writes a convergence history to `path` as CSV.
pub fn write_history(history: &ConvergenceHistory, path: &Path) -> Result<()> {
    fs::write(path, format_history(history)?).map_err(|e| io_at(path, e))
}

/// Renders per-triangle indicators as CSV with a `triangle_id,eta`
/// header.
pub fn format_indicators(field: &IndicatorField) -> String {
    let mut out = String::from("triangle_id,eta\n");
    for (id, eta) in field.eta.iter().enumerate() {
        let _ = writeln!(out, "{id},{eta:e}");
    }
    out
}

/// Writes per-triangle indicators to `path` as CSV.
pub fn write_indicators(field: &IndicatorField, path: &Path) -> Result<()> {
    fs::write(path, format_indicators(field)).map_err(|e| io_at(path, e))
}

/// Parses a key=value configuration file.
///
/// One `key = value` pair per line; blank lines and lines starting
/// with `#` are skipped; values may contain `=`. Keys use the spelling
/// of the CLI flags without the leading dashes. Duplicate keys are an
/// error, because silently letting one line override another hides
/// typos. The caller decides which keys it accepts.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err("config", format!("line {}: expected key=value", idx + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(parse_err("config", format!("line {}: empty key", idx + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(parse_err(
                "config",
                format!("line {}: duplicate key {key:?}", idx + 1),
            ));
        }
    }
    Ok(map)
}

/// Reads and parses a key=value configuration file from `path`.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config_text(&fs::read_to_string(path).map_err(|e| io_at(path, e))?)
}
