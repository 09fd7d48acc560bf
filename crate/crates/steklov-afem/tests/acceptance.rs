//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS/FAIL summary line to stderr (stderr bypasses the harness
//! capture, so the lines show up in plain `cargo test` output).
//!
//! All expensive adaptive runs execute once, sequentially, inside a
//! shared `LazyLock`. The parallel test threads all block on that one
//! initialization, so the runs never compete for CPU and the recorded
//! wall times stay meaningful on a single-core machine.

mod common;

use std::sync::LazyLock;

use common::Lcg;
use steklov_afem::assembly::{
    edge_boundary_mass, element_gradient_part, element_mass_part, element_stiffness,
};
use steklov_afem::config::{Algorithm, MeshSource, RunConfig};
use steklov_afem::driver::{run, ConvergenceHistory};
use steklov_afem::eigen::{shifted_inverse_step, solve_coarse};
use steklov_afem::estimator::global_indicator;
use steklov_afem::marking::{mark, MarkParams};
use steklov_afem::mesh::{DomainSpec, TriangleMesh};

fn announce(line: String) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cfg(domain: DomainSpec, algorithm: Algorithm, k: usize, max_dof: usize) -> RunConfig {
    RunConfig {
        max_dof: Some(max_dof),
        ..RunConfig::new(
            MeshSource::Generate {
                domain,
                diameter: std::f64::consts::SQRT_2 / 128.0,
            },
            algorithm,
            k,
        )
    }
}

fn history_of(config: &RunConfig, what: &str) -> ConvergenceHistory {
    announce(format!("acceptance: running {what}"));
    run(config)
        .unwrap_or_else(|err| panic!("{what} failed: {err}"))
        .history
}

fn final_lambda(history: &ConvergenceHistory) -> f64 {
    history.records.last().unwrap().lambda
}

fn total_time(history: &ConvergenceHistory) -> f64 {
    history.records.last().unwrap().wall_time_s
}

struct Heavy {
    /// Square k=1, shifted inverse strategy, 4e5 dofs.
    sq_k1: ConvergenceHistory,
    /// Smaller of two total wall times per strategy on that problem.
    time_shifted: f64,
    time_full: f64,
    sq_k2_lambda: f64,
    sq_k4_lambda: f64,
    ls_k1_lambda: f64,
    ls_k3_lambda: f64,
    a2_square: ConvergenceHistory,
    a2_lshape: ConvergenceHistory,
}

static HEAVY: LazyLock<Heavy> = LazyLock::new(|| {
    use Algorithm::{FullEigensolve, InverseIteration, ShiftedInverse};
    use DomainSpec::{LShape, Square};

    let sq_k1 = history_of(
        &cfg(Square, ShiftedInverse, 1, 400_000),
        "square k=1 strategy 3",
    );
    let full_1 = history_of(
        &cfg(Square, FullEigensolve, 1, 400_000),
        "square k=1 strategy 1",
    );
    let shifted_2 = history_of(
        &cfg(Square, ShiftedInverse, 1, 400_000),
        "square k=1 strategy 3, second timing sample",
    );
    let full_2 = history_of(
        &cfg(Square, FullEigensolve, 1, 400_000),
        "square k=1 strategy 1, second timing sample",
    );

    let heavy = Heavy {
        time_shifted: total_time(&sq_k1).min(total_time(&shifted_2)),
        time_full: total_time(&full_1).min(total_time(&full_2)),
        sq_k1,
        sq_k2_lambda: final_lambda(&history_of(
            &cfg(Square, ShiftedInverse, 2, 500_000),
            "square k=2 strategy 3",
        )),
        sq_k4_lambda: final_lambda(&history_of(
            &cfg(Square, ShiftedInverse, 4, 400_000),
            "square k=4 strategy 3",
        )),
        ls_k1_lambda: final_lambda(&history_of(
            &cfg(LShape, ShiftedInverse, 1, 400_000),
            "L-shape k=1 strategy 3",
        )),
        ls_k3_lambda: final_lambda(&history_of(
            &cfg(LShape, ShiftedInverse, 3, 450_000),
            "L-shape k=3 strategy 3",
        )),
        a2_square: history_of(
            &cfg(Square, InverseIteration, 2, 160_000),
            "square k=2 strategy 2",
        ),
        a2_lshape: history_of(
            &cfg(LShape, InverseIteration, 3, 60_000),
            "L-shape k=3 strategy 2",
        ),
    };
    announce("acceptance: all runs finished".into());
    heavy
});

#[test]
fn criterion_01_square_k1_hits_the_reference_eigenvalue() {
    let err = (final_lambda(&HEAVY.sq_k1) - 0.24007910).abs();
    let ok = err <= 5e-7;
    announce(format!(
        "criterion 01: {} square k=1 |lambda - 0.24007910| = {err:.2e} (tol 5e-7)",
        verdict(ok)
    ));
    assert!(ok);
}

#[test]
fn criterion_02_square_k2_hits_the_reference_eigenvalue() {
    let err = (HEAVY.sq_k2_lambda - 1.4923040).abs();
    let ok = err <= 5e-6;
    announce(format!(
        "criterion 02: {} square k=2 |lambda - 1.4923040| = {err:.2e} (tol 5e-6)",
        verdict(ok)
    ));
    assert!(ok);
}

#[test]
fn criterion_03_square_k4_hits_the_reference_eigenvalue() {
    let err = (HEAVY.sq_k4_lambda - 2.082655).abs();
    let ok = err <= 2e-5;
    announce(format!(
        "criterion 03: {} square k=4 |lambda - 2.082655| = {err:.2e} (tol 2e-5)",
        verdict(ok)
    ));
    assert!(ok);
}

#[test]
fn criterion_04_lshape_k1_and_k3_hit_the_reference_eigenvalues() {
    let err1 = (HEAVY.ls_k1_lambda - 0.1829642).abs();
    let err3 = (HEAVY.ls_k3_lambda - 1.688602).abs();
    let ok = err1 <= 1e-6 && err3 <= 5e-6;
    announce(format!(
        "criterion 04: {} L-shape k=1 err {err1:.2e} (tol 1e-6), k=3 err {err3:.2e} (tol 5e-6)",
        verdict(ok)
    ));
    assert!(ok);
}

/// Plain inverse iteration must visibly slide down to the first
/// eigenvalue on both domains and stay there.
#[test]
fn criterion_05_inverse_iteration_misconverges_on_both_domains() {
    let drift = |history: &ConvergenceHistory, target: f64, ceiling: f64| -> Option<usize> {
        let lambdas: Vec<f64> = history.records.iter().map(|r| r.lambda).collect();
        let onset = lambdas.iter().position(|l| (l - target).abs() < 1e-2)?;
        lambdas[onset..]
            .iter()
            .all(|&l| l < ceiling)
            .then_some(onset)
    };

    let square = drift(&HEAVY.a2_square, 0.2400791, 1.0);
    let lshape = drift(&HEAVY.a2_lshape, 0.1829642, 1.0);
    let ok = square.is_some() && lshape.is_some();
    announce(format!(
        "criterion 05: {} inverse iteration drifts to the first eigenvalue \
         (square onset {square:?}, L-shape onset {lshape:?})",
        verdict(ok)
    ));
    assert!(ok, "square {square:?}, lshape {lshape:?}");
}

#[test]
fn criterion_06_square_k1_error_decays_at_the_optimal_rate() {
    let reference = HEAVY.sq_k1.lambda_ref.unwrap();
    let points: Vec<(f64, f64)> = HEAVY
        .sq_k1
        .records
        .iter()
        .filter(|r| (40_000..=400_000).contains(&r.dofs))
        .map(|r| (r.dofs as f64, (r.lambda - reference).abs()))
        .filter(|&(_, e)| e > 0.0)
        .map(|(n, e)| (n.ln(), e.ln()))
        .collect();
    assert!(points.len() >= 5, "too few points in the final decade");

    let n = points.len() as f64;
    let (sx, sy): (f64, f64) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    let ok = (-1.25..=-0.75).contains(&slope);
    announce(format!(
        "criterion 06: {} error decay slope over the final dof decade = {slope:.3} (want -1.0 +/- 0.25)",
        verdict(ok)
    ));
    assert!(ok, "slope {slope}");
}

#[test]
fn criterion_07_estimator_effectivity_stays_in_a_narrow_band() {
    let reference = HEAVY.sq_k1.lambda_ref.unwrap();
    let ratios: Vec<f64> = HEAVY
        .sq_k1
        .records
        .iter()
        .skip(4)
        .map(|r| r.eta_global * r.eta_global / (r.lambda - reference).abs())
        .collect();
    assert!(ratios.iter().all(|r| r.is_finite()));

    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let ok = lo > 0.0 && hi / lo <= 10.0;
    announce(format!(
        "criterion 07: {} effectivity band over iterations 5..end spans {:.2}x (allowed 10x)",
        verdict(ok),
        hi / lo
    ));
    assert!(ok, "band {lo}..{hi}");
}

fn small_meshes() -> Vec<TriangleMesh> {
    let mut meshes = Vec::new();
    for m in [2, 4, 6] {
        meshes.push(common::uniform_mesh(DomainSpec::Square, m));
        meshes.push(common::uniform_mesh(DomainSpec::LShape, m));
    }
    let mut adapted = common::uniform_mesh(DomainSpec::Square, 3);
    for marks in [vec![0], vec![1, 5, 7], vec![2, 3]] {
        adapted = adapted.bisect(&marks).unwrap();
    }
    assert!(adapted.n_vertices() <= 200);
    meshes.push(adapted);
    meshes
}

#[test]
fn criterion_08_solver_matches_a_dense_oracle_and_contracts() {
    // Eigenvalue agreement on every small mesh.
    let mut worst = 0.0_f64;
    for mesh in small_meshes() {
        assert!(mesh.n_vertices() <= 200);
        let forms = common::forms_on(&mesh);
        let dense = common::dense_eigenbasis(&forms);
        let count = 5.min(dense.len());
        let sparse = solve_coarse(&forms, count).unwrap();
        for (pair, reference) in sparse.pairs.iter().zip(&dense) {
            worst = worst.max(common::rel_err(pair.lambda, reference.lambda));
        }
    }
    let values_ok = worst <= 1e-10;

    // One shifted inverse step contracts toward the eigenline at least
    // as fast as the spectral bound predicts.
    let mesh = common::uniform_mesh(DomainSpec::LShape, 6);
    let forms = common::forms_on(&mesh);
    let dense = common::dense_eigenbasis(&forms);
    let mu: Vec<f64> = common::dense_mu_spectrum(&forms);
    let mut contraction_ok = true;
    for k_idx in 0..3 {
        let target = &dense[k_idx];
        let mut start = target.vector.clone();
        for (offset, weight) in [(1, 0.6), (2, 0.3), (3, 0.1)] {
            if k_idx + offset < dense.len() {
                for (s, v) in start.iter_mut().zip(&dense[k_idx + offset].vector) {
                    *s += 0.08 * weight * v;
                }
            }
        }
        common::a_normalize(&forms, &mut start);
        let dist_before = common::a_distance_to_line(&forms, &start, &target.vector);
        assert!(dist_before > 1e-3);

        let shift = target.lambda * 1.01;
        let next = shifted_inverse_step(&forms, shift, &start).unwrap();
        let dist_after = common::a_distance_to_line(&forms, &next.coeffs, &target.vector);

        let mu_k = 1.0 / target.lambda;
        let mu_0 = 1.0 / shift;
        let rho = mu
            .iter()
            .filter(|&&m| (m - mu_k).abs() > 1e-12 * mu_k)
            .map(|&m| (m - mu_k).abs())
            .fold(f64::INFINITY, f64::min);
        let factor = 4.0 / rho * (mu_0 - mu_k).abs();
        assert!(factor < 1.0, "test shift is not close enough to contract");
        if dist_after > factor * dist_before {
            contraction_ok = false;
        }
    }

    let ok = values_ok && contraction_ok;
    announce(format!(
        "criterion 08: {} dense-oracle agreement (worst rel err {worst:.2e}, tol 1e-10) \
         and spectral contraction bound",
        verdict(ok)
    ));
    assert!(ok, "values {values_ok}, contraction {contraction_ok}");
}

/// Barycentric-coordinate quadrature oracle for the element kernels,
/// built on a dense linear solve instead of the closed-form gradients
/// the library uses.
mod quadrature {
    use nalgebra::{Matrix3, Vector3};

    /// Coefficients (a_i, b_i, c_i) of φ_i = a_i + b_i x + c_i y.
    fn basis_coefficients(coords: [[f64; 2]; 3]) -> [Vector3<f64>; 3] {
        let a = Matrix3::new(
            1.0,
            coords[0][0],
            coords[0][1],
            1.0,
            coords[1][0],
            coords[1][1],
            1.0,
            coords[2][0],
            coords[2][1],
        );
        let inv = a.try_inverse().expect("degenerate triangle in oracle");
        [0, 1, 2].map(|i| {
            let mut e = Vector3::zeros();
            e[i] = 1.0;
            inv * e
        })
    }

    fn area(coords: [[f64; 2]; 3]) -> f64 {
        let a = Matrix3::new(
            1.0,
            coords[0][0],
            coords[0][1],
            1.0,
            coords[1][0],
            coords[1][1],
            1.0,
            coords[2][0],
            coords[2][1],
        );
        0.5 * a.determinant().abs()
    }

    pub fn gradient_part(coords: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
        let basis = basis_coefficients(coords);
        let t = area(coords);
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = t * (basis[i][1] * basis[j][1] + basis[i][2] * basis[j][2]);
            }
        }
        out
    }

    /// Midpoint rule, exact for the quadratic products φ_i φ_j.
    pub fn mass_part(coords: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
        let basis = basis_coefficients(coords);
        let eval = |v: &Vector3<f64>, p: [f64; 2]| v[0] + v[1] * p[0] + v[2] * p[1];
        let mids = [0, 1, 2].map(|i| {
            let q = coords[(i + 1) % 3];
            let r = coords[(i + 2) % 3];
            [0.5 * (q[0] + r[0]), 0.5 * (q[1] + r[1])]
        });
        let w = area(coords) / 3.0;
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = w * mids
                    .iter()
                    .map(|&p| eval(&basis[i], p) * eval(&basis[j], p))
                    .sum::<f64>();
            }
        }
        out
    }

    /// Simpson's rule along the edge, exact for quadratics.
    pub fn edge_mass(a: [f64; 2], b: [f64; 2]) -> [[f64; 2]; 2] {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        // Linear shape functions on the edge parametrized by s in [0,1].
        let phi = [|s: f64| 1.0 - s, |s: f64| s];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let f = |s: f64| phi[i](s) * phi[j](s);
                out[i][j] = len / 6.0 * (f(0.0) + 4.0 * f(0.5) + f(1.0));
            }
        }
        out
    }
}

fn random_triangle(rng: &mut Lcg) -> [[f64; 2]; 3] {
    loop {
        let mut coords = [[0.0; 2]; 3];
        for c in coords.iter_mut() {
            *c = [rng.next_f64(), rng.next_f64()];
        }
        let twice_area = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
            - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]);
        if twice_area < 0.0 {
            coords.swap(1, 2);
        }
        if twice_area.abs() > 5e-2 {
            return coords;
        }
    }
}

fn max_abs_diff3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}

#[test]
fn criterion_09_invariant_suite_holds() {
    // Element kernels against the quadrature oracle.
    let mut rng = Lcg::new(2024);
    let mut kernel_worst = 0.0_f64;
    for _ in 0..200 {
        let coords = random_triangle(&mut rng);
        let grad = element_gradient_part(coords).unwrap();
        let mass = element_mass_part(coords).unwrap();
        let stiff = element_stiffness(coords).unwrap();
        let grad_oracle = quadrature::gradient_part(coords);
        let mass_oracle = quadrature::mass_part(coords);
        let mut stiff_oracle = [[0.0; 3]; 3];
        // Entries of the gradient matrix grow like 1/area, so compare
        // relative to the largest oracle entry.
        let mut scale = 1.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                stiff_oracle[i][j] = grad_oracle[i][j] + mass_oracle[i][j];
                scale = scale.max(grad_oracle[i][j].abs());
            }
        }
        kernel_worst = kernel_worst.max(max_abs_diff3(&grad, &grad_oracle) / scale);
        kernel_worst = kernel_worst.max(max_abs_diff3(&mass, &mass_oracle) / scale);
        kernel_worst = kernel_worst.max(max_abs_diff3(&stiff, &stiff_oracle) / scale);

        let a = coords[0];
        let b = coords[1];
        let edge = edge_boundary_mass(a, b).unwrap();
        let edge_oracle = quadrature::edge_mass(a, b);
        for i in 0..2 {
            for j in 0..2 {
                kernel_worst = kernel_worst.max((edge[i][j] - edge_oracle[i][j]).abs());
            }
        }
    }
    let kernels_ok = kernel_worst <= 1e-13;

    // Rayleigh-quotient error identity:
    // a(v,v)/b(v,v) - λ = (‖v-u‖_a² - λ‖v-u‖_b²)/b(v,v) for any v and
    // any scaling of the discrete eigenpair (λ, u).
    let mesh = common::uniform_mesh(DomainSpec::Square, 6);
    let forms = common::forms_on(&mesh);
    let dense = common::dense_eigenbasis(&forms);
    let mut rng = Lcg::new(42);
    let v = rng.vector(forms.k.n());
    let mut identity_worst = 0.0_f64;
    for (pair_idx, scale) in [(0, 1.0), (1, -0.37), (2, 2.6)] {
        let u: Vec<f64> = dense[pair_idx].vector.iter().map(|x| x * scale).collect();
        let lambda = dense[pair_idx].lambda;
        let bvv = common::b_dot(&forms, &v, &v);
        let lhs = common::a_dot(&forms, &v, &v) / bvv - lambda;
        let d: Vec<f64> = v.iter().zip(&u).map(|(x, y)| x - y).collect();
        let rhs = (common::a_dot(&forms, &d, &d) - lambda * common::b_dot(&forms, &d, &d)) / bvv;
        identity_worst = identity_worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    let identity_ok = identity_worst <= 1e-11;

    // Ten levels of random newest-vertex bisection stay conforming and
    // keep the right-isosceles minimum angle.
    let mut nvb_mesh = common::uniform_mesh(DomainSpec::Square, 4);
    let mut nvb_ok = true;
    for level in 0..10 {
        let marked: Vec<usize> = (0..nvb_mesh.n_triangles())
            .filter(|_| rng.next_f64() < 0.2)
            .collect();
        let marked = if marked.is_empty() {
            vec![level]
        } else {
            marked
        };
        nvb_mesh = nvb_mesh.bisect(&marked).unwrap();
        let conforming =
            TriangleMesh::new(nvb_mesh.vertices().to_vec(), nvb_mesh.triangles().to_vec()).is_ok();
        if !conforming || nvb_mesh.min_angle_deg() < 44.999 {
            nvb_ok = false;
        }
    }

    // Bulk marking on a thousand random indicator fields.
    let mut marking_ok = true;
    for _ in 0..1000 {
        let n = 1 + (rng.next_u64() % 60) as usize;
        let etas: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let omega = 0.01 + 0.98 * rng.next_f64();
        let field = global_indicator(&etas);
        let outcome = mark(&field, MarkParams::new(omega).unwrap());
        let threshold = omega * field.eta_global * field.eta_global;
        if field.eta_global == 0.0 {
            marking_ok &= outcome.converged && outcome.marked.is_empty();
            continue;
        }

        let marked_sum: f64 = outcome.marked.iter().map(|&t| etas[t] * etas[t]).sum();
        let mut sq: Vec<f64> = etas.iter().map(|e| e * e).collect();
        sq.sort_by(|a, b| b.total_cmp(a));
        let runner_up: f64 = sq.iter().take(outcome.marked.len() - 1).sum();
        if marked_sum < threshold * (1.0 - 1e-12) || runner_up >= threshold {
            marking_ok = false;
        }
    }

    // Discrete eigenvalues approach the continuous ones from above.
    let mut monotone_ok = true;
    for domain in [DomainSpec::Square, DomainSpec::LShape] {
        let mut mesh = common::uniform_mesh(domain, 4);
        let mut coarse: Vec<f64> = solve_coarse(&common::forms_on(&mesh), 3)
            .unwrap()
            .pairs
            .iter()
            .map(|p| p.lambda)
            .collect();
        for _ in 0..3 {
            let all: Vec<usize> = (0..mesh.n_triangles()).collect();
            mesh = mesh.bisect(&all).unwrap();
            let fine: Vec<f64> = solve_coarse(&common::forms_on(&mesh), 3)
                .unwrap()
                .pairs
                .iter()
                .map(|p| p.lambda)
                .collect();
            for (f, c) in fine.iter().zip(&coarse) {
                if *f > c * (1.0 + 1e-12) {
                    monotone_ok = false;
                }
            }
            coarse = fine;
        }
    }

    let ok = kernels_ok && identity_ok && nvb_ok && marking_ok && monotone_ok;
    announce(format!(
        "criterion 09: {} kernels vs quadrature {kernel_worst:.2e} (tol 1e-13), \
         error identity {identity_worst:.2e} (tol 1e-11), bisection {}, marking {}, monotone {}",
        verdict(ok),
        verdict(nvb_ok),
        verdict(marking_ok),
        verdict(monotone_ok)
    ));
    assert!(ok);
}

/// Warm-started shifted inverse iteration skips the per-level Lanczos
/// loop, so at matched accuracy it must not be slower than the fresh
/// eigensolve strategy. A 10% allowance absorbs container timer noise;
/// the measured gap is reported either way.
#[test]
fn criterion_10_shifted_iteration_is_not_slower_than_full_solves() {
    let shifted = HEAVY.time_shifted;
    let full = HEAVY.time_full;
    let err_shifted = (final_lambda(&HEAVY.sq_k1) - 0.24007910).abs();
    let matched = err_shifted <= 5e-7;
    let ok = matched && shifted <= full * 1.10;
    announce(format!(
        "criterion 10: {} strategy 3 total {shifted:.2}s vs strategy 1 total {full:.2}s \
         (min of two runs each, 10% noise allowance)",
        verdict(ok)
    ));
    assert!(
        ok,
        "shifted {shifted}s, full {full}s, matched accuracy {matched}"
    );
}
