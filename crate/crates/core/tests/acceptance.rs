//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the summary is printed by
//! `cargo test` without `--nocapture`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use bilag::hyperkahler::{self, hk_frame_at, SignConvention};
use bilag::linalg;
use bilag::prepotential::{builtin, cubic_form, default_domain, embed, PrepotentialExpr};
use bilag::special_kahler::{self, sk_point, EXTERIOR_STEP, GRADIENT_STEP};
use bilag::symplectic::{bilagrangian_residual, SymplecticSpace};
use bilag::verify::{run_verify_with_threads, sample_points, RunConfig, SamplePoint};
use bilag::Complex64;
use nalgebra::{DMatrix, DVector};

const DENSE: usize = 1000;
const FD_POINTS: usize = 200;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builtins with their dimension.
fn builtins() -> Vec<(&'static str, usize)> {
    vec![
        ("quad_plus", 1),
        ("quad_plus", 2),
        ("quad_plus", 3),
        ("quad_minus", 1),
        ("quad_minus", 2),
        ("quad_minus", 3),
        ("cubic", 1),
        ("cubic", 2),
        ("mixed2", 2),
    ]
}

fn is_quadratic(name: &str) -> bool {
    name.starts_with("quad")
}

fn points(name: &str, n: usize, count: usize, seed: u64) -> (PrepotentialExpr, Vec<SamplePoint>) {
    let f = builtin(name, n).unwrap();
    let pts = sample_points(&default_domain(name, n).unwrap(), count, seed);
    (f, pts)
}

/// Runs `check` on every point and returns the largest value.
fn max_over(pts: &[SamplePoint], mut check: impl FnMut(&SamplePoint) -> bilag::Result<f64>) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for (k, p) in pts.iter().enumerate() {
        let r = check(p).map_err(|e| format!("point {k} (w = {:?}): {e}", p.w))?;
        if r.is_nan() {
            return Err(format!("point {k}: NaN residual"));
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn label(name: &str, n: usize) -> String {
    format!("{name}/n={n}")
}

fn bilagrangian() -> Outcome {
    let mut worst = 0.0f64;
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, DENSE, 11);
        let space = SymplecticSpace::standard(n);
        let r = max_over(&pts, |p| {
            let frame = embed(&f, &p.w)?.tangent_frame();
            let r = bilagrangian_residual(&space, &frame)?;
            Ok(r.r1.max(r.r2))
        })?;
        if r >= 1e-10 {
            return Err(format!("{}: max |Ω| = {r:e}", label(name, n)));
        }
        worst = worst.max(r);
    }
    Ok(format!("max |Ω₁|, |Ω₂| = {worst:e} over {DENSE} points per builtin"))
}

fn special_kahler_axioms() -> Outcome {
    let mut algebraic = 0.0f64;
    let mut dnabla = 0.0f64;
    let mut shrink = f64::INFINITY;
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, DENSE, 12);
        let r = max_over(&pts, |p| {
            let s = sk_point(&f, &p.w)?;
            Ok(s.i_squared_residual().max(s.g_asymmetry).max(s.orthogonality_residual()))
        })?;
        if r >= 1e-9 {
            return Err(format!("{}: algebraic residual {r:e}", label(name, n)));
        }
        algebraic = algebraic.max(r);

        let fd_pts = &pts[..FD_POINTS];
        let at = |step: f64| max_over(fd_pts, |p| special_kahler::dnabla_i_residual(&f, &p.w, step));
        let full = at(EXTERIOR_STEP)?;
        if full >= 1e-4 {
            return Err(format!("{}: d∇I residual {full:e}", label(name, n)));
        }
        dnabla = dnabla.max(full);
        if !is_quadratic(name) {
            let half = at(0.5 * EXTERIOR_STEP)?;
            let ratio = full / half;
            if ratio < 3.0 {
                return Err(format!("{}: d∇I shrinks only {ratio:.2}x on halving", label(name, n)));
            }
            shrink = shrink.min(ratio);
        }
    }
    Ok(format!(
        "I², g symmetry, IᵀgI: {algebraic:e}; d∇I: {dnabla:e} (step 1e-3), min shrink on halving {shrink:.1}x"
    ))
}

fn hamiltonian_field() -> Outcome {
    let mut worst = 0.0f64;
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, FD_POINTS, 13);
        let r = max_over(&pts, |p| special_kahler::hamiltonian_field_check(&f, &p.w, GRADIENT_STEP))?;
        if r >= 1e-5 {
            return Err(format!("{}: {r:e}", label(name, n)));
        }
        worst = worst.max(r);
    }
    Ok(format!("max |∂a/∂x − I| = {worst:e}"))
}

fn kahler_potential() -> Outcome {
    let (mut quad, mut other) = (0.0f64, 0.0f64);
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, FD_POINTS, 14);
        let r = max_over(&pts, |p| special_kahler::kahler_potential_residual(&f, &p.w, EXTERIOR_STEP))?;
        let (bound, acc) = if is_quadratic(name) {
            (1e-10, &mut quad)
        } else {
            (1e-4, &mut other)
        };
        if r >= bound {
            return Err(format!("{}: {r:e} (bound {bound:e})", label(name, n)));
        }
        *acc = acc.max(r);
    }
    Ok(format!("d(I dφ) + ω: quadratics {quad:e}, cubic/mixed2 {other:e}"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn cubic_fixture() -> Outcome {
    let f = builtin("cubic", 1).unwrap();
    let w = [c(1.0, 2.0)];
    let p = sk_point(&f, &w).map_err(|e| e.to_string())?;

    // Independent oracle: second differences of φ(x) = (2/3)(x₁ + x₂²)^{3/2}.
    let phi = |x1: f64, x2: f64| (2.0 / 3.0) * (x1 + x2 * x2).powf(1.5);
    let h = 1e-4;
    let (x1, x2) = (-3.0, 2.0);
    let g11 = (phi(x1 + h, x2) - 2.0 * phi(x1, x2) + phi(x1 - h, x2)) / (h * h);
    let g22 = (phi(x1, x2 + h) - 2.0 * phi(x1, x2) + phi(x1, x2 - h)) / (h * h);
    let g12 = (phi(x1 + h, x2 + h) - phi(x1 + h, x2 - h) - phi(x1 - h, x2 + h) + phi(x1 - h, x2 - h)) / (4.0 * h * h);
    let oracle = DMatrix::from_row_slice(2, 2, &[g11, g12, g12, g22]);
    let oracle_gap = linalg::max_abs_diff(&oracle, &p.g);
    if oracle_gap > 1e-6 {
        return Err(format!("FD oracle disagrees with g by {oracle_gap:e}"));
    }

    let mut bad = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            bad.push(what.to_string());
        }
    };
    expect("x", close(p.chart.x[0], -3.0) && close(p.chart.x[1], 2.0));
    expect("ξ", close(p.chart.xi[0], 1.0) && close(p.chart.xi[1], 4.0));
    expect("φ", close(p.chart.phi, 2.0 / 3.0));
    let g = DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 2.0, 10.0]);
    expect("g", linalg::max_abs_diff(&p.g, &g) < 1e-12);
    expect("det g", close(p.det_g(), 1.0));
    let i = DMatrix::from_row_slice(2, 2, &[-2.0, -10.0, 0.5, 2.0]);
    expect("I", linalg::max_abs_diff(&p.i, &i) < 1e-12);
    let (z, _) = special_kahler::holomorphic_coords_at(&p);
    expect("z", (z[0] - c(-3.0, 4.0)).norm() < 1e-12 && (z[1] - c(2.0, -1.0)).norm() < 1e-12);
    let (k, _) = hyperkahler::hk_potential_check(&f, &w).map_err(|e| e.to_string())?;
    expect("K", close(k, -2.0 / 3.0));
    let theta = cubic_form(&f, &w).map_err(|e| e.to_string())?;
    expect("Θ", (theta.at(0, 0, 0) - c(2.0, 0.0)).norm() < 1e-12);
    require(
        bad.is_empty(),
        if bad.is_empty() {
            format!("all values to 1e-12; FD oracle confirms g to {oracle_gap:.1e}")
        } else {
            format!("mismatched: {}", bad.join(", "))
        },
    )
}

fn hyperkahler_triple() -> Outcome {
    let mut worst = 0.0f64;
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, DENSE, 16);
        let mut definite = true;
        let r = max_over(&pts, |p| {
            let frame = hk_frame_at(sk_point(&f, &p.w)?, &p.y, &SignConvention::STANDARD)?;
            let sig = frame.metric_signature();
            definite &= match name {
                "quad_plus" | "cubic" => sig.is_positive_definite(),
                "quad_minus" => sig.is_negative_definite(),
                _ => frame.definiteness_matches(),
            };
            Ok(frame
                .quaternion_residual()
                .max(frame.metric_consistency_residual())
                .max(frame.metric_symmetry_residual()))
        })?;
        if r >= 1e-9 {
            return Err(format!("{}: {r:e}", label(name, n)));
        }
        if !definite {
            return Err(format!("{}: definiteness of G does not match g", label(name, n)));
        }
        worst = worst.max(r);
    }
    Ok(format!("quaternion, σ-consistency, symmetry: {worst:e}; G positive on quad_plus/cubic, negative on quad_minus"))
}

fn moment_maps() -> Outcome {
    let calibrated = SignConvention::calibrate().map_err(|e| e.to_string())?;
    if calibrated != SignConvention::STANDARD {
        return Err(format!("calibration found {calibrated:?}"));
    }
    let (mut quad, mut other, mut equi) = (0.0f64, 0.0f64, 0.0f64);
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, FD_POINTS, 17);
        let mut eq = 0.0f64;
        let r = max_over(&pts, |p| {
            let mm = hyperkahler::moment_map(&f, &p.w, &p.y, GRADIENT_STEP)?;
            eq = eq.max(mm.equivariance_residual);
            Ok(mm.differential_residual)
        })?;
        let (bound, acc) = if is_quadratic(name) {
            (1e-10, &mut quad)
        } else {
            (1e-5, &mut other)
        };
        if r >= bound {
            return Err(format!("{}: d𝛍 residual {r:e}", label(name, n)));
        }
        if eq != 0.0 {
            return Err(format!("{}: equivariance residual {eq:e}", label(name, n)));
        }
        *acc = acc.max(r);
        equi = equi.max(eq);
    }
    Ok(format!(
        "d𝛍 vs ι(U)σ: quadratics {quad:e}, cubic/mixed2 {other:e}; equivariance {equi}; signs {:?}",
        SignConvention::STANDARD.moment
    ))
}

fn legendre_equivalence() -> Outcome {
    let (mut var_max, mut grad) = (0.0f64, 0.0f64);
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, DENSE, 18);
        let mut sums = Vec::with_capacity(pts.len());
        for p in &pts {
            sums.push(hyperkahler::hk_potential_check(&f, &p.w).map_err(|e| e.to_string())?.1);
        }
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sums.len() as f64;
        if var >= 1e-18 {
            return Err(format!("{}: Var(K + φ) = {var:e}", label(name, n)));
        }
        var_max = var_max.max(var);
        let r = max_over(&pts[..FD_POINTS], |p| hyperkahler::legendre_coordinate_residual(&f, &p.w, GRADIENT_STEP))?;
        if r >= 1e-5 {
            return Err(format!("{}: ∂F/∂ξ residual {r:e}", label(name, n)));
        }
        grad = grad.max(r);
    }
    Ok(format!("Var(K + φ) ≤ {var_max:e} over {DENSE} points; ∂F/∂ξ = x residual {grad:e}"))
}

fn harmonicity() -> Outcome {
    let mut worst = 0.0f64;
    for (name, n) in builtins() {
        let (f, pts) = points(name, n, 100, 19);
        let r = max_over(&pts, |p| hyperkahler::harmonic_residual(&f, &p.c, [p.w[0].re, p.w[0].im, p.w3]))?;
        if r >= 1e-10 {
            return Err(format!("{}: |ΔF| = {r:e}", label(name, n)));
        }
        worst = worst.max(r);
    }
    Ok(format!("max |ΔF| = {worst:e} over 100 (c, p) per builtin"))
}

fn recovery_pair(
    f: &PrepotentialExpr,
    straight: &[DVector<f64>],
    bent: &[DVector<f64>],
    guess: &[Complex64],
    panels: usize,
) -> Result<(f64, f64), String> {
    let a = special_kahler::recover_xi(f, straight, guess, panels).map_err(|e| e.to_string())?;
    let b = special_kahler::recover_xi(f, bent, guess, panels).map_err(|e| e.to_string())?;
    Ok((a.mismatch.max(b.mismatch), (&a.xi_end_estimate - &b.xi_end_estimate).amax()))
}

fn xi_recovery() -> Outcome {
    let v = |s: &[f64]| DVector::from_column_slice(s);
    let cubic = builtin("cubic", 1).unwrap();
    let straight = [v(&[-3.0, 2.0]), v(&[0.0, 1.0])];
    let bent = [v(&[-3.0, 2.0]), v(&[-1.0, 2.5]), v(&[0.0, 1.0])];
    let (mismatch, spread) = recovery_pair(&cubic, &straight, &bent, &[c(1.0, 2.0)], 100)?;
    if mismatch >= 1e-6 || spread >= 1e-6 {
        return Err(format!("cubic: endpoint mismatch {mismatch:e}, path dependence {spread:e}"));
    }
    let mut quad = 0.0f64;
    for (name, n) in builtins().into_iter().filter(|(name, _)| is_quadratic(name)) {
        let f = builtin(name, n).unwrap();
        let start: Vec<Complex64> = (0..n).map(|j| c(0.3 + 0.2 * j as f64, -0.5)).collect();
        let end: Vec<Complex64> = (0..n).map(|j| c(-1.1, 0.4 + 0.3 * j as f64)).collect();
        let detour: Vec<Complex64> = (0..n).map(|j| c(1.5, 1.0 - 0.1 * j as f64)).collect();
        let x = |w: &[Complex64]| embed(&f, w).map(|p| p.x).map_err(|e| e.to_string());
        let (x0, x1, xm) = (x(&start)?, x(&end)?, x(&detour)?);
        let (m, s) = recovery_pair(&f, &[x0.clone(), x1.clone()], &[x0, xm, x1], &start, 100)?;
        let r = m.max(s);
        if r >= 1e-10 {
            return Err(format!("{}: {r:e}", label(name, n)));
        }
        quad = quad.max(r);
    }
    Ok(format!(
        "cubic (100 panels): mismatch {mismatch:e}, path dependence {spread:e}; quadratics {quad:e}"
    ))
}

fn determinism() -> Outcome {
    for (name, n) in [("cubic", 2), ("mixed2", 2)] {
        let mut config = RunConfig::new(name, n);
        config.samples = 64;
        config.seed = 2024;
        let one = run_verify_with_threads(&config, 1).map_err(|e| e.to_string())?;
        let four = run_verify_with_threads(&config, 4).map_err(|e| e.to_string())?;
        let a = serde_json::to_string(&one.without_timing()).unwrap();
        let b = serde_json::to_string(&four.without_timing()).unwrap();
        if a != b {
            return Err(format!("{}: reports differ between 1 and 4 threads", label(name, n)));
        }
    }
    Ok("reports for 1 and 4 threads are byte-identical (timing excluded)".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("bilagrangian tangent frames", bilagrangian),
        ("special Kähler axioms", special_kahler_axioms),
        ("Hamiltonian field gives I", hamiltonian_field),
        ("φ is a Kähler potential", kahler_potential),
        ("cubic fixture", cubic_fixture),
        ("hyperkähler triple", hyperkahler_triple),
        ("moment maps", moment_maps),
        ("Legendre equivalence K = −φ", legendre_equivalence),
        ("harmonicity", harmonicity),
        ("ξ-recovery", xi_recovery),
        ("determinism", determinism),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {title}: {detail} ({:.1}s)", k + 1, t.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
