//! Batch verification, signature scans and fixture export.
//!
//! Sample points are drawn up front from a seeded ChaCha generator, then
//! evaluated in parallel; aggregation walks the results in sample order, so
//! a report depends only on the configuration, never on the thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperkahler::{self, hk_frame_at, SignConvention};
use crate::prepotential::{self, builtin, cubic_form, default_domain, embed, DomainBox, PrepotentialExpr, BUILTIN_NAMES};
use crate::special_kahler::{self, invert_projection, sk_point, ChartStencil, NewtonSettings, Projection, SKPoint};
use crate::symplectic::bilagrangian_residual;

pub const SCHEMA_VERSION: u32 = 1;

/// Every check of the suite with its default tolerance, in report order.
pub const CHECKS: &[(&str, f64)] = &[
    ("bilagrangian_omega1", 1e-10),
    ("bilagrangian_omega2", 1e-10),
    ("g_symmetry", 1e-9),
    ("i_squared", 1e-9),
    ("i_orthogonal", 1e-9),
    ("i_symplectic", 1e-9),
    ("dnabla_i", 1e-4),
    ("hamiltonian_field", 1e-5),
    ("type_10", 1e-9),
    ("kahler_potential", 1e-4),
    ("legendre_gradient", 1e-5),
    ("xi_recovery", 1e-6),
    ("quaternion", 1e-9),
    ("hk_block_forms", 1e-9),
    ("metric_consistency", 1e-9),
    ("metric_symmetry", 1e-10),
    ("metric_definiteness", 0.5),
    ("closedness", 1e-4),
    ("moment_map", 1e-5),
    ("equivariance", 1e-12),
    ("harmonic", 1e-10),
    ("j1_potential", 1e-9),
    ("k_plus_phi", 1e-9),
    ("k_plus_phi_variance", 1e-18),
    ("legendre_coordinates", 1e-5),
];

fn check_index(name: &str) -> usize {
    CHECKS
        .iter()
        .position(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("unknown check {name}"))
}

/// Checks evaluated per sample point (everything except the variance).
fn per_point_checks() -> impl Iterator<Item = usize> {
    let variance = check_index("k_plus_phi_variance");
    (0..CHECKS.len()).filter(move |&i| i != variance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Builtin name or expression in w1..wn.
    pub prepotential: String,
    pub n: usize,
    pub domain: DomainBox,
    pub samples: usize,
    pub seed: u64,
    pub tol_overrides: BTreeMap<String, f64>,
    /// Step for gradient and Jacobian checks; exterior-derivative checks use
    /// ten times this.
    pub fd_step: f64,
    /// Simpson panels per segment for ξ-recovery.
    pub panels: usize,
    pub output: Option<String>,
    pub format: Format,
}

impl RunConfig {
    /// Defaults for `prepotential`, using the builtin's domain box when it
    /// has one and `[-1, 1]²` per variable otherwise.
    pub fn new(prepotential: &str, n: usize) -> Self {
        let domain = default_domain(prepotential, n).unwrap_or_else(|| DomainBox::uniform(n, (-1.0, 1.0), (-1.0, 1.0)));
        RunConfig {
            prepotential: prepotential.to_string(),
            n,
            domain,
            samples: 200,
            seed: 0,
            tol_overrides: BTreeMap::new(),
            fd_step: special_kahler::GRADIENT_STEP,
            panels: 8,
            output: None,
            format: Format::Json,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if self.domain.n() != self.n {
            return Err(Error::Config(format!(
                "domain box has {} variables, prepotential has {}",
                self.domain.n(),
                self.n
            )));
        }
        self.domain.validate()?;
        if !(self.fd_step > 0.0) {
            return Err(Error::Config("fd step must be positive".into()));
        }
        if self.panels == 0 {
            return Err(Error::Config("panels must be at least 1".into()));
        }
        for (name, tol) in &self.tol_overrides {
            if !CHECKS.iter().any(|(n, _)| n == name) {
                return Err(Error::Config(format!("unknown check `{name}` in tolerance overrides")));
            }
            if !(*tol > 0.0) {
                return Err(Error::Config(format!("tolerance for `{name}` must be positive")));
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, check: &str) -> f64 {
        self.tol_overrides.get(check).copied().unwrap_or_else(|| CHECKS[check_index(check)].1)
    }

    pub fn resolve(&self) -> Result<PrepotentialExpr> {
        resolve_prepotential(&self.prepotential, self.n)
    }
}

pub fn resolve_prepotential(text: &str, n: usize) -> Result<PrepotentialExpr> {
    if BUILTIN_NAMES.contains(&text) {
        builtin(text, n)
    } else {
        prepotential::parse(text, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    SkippedSingular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub points_evaluated: usize,
    /// Points where the check itself raised an error (counts as failure).
    pub errors: usize,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: CheckStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: String,
    pub point_index: usize,
    /// `[Re w_j, Im w_j]` per variable.
    pub w: Vec<[f64; 2]>,
    pub residual: Option<f64>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub points_total: usize,
    pub points_singular: usize,
    /// Count of sample points per metric signature.
    pub signatures: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub sign_vector: SignConvention,
    pub summary: RunSummary,
    pub checks: Vec<CheckResult>,
    pub failures: Vec<Failure>,
    pub wall_time_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailure,
    AllSingular,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::CheckFailure => 1,
            Outcome::AllSingular => 3,
        }
    }
}

impl VerificationReport {
    pub fn outcome(&self) -> Outcome {
        if self.summary.points_singular == self.summary.points_total {
            Outcome::AllSingular
        } else if self.checks.iter().all(|c| c.pass) {
            Outcome::Pass
        } else {
            Outcome::CheckFailure
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The report with timing removed, for reproducibility comparisons.
    pub fn without_timing(&self) -> VerificationReport {
        VerificationReport {
            wall_time_ms: 0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,points_evaluated,errors,max_abs_residual,tolerance,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{:e},{:e},{}\n",
                c.name, c.points_evaluated, c.errors, c.max_abs_residual, c.tolerance, c.pass
            ));
        }
        out
    }
}

/// A pre-generated sample: parameter point plus the auxiliary random data
/// the hyperkähler and harmonicity checks need.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub w: Vec<Complex64>,
    pub y: DVector<f64>,
    pub c: Vec<f64>,
    pub w3: f64,
}

pub fn sample_points(domain: &DomainBox, count: usize, seed: u64) -> Vec<SamplePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = domain.n();
    let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
    (0..count)
        .map(|_| {
            let w = (0..n)
                .map(|j| {
                    let re = draw(domain.re[j]);
                    let im = draw(domain.im[j]);
                    Complex64::new(re, im)
                })
                .collect();
            let y = DVector::from_fn(2 * n, |_, _| draw((-1.0, 1.0)));
            let c = (0..n).map(|_| draw((0.5, 1.5))).collect();
            let w3 = draw((-1.0, 1.0));
            SamplePoint { w, y, c, w3 }
        })
        .collect()
}

enum PointOutcome {
    Singular,
    Evaluated {
        residuals: Vec<std::result::Result<f64, String>>,
        k_plus_phi: f64,
        signature: String,
    },
}

/// Two polylines in the flat chart from x(w) to x(w₁), where w₁ lies a
/// tenth of the way towards the box centre; the second detours through a
/// point displaced off the straight line.
fn recovery_paths(f: &PrepotentialExpr, w: &[Complex64], domain: &DomainBox) -> Result<[Vec<DVector<f64>>; 2]> {
    let center: Vec<Complex64> = domain
        .re
        .iter()
        .zip(&domain.im)
        .map(|(r, i)| Complex64::new(0.5 * (r.0 + r.1), 0.5 * (i.0 + i.1)))
        .collect();
    let mut offset: Vec<Complex64> = w.iter().zip(&center).map(|(a, b)| (b - a) * 0.1).collect();
    if offset.iter().all(|o| o.norm() < 1e-3) {
        offset = vec![Complex64::new(0.05, 0.05); w.len()];
    }
    let shifted = |t: Complex64| -> Vec<Complex64> { w.iter().zip(&offset).map(|(a, o)| a + o * t).collect() };
    let x0 = embed(f, w)?.x;
    let x1 = embed(f, &shifted(Complex64::new(1.0, 0.0)))?.x;
    let detour = embed(f, &shifted(Complex64::new(0.5, 0.5)))?.x;
    Ok([vec![x0.clone(), x1.clone()], vec![x0, detour, x1]])
}

fn xi_recovery_residual(f: &PrepotentialExpr, w: &[Complex64], domain: &DomainBox, panels: usize) -> Result<f64> {
    let [straight, bent] = recovery_paths(f, w, domain)?;
    let a = special_kahler::recover_xi(f, &straight, w, panels)?;
    let b = special_kahler::recover_xi(f, &bent, w, panels)?;
    let agreement = (&a.xi_end_estimate - &b.xi_end_estimate).amax();
    Ok(a.mismatch.max(b.mismatch).max(agreement))
}

fn evaluate_point(f: &PrepotentialExpr, config: &RunConfig, point: &SamplePoint) -> PointOutcome {
    let base = match sk_point(f, &point.w) {
        Ok(b) => b,
        Err(_) => return PointOutcome::Singular,
    };
    let grad_step = config.fd_step;
    let ext_step = 10.0 * config.fd_step;
    let w = &point.w;
    let mut residuals = vec![Ok(f64::NAN); CHECKS.len()];
    let mut set = |name: &str, value: Result<f64>| {
        residuals[check_index(name)] = value.map_err(|e| e.to_string());
    };

    let frame = base.chart.tangent_frame();
    match bilagrangian_residual(&base.space(), &frame) {
        Ok(r) => {
            set("bilagrangian_omega1", Ok(r.r1));
            set("bilagrangian_omega2", Ok(r.r2));
        }
        Err(e) => {
            set("bilagrangian_omega1", Err(e.clone()));
            set("bilagrangian_omega2", Err(e));
        }
    }
    set("g_symmetry", Ok(base.g_asymmetry));
    set("i_squared", Ok(base.i_squared_residual()));
    set("i_orthogonal", Ok(base.orthogonality_residual()));
    set("i_symplectic", Ok(base.symplectic_residual().max(base.compatibility_residual())));
    let grad_stencil = ChartStencil::new(f, Projection::X, &base, grad_step);
    let ext_stencil = ChartStencil::new(f, Projection::X, &base, ext_step);
    let on = |stencil: &Result<ChartStencil>, check: fn(&ChartStencil) -> f64| stencil.as_ref().map(check).map_err(Clone::clone);
    set("dnabla_i", on(&ext_stencil, special_kahler::dnabla_i_on));
    set("hamiltonian_field", on(&grad_stencil, special_kahler::hamiltonian_field_on));
    set("type_10", Ok(special_kahler::holomorphic_coords_at(&base).1));
    set("kahler_potential", on(&ext_stencil, special_kahler::kahler_potential_on));
    set("legendre_gradient", special_kahler::legendre_dual(f, w, grad_step).map(|r| r.1));
    set("xi_recovery", xi_recovery_residual(f, w, &config.domain, config.panels));

    match hk_frame_at(base.clone(), &point.y, &SignConvention::STANDARD) {
        Ok(hk) => {
            set("quaternion", Ok(hk.quaternion_residual()));
            set("hk_block_forms", Ok(hk.block_form_residual()));
            set("metric_consistency", Ok(hk.metric_consistency_residual()));
            set("metric_symmetry", Ok(hk.metric_symmetry_residual()));
            set("metric_definiteness", Ok(if hk.definiteness_matches() { 0.0 } else { 1.0 }));
            match &grad_stencil {
                Ok(stencil) => {
                    let mm = hyperkahler::moment_map_on(&hk, stencil);
                    set("moment_map", Ok(mm.differential_residual));
                    set("equivariance", Ok(mm.equivariance_residual));
                }
                Err(e) => {
                    set("moment_map", Err(e.clone()));
                    set("equivariance", Err(e.clone()));
                }
            }
        }
        Err(e) => {
            for name in [
                "quaternion",
                "hk_block_forms",
                "metric_consistency",
                "metric_symmetry",
                "metric_definiteness",
                "moment_map",
                "equivariance",
            ] {
                set(name, Err(e.clone()));
            }
        }
    }
    set("closedness", on(&ext_stencil, hyperkahler::closedness_on));
    let p = [w[0].re, w[0].im, point.w3];
    set("harmonic", hyperkahler::harmonic_residual(f, &point.c, p));
    set("j1_potential", hyperkahler::j1_potential_residual(f, w, &point.y));
    let k_plus_phi = base.chart.value.re - (0..f.n()).map(|j| base.chart.x[j] * base.chart.xi[j]).sum::<f64>()
        + base.chart.phi;
    set("k_plus_phi", Ok(k_plus_phi.abs()));
    set("legendre_coordinates", hyperkahler::legendre_coordinate_residual(f, w, grad_step));

    PointOutcome::Evaluated {
        residuals,
        k_plus_phi,
        signature: base.signature.to_string(),
    }
}

fn w_pairs(w: &[Complex64]) -> Vec<[f64; 2]> {
    w.iter().map(|z| [z.re, z.im]).collect()
}

/// Runs the full suite over `config.samples` seeded points on the current
/// rayon pool.
pub fn run_verify(config: &RunConfig) -> Result<VerificationReport> {
    config.validate()?;
    let f = config.resolve()?;
    let started = Instant::now();
    let points = sample_points(&config.domain, config.samples, config.seed);
    let outcomes: Vec<PointOutcome> = points.par_iter().map(|p| evaluate_point(&f, config, p)).collect();

    #[derive(Default)]
    struct Acc {
        evaluated: usize,
        errors: usize,
        max: f64,
        worst: Option<(usize, f64)>,
        first_error: Option<(usize, String)>,
    }
    let mut accs: Vec<Acc> = (0..CHECKS.len()).map(|_| Acc::default()).collect();
    let mut singular = 0;
    let mut signatures = BTreeMap::new();
    let mut k_values = Vec::new();
    let mut k_indices = Vec::new();
    for (idx, outcome) in outcomes.iter().enumerate() {
        match outcome {
            PointOutcome::Singular => singular += 1,
            PointOutcome::Evaluated {
                residuals,
                k_plus_phi,
                signature,
            } => {
                *signatures.entry(signature.clone()).or_insert(0) += 1;
                k_values.push(*k_plus_phi);
                k_indices.push(idx);
                for c in per_point_checks() {
                    let acc = &mut accs[c];
                    match &residuals[c] {
                        Ok(r) => {
                            acc.evaluated += 1;
                            if !(*r <= acc.max) {
                                acc.max = if r.is_nan() { f64::INFINITY } else { *r };
                                acc.worst = Some((idx, *r));
                            }
                        }
                        Err(msg) => {
                            acc.errors += 1;
                            acc.first_error.get_or_insert((idx, msg.clone()));
                        }
                    }
                }
            }
        }
    }
    // Population variance of K + φ.
    let variance_idx = check_index("k_plus_phi_variance");
    if !k_values.is_empty() {
        let m = k_values.len() as f64;
        let mean = k_values.iter().sum::<f64>() / m;
        let var = k_values.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / m;
        let acc = &mut accs[variance_idx];
        acc.evaluated = k_values.len();
        acc.max = var;
        let worst = k_values
            .iter()
            .zip(&k_indices)
            .max_by(|a, b| (a.0 - mean).abs().total_cmp(&(b.0 - mean).abs()))
            .map(|(_, &i)| i)
            .unwrap();
        acc.worst = Some((worst, var));
    }

    let mut checks = Vec::with_capacity(CHECKS.len());
    let mut failures = Vec::new();
    for (c, (name, _)) in CHECKS.iter().enumerate() {
        let acc = &accs[c];
        let tolerance = config.tolerance(name);
        let (status, pass) = if acc.evaluated == 0 && acc.errors == 0 {
            (CheckStatus::SkippedSingular, false)
        } else if acc.errors == 0 && acc.max < tolerance {
            (CheckStatus::Pass, true)
        } else {
            (CheckStatus::Fail, false)
        };
        if status == CheckStatus::Fail {
            if let Some((idx, r)) = acc.worst.filter(|(_, r)| !(*r < tolerance)) {
                failures.push(Failure {
                    check: name.to_string(),
                    point_index: idx,
                    w: w_pairs(&points[idx].w),
                    residual: r.is_finite().then_some(r),
                    message: None,
                });
            }
            if let Some((idx, msg)) = &acc.first_error {
                failures.push(Failure {
                    check: name.to_string(),
                    point_index: *idx,
                    w: w_pairs(&points[*idx].w),
                    residual: None,
                    message: Some(msg.clone()),
                });
            }
        }
        checks.push(CheckResult {
            name: name.to_string(),
            points_evaluated: acc.evaluated,
            errors: acc.errors,
            max_abs_residual: acc.max,
            tolerance,
            pass,
            status,
        });
    }

    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        sign_vector: SignConvention::STANDARD,
        summary: RunSummary {
            points_total: points.len(),
            points_singular: singular,
            signatures,
        },
        checks,
        failures,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

/// [`run_verify`] on a dedicated pool of `threads` workers.
pub fn run_verify_with_threads(config: &RunConfig, threads: usize) -> Result<VerificationReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_verify(config))
}

/// Grid interpretation for [`run_scan`].
#[derive(Clone, Debug, PartialEq)]
pub enum ScanChart {
    /// The domain box axes are (Re w, Im w).
    Parameter,
    /// The domain box axes are the flat coordinates (x_1..x_n, x_{n+1}..x_{2n});
    /// points are located by Newton continuation from `guess`.
    Flat { guess: Vec<Complex64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub w: Option<Vec<[f64; 2]>>,
    pub x: Option<Vec<f64>>,
    pub det_g: Option<f64>,
    pub eigenvalues: Option<Vec<f64>>,
    pub signature: String,
    pub transversal: bool,
    /// Error text for rows where the structure could not be formed.
    pub singular: Option<String>,
}

fn grid_values((lo, hi): (f64, f64), count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

fn scan_row(f: &PrepotentialExpr, w: &[Complex64]) -> ScanRow {
    match sk_point(f, w) {
        Ok(p) => row_from(&p),
        Err(e) => ScanRow {
            w: Some(w_pairs(w)),
            x: embed(f, w).ok().map(|c| c.x.iter().copied().collect()),
            det_g: None,
            eigenvalues: None,
            signature: "singular".into(),
            transversal: false,
            singular: Some(e.to_string()),
        },
    }
}

fn row_from(p: &SKPoint) -> ScanRow {
    ScanRow {
        w: Some(w_pairs(&p.chart.w)),
        x: Some(p.chart.x.iter().copied().collect()),
        det_g: Some(p.det_g()),
        eigenvalues: Some(p.eigenvalues.clone()),
        signature: p.signature.to_string(),
        transversal: true,
        singular: None,
    }
}

/// Tabulates det g, eigenvalues and signature over a grid with
/// `counts[a]` nodes on axis `a` (parameter order). The last axis varies
/// fastest. Singular nodes are kept and marked.
pub fn run_scan(f: &PrepotentialExpr, domain: &DomainBox, counts: &[usize], chart: &ScanChart) -> Result<Vec<ScanRow>> {
    domain.validate()?;
    let axes = domain.axes();
    if counts.len() != axes.len() {
        return Err(Error::Config(format!("grid needs {} counts, got {}", axes.len(), counts.len())));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::Config("grid needs at least 2 nodes per axis".into()));
    }
    let values: Vec<Vec<f64>> = axes.iter().zip(counts).map(|(&ax, &c)| grid_values(ax, c)).collect();
    let total: usize = counts.iter().product();
    let coords = |flat: usize| -> Vec<f64> {
        let mut rem = flat;
        let mut out = vec![0.0; axes.len()];
        for a in (0..axes.len()).rev() {
            out[a] = values[a][rem % counts[a]];
            rem /= counts[a];
        }
        out
    };
    let n = domain.n();
    match chart {
        ScanChart::Parameter => Ok((0..total)
            .into_par_iter()
            .map(|k| {
                let c = coords(k);
                let w: Vec<Complex64> = (0..n).map(|j| Complex64::new(c[j], c[n + j])).collect();
                scan_row(f, &w)
            })
            .collect()),
        ScanChart::Flat { guess } => {
            let settings = NewtonSettings::default();
            let line = *counts.last().unwrap();
            let mut rows = Vec::with_capacity(total);
            let mut line_start: Option<Vec<Complex64>> = None;
            let mut previous: Option<Vec<Complex64>> = None;
            for k in 0..total {
                if k % line == 0 {
                    previous = line_start.clone();
                }
                let start = previous.clone().unwrap_or_else(|| guess.clone());
                let target = DVector::from_vec(coords(k));
                let row = match invert_projection(f, Projection::X, &target, &start, &settings) {
                    Ok(w) => {
                        let row = scan_row(f, &w);
                        if row.singular.is_none() {
                            if k % line == 0 {
                                line_start = Some(w.clone());
                            }
                            previous = Some(w);
                        }
                        row
                    }
                    Err(e) => ScanRow {
                        w: None,
                        x: Some(target.iter().copied().collect()),
                        det_g: None,
                        eigenvalues: None,
                        signature: "singular".into(),
                        transversal: false,
                        singular: Some(e.to_string()),
                    },
                };
                rows.push(row);
            }
            Ok(rows)
        }
    }
}

pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let join = |v: &Option<Vec<f64>>| {
        v.as_ref()
            .map(|v| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" "))
            .unwrap_or_default()
    };
    let mut out = String::from("w,x,det_g,eigenvalues,signature,transversal,singular\n");
    for r in rows {
        let w = r
            .w
            .as_ref()
            .map(|w| w.iter().map(|[a, b]| format!("{a:e}{b:+e}i")).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            w,
            join(&r.x),
            r.det_g.map(|d| format!("{d:e}")).unwrap_or_default(),
            join(&r.eigenvalues),
            r.signature,
            r.transversal,
            r.singular.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub w: Vec<[f64; 2]>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub phi: f64,
    /// Row-major.
    pub g: Vec<Vec<f64>>,
    /// Row j holds I^j_k.
    pub i: Vec<Vec<f64>>,
    pub z: Vec<[f64; 2]>,
    pub k: f64,
    /// Θ_abc in row-major (a, b, c) order.
    pub theta: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureDocument {
    pub schema_version: u32,
    pub prepotential: String,
    pub n: usize,
    pub sign_vector: SignConvention,
    pub records: Vec<FixtureRecord>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn export_fixture(f: &PrepotentialExpr, points: &[Vec<Complex64>]) -> Result<FixtureDocument> {
    let records = points
        .iter()
        .map(|w| {
            let p = sk_point(f, w)?;
            let (z, _) = special_kahler::holomorphic_coords_at(&p);
            let (k, _) = hyperkahler::hk_potential_check(f, w)?;
            let theta = cubic_form(f, w)?;
            Ok(FixtureRecord {
                w: w_pairs(w),
                x: p.chart.x.iter().copied().collect(),
                xi: p.chart.xi.iter().copied().collect(),
                phi: p.chart.phi,
                g: rows(&p.g),
                i: rows(&p.i),
                z: w_pairs(&z),
                k,
                theta: w_pairs(&theta.to_dense()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixtureDocument {
        schema_version: SCHEMA_VERSION,
        prepotential: f.to_string(),
        n: f.n(),
        sign_vector: SignConvention::STANDARD,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_is_reported_once() {
        let mut config = RunConfig::new("quad_plus", 1);
        config.samples = 3;
        let report = run_verify(&config).unwrap();
        let names: Vec<_> = report.checks.iter().map(|c| c.name.as_str()).collect();
        let expected: Vec<_> = CHECKS.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, expected);
        assert_eq!(report.outcome(), Outcome::Pass, "{}", report.to_json());
    }

    #[test]
    fn all_singular_is_distinct() {
        let mut config = RunConfig::new("cubic", 1);
        config.domain = DomainBox::uniform(1, (0.0, 0.0), (-1.0, 1.0));
        config.samples = 4;
        let report = run_verify(&config).unwrap();
        assert_eq!(report.outcome(), Outcome::AllSingular);
        assert_eq!(report.outcome().exit_code(), 3);
        assert!(report.checks.iter().all(|c| c.status == CheckStatus::SkippedSingular));
    }

    #[test]
    fn config_validation() {
        let mut config = RunConfig::new("quad_plus", 2);
        config.samples = 0;
        assert!(config.validate().is_err());
        let mut config = RunConfig::new("quad_plus", 2);
        config.tol_overrides.insert("nonsense".into(), 1.0);
        assert!(config.validate().is_err());
        let mut config = RunConfig::new("quad_plus", 2);
        config.tol_overrides.insert("harmonic".into(), -1.0);
        assert!(config.validate().is_err());
        let config = RunConfig::new("quad_plus", 3);
        assert_eq!(config.tolerance("dnabla_i"), 1e-4);
        assert!(matches!(resolve_prepotential("w1^^2", 1), Err(Error::Syntax { .. })));
    }

    #[test]
    fn tolerance_override_can_fail_a_check() {
        let mut config = RunConfig::new("cubic", 1);
        config.samples = 5;
        config.tol_overrides.insert("dnabla_i".into(), 1e-300);
        let report = run_verify(&config).unwrap();
        assert_eq!(report.outcome(), Outcome::CheckFailure);
        assert!(report.failures.iter().any(|f| f.check == "dnabla_i"));
    }

    #[test]
    fn sampling_is_seeded_and_in_box() {
        let domain = default_domain("cubic", 2).unwrap();
        let a = sample_points(&domain, 50, 7);
        assert_eq!(a, sample_points(&domain, 50, 7));
        assert_ne!(a, sample_points(&domain, 50, 8));
        for p in &a {
            for z in &p.w {
                assert!((0.5..=2.0).contains(&z.re) && (-1.0..=1.0).contains(&z.im));
            }
        }
    }

    #[test]
    fn scan_examples() {
        let m = builtin("quad_minus", 1).unwrap();
        let rows = run_scan(&m, &default_domain("quad_minus", 1).unwrap(), &[3, 3], &ScanChart::Parameter).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.signature == "(0,2)"));
        let c = builtin("cubic", 1).unwrap();
        let touching = DomainBox::uniform(1, (0.0, 1.0), (-1.0, 1.0));
        let rows = run_scan(&c, &touching, &[3, 3], &ScanChart::Parameter).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().filter(|r| r.singular.is_some()).count() >= 3);
        assert!(run_scan(&c, &touching, &[1, 3], &ScanChart::Parameter).is_err());
        assert!(scan_to_csv(&rows).lines().count() == 10);
    }

    #[test]
    fn flat_scan_uses_continuation() {
        let c = builtin("cubic", 1).unwrap();
        let x_box = DomainBox {
            re: vec![(-3.0, -2.0)],
            im: vec![(2.0, 2.5)],
        };
        let chart = ScanChart::Flat {
            guess: vec![Complex64::new(1.0, 1.5)],
        };
        let rows = run_scan(&c, &x_box, &[4, 4], &chart).unwrap();
        assert!(rows.iter().all(|r| r.singular.is_none()));
        for r in &rows {
            assert!((r.det_g.unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixture_documents() {
        let q = builtin("quad_plus", 1).unwrap();
        let doc = export_fixture(&q, &[vec![Complex64::new(1.0, 0.0)]]).unwrap();
        let r = &doc.records[0];
        assert_eq!(r.x, vec![1.0, 0.0]);
        assert_eq!(r.xi, vec![1.0, 0.0]);
        assert_eq!(r.phi, 0.5);
        assert_eq!(r.g, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let empty = export_fixture(&q, &[]).unwrap();
        assert!(empty.records.is_empty());
        let json = serde_json::to_string(&empty).unwrap();
        let back: FixtureDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, empty);
    }
}
