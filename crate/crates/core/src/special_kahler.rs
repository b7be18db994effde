//! The special pseudo-Kähler structure induced on a bilagrangian graph.
//!
//! In the flat chart `x` (projection onto the first factor) the metric is the
//! Hessian of φ, and the complex structure is `I = ω⁻¹ g`, i.e.
//! `I^j_k = Σ_a ω^{ja} g_{ak}`. The metric is obtained from the parameter
//! chart as `g = (∂ξ/∂p)(∂x/∂p)⁻¹`; its symmetry is then a genuine check that
//! the graph is Ω₁-Lagrangian.
//!
//! The `*_residual` and `*_check` functions verify identities of the
//! structure by central finite differences in the flat chart, where every
//! evaluation point is located by Newton inversion warm-started at the base
//! point.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Signature};
use crate::prepotential::{embed, ChartPoint, PrepotentialExpr};
use crate::symplectic::SymplecticSpace;

/// FD step for gradient and Jacobian checks.
pub const GRADIENT_STEP: f64 = 1e-4;
/// FD step for exterior-derivative checks.
pub const EXTERIOR_STEP: f64 = 1e-3;
/// Zero threshold for metric eigenvalues, relative to ‖g‖.
pub const SIGNATURE_RTOL: f64 = 1e-8;
/// Relative singular-value floor below which the chart Jacobian is treated
/// as singular when forming g.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Which projection of the graph a Newton solve inverts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Flat coordinates `x` (first factor).
    X,
    /// Dual flat coordinates `ξ` (second factor).
    Xi,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// A solve whose Jacobian has `σ_min / σ_max` below this at any iterate
    /// is reported as [`Error::SingularJacobian`].
    pub condition_floor: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tolerance: 1e-11,
            max_iterations: 50,
            max_halvings: 20,
            condition_floor: 1e-6,
        }
    }
}

fn params_of(w: &[Complex64]) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |i, _| if i < n { w[i].re } else { w[i - n].im })
}

fn w_of(p: &DVector<f64>) -> Vec<Complex64> {
    let n = p.len() / 2;
    (0..n).map(|j| Complex64::new(p[j], p[n + j])).collect()
}

fn projected(point: &ChartPoint, proj: Projection) -> (&DVector<f64>, DMatrix<f64>) {
    match proj {
        Projection::X => (&point.x, point.x_jacobian()),
        Projection::Xi => (&point.xi, point.xi_jacobian()),
    }
}

/// Solves `x(w) = x_target` (or `ξ(w) = target`) by damped Newton iteration
/// from `w_guess`.
pub fn invert_projection(
    f: &PrepotentialExpr,
    proj: Projection,
    target: &DVector<f64>,
    w_guess: &[Complex64],
    settings: &NewtonSettings,
) -> Result<Vec<Complex64>> {
    let n = f.n();
    if target.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: target.len(),
        });
    }
    let residual_at = |p: &DVector<f64>| -> Result<(f64, ChartPoint)> {
        let point = embed(f, &w_of(p))?;
        let r = (target - projected(&point, proj).0).amax();
        Ok((r, point))
    };
    let mut p = params_of(w_guess);
    let (mut res, mut point) = residual_at(&p)?;
    let mut polish_steps = 0;
    for _ in 0..settings.max_iterations {
        let (value, jac) = projected(&point, proj);
        let ratio = linalg::singular_ratio(&jac);
        if ratio < settings.condition_floor {
            return Err(Error::SingularJacobian { ratio });
        }
        if res < settings.tolerance {
            // a couple of extra steps push the residual to rounding level
            if polish_steps == 2 {
                return Ok(w_of(&p));
            }
            polish_steps += 1;
        }
        let step = jac
            .lu()
            .solve(&(target - value))
            .ok_or(Error::SingularJacobian { ratio: 0.0 })?;
        let polishing = res < settings.tolerance;
        let halvings = if polishing { 0 } else { settings.max_halvings };
        let mut t = 1.0;
        let mut last = None;
        let mut accepted = false;
        for _ in 0..=halvings {
            let candidate = &p + &step * t;
            if let Ok((r, pt)) = residual_at(&candidate) {
                accepted = r < res;
                last = Some((candidate, r, pt));
                if accepted {
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted && polishing {
            return Ok(w_of(&p));
        }
        match last {
            Some((candidate, r, pt)) => {
                p = candidate;
                res = r;
                point = pt;
            }
            None => return Err(Error::domain("newton", "every damped step left the analyticity domain")),
        }
    }
    if res < settings.tolerance {
        return Ok(w_of(&p));
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        residual: res,
    })
}

/// Finds `w` with `x(w) = x_target` starting from `w_guess`.
pub fn invert_chart(f: &PrepotentialExpr, x_target: &[f64], w_guess: &[Complex64]) -> Result<Vec<Complex64>> {
    invert_projection(
        f,
        Projection::X,
        &DVector::from_column_slice(x_target),
        w_guess,
        &NewtonSettings::default(),
    )
}

/// Metric, complex structure and signature at a chart point.
#[derive(Clone, Debug, PartialEq)]
pub struct SKPoint {
    pub chart: ChartPoint,
    pub g: DMatrix<f64>,
    /// `I^j_k` stored as row j, column k.
    pub i: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
    /// `max |g − gᵀ|` before symmetrization.
    pub g_asymmetry: f64,
}

impl SKPoint {
    pub fn n(&self) -> usize {
        self.chart.n()
    }

    pub fn space(&self) -> SymplecticSpace {
        SymplecticSpace::standard(self.n())
    }

    /// `max |I² + Id|`
    pub fn i_squared_residual(&self) -> f64 {
        let dim = self.g.nrows();
        (&self.i * &self.i + DMatrix::identity(dim, dim)).amax()
    }

    /// `max |Iᵀ g I − g|`
    pub fn orthogonality_residual(&self) -> f64 {
        linalg::max_abs_diff(&(self.i.transpose() * &self.g * &self.i), &self.g)
    }

    /// `max |Iᵀ ω I − ω|` (I is a symplectic map).
    pub fn symplectic_residual(&self) -> f64 {
        let space = self.space();
        linalg::max_abs_diff(&(self.i.transpose() * space.omega() * &self.i), space.omega())
    }

    /// `max |ω I − g|`: recovers the metric from ω and I.
    pub fn compatibility_residual(&self) -> f64 {
        linalg::max_abs_diff(&(self.space().omega() * &self.i), &self.g)
    }

    pub fn det_g(&self) -> f64 {
        self.g.determinant()
    }
}

pub fn sk_point(f: &PrepotentialExpr, w: &[Complex64]) -> Result<SKPoint> {
    sk_point_from_chart(embed(f, w)?)
}

pub fn sk_point_from_chart(chart: ChartPoint) -> Result<SKPoint> {
    let a = chart.x_jacobian();
    let b = chart.xi_jacobian();
    let ratio = linalg::singular_ratio(&a);
    if ratio < SINGULAR_RTOL {
        return Err(Error::SingularJacobian { ratio });
    }
    // g A = B  ⇔  Aᵀ gᵀ = Bᵀ
    let g_t = a
        .transpose()
        .lu()
        .solve(&b.transpose())
        .ok_or(Error::SingularJacobian { ratio: 0.0 })?;
    let g_raw = g_t.transpose();
    let g_asymmetry = linalg::asymmetry(&g_raw);
    let g = linalg::symmetrized(&g_raw);
    let space = SymplecticSpace::standard(chart.n());
    let i = space.omega_inv() * &g;
    let (eigenvalues, signature) = linalg::signature(&g, SIGNATURE_RTOL);
    Ok(SKPoint {
        chart,
        g,
        i,
        eigenvalues,
        signature,
        g_asymmetry,
    })
}

/// Chart points at `c ± step·e_m` and `c ± 2·step·e_m` around a base point
/// `c` of the `proj` chart, each located by Newton inversion warm-started at
/// the base. Several derivative checks can share one stencil.
#[derive(Clone, Debug)]
pub struct ChartStencil {
    base: SKPoint,
    step: f64,
    /// Per coordinate: `[+h, −h, +2h, −2h]`.
    neighbours: Vec<[SKPoint; 4]>,
}

impl ChartStencil {
    pub fn new(f: &PrepotentialExpr, proj: Projection, base: &SKPoint, step: f64) -> Result<Self> {
        let settings = NewtonSettings::default();
        let origin = match proj {
            Projection::X => &base.chart.x,
            Projection::Xi => &base.chart.xi,
        };
        let at = |m: usize, h: f64| -> Result<SKPoint> {
            let mut target = origin.clone();
            target[m] += h;
            let w = invert_projection(f, proj, &target, &base.chart.w, &settings)?;
            sk_point(f, &w)
        };
        let neighbours = (0..origin.len())
            .map(|m| Ok([at(m, step)?, at(m, -step)?, at(m, 2.0 * step)?, at(m, -2.0 * step)?]))
            .collect::<Result<_>>()?;
        Ok(ChartStencil {
            base: base.clone(),
            step,
            neighbours,
        })
    }

    pub fn base(&self) -> &SKPoint {
        &self.base
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Five-point central differences (truncation O(step⁴)); entry `m` is
    /// ∂q/∂(coordinate m).
    pub fn derivative(&self, quantity: impl Fn(&SKPoint) -> DVector<f64>) -> Vec<DVector<f64>> {
        self.neighbours
            .iter()
            .map(|[p1, m1, p2, m2]| {
                let near = quantity(p1) - quantity(m1);
                let far = quantity(p2) - quantity(m2);
                (near * 8.0 - far) / (12.0 * self.step)
            })
            .collect()
    }
}

fn x_stencil(f: &PrepotentialExpr, w: &[Complex64], step: f64) -> Result<ChartStencil> {
    ChartStencil::new(f, Projection::X, &sk_point(f, w)?, step)
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Hamiltonian field of φ, `a_j = Σ_i ω^{ji} ∂φ/∂x_i`; returns
/// `max |∂a_j/∂x_k − I^j_k|`.
pub fn hamiltonian_field_check(f: &PrepotentialExpr, w: &[Complex64], step: f64) -> Result<f64> {
    Ok(hamiltonian_field_on(&x_stencil(f, w, step)?))
}

pub fn hamiltonian_field_on(stencil: &ChartStencil) -> f64 {
    let base = stencil.base();
    let space = base.space();
    let d = stencil.derivative(|p| space.omega_inv() * &p.chart.xi);
    let dim = d.len();
    let mut worst = 0.0f64;
    for (k, col) in d.iter().enumerate() {
        for j in 0..dim {
            worst = worst.max((col[j] - base.i[(j, k)]).abs());
        }
    }
    worst
}

/// `max_{j,k,m} |∂_m I^j_k − ∂_k I^j_m|`: the flat connection satisfies
/// `d_∇ I = 0`.
pub fn dnabla_i_residual(f: &PrepotentialExpr, w: &[Complex64], step: f64) -> Result<f64> {
    Ok(dnabla_i_on(&x_stencil(f, w, step)?))
}

pub fn dnabla_i_on(stencil: &ChartStencil) -> f64 {
    let dim = stencil.base().g.nrows();
    let d = stencil.derivative(|p| flatten(&p.i));
    // column-major flattening: entry (j, k) sits at j + k·dim
    let mut worst = 0.0f64;
    for j in 0..dim {
        for k in 0..dim {
            for m in 0..dim {
                worst = worst.max((d[m][j + k * dim] - d[k][j + m * dim]).abs());
            }
        }
    }
    worst
}

/// Holomorphic coordinates `z_j = x_j − i Σ_k ω^{jk} ξ_k` and the type
/// residual `max |dz_j(I V) − i dz_j(V)|` over the coordinate basis, where
/// `dz_j = dx_j − i Σ_l I^j_l dx_l`.
pub fn holomorphic_coords(f: &PrepotentialExpr, w: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let base = sk_point(f, w)?;
    Ok(holomorphic_coords_at(&base))
}

pub fn holomorphic_coords_at(base: &SKPoint) -> (Vec<Complex64>, f64) {
    let space = base.space();
    let dim = base.g.nrows();
    let omega_xi = space.omega_inv() * &base.chart.xi;
    let z = (0..dim)
        .map(|j| Complex64::new(base.chart.x[j], -omega_xi[j]))
        .collect();
    let dz = |j: usize, v: &DVector<f64>| {
        let iv = &base.i * v;
        Complex64::new(v[j], -iv[j])
    };
    let mut worst = 0.0f64;
    for m in 0..dim {
        let mut e = DVector::zeros(dim);
        e[m] = 1.0;
        let ie = &base.i * &e;
        for j in 0..dim {
            let lhs = dz(j, &ie);
            let rhs = Complex64::new(0.0, 1.0) * dz(j, &e);
            worst = worst.max((lhs - rhs).norm());
        }
    }
    (z, worst)
}

/// Checks that φ is a Kähler potential: with `β_j = Σ_i I^i_j ∂φ/∂x_i`
/// (the 1-form I dφ), `dβ = −2ω` as Gram matrices, i.e. returns
/// `max_{k,j} |(∂_k β_j − ∂_j β_k) + 2 ω_kj|`.
pub fn kahler_potential_residual(f: &PrepotentialExpr, w: &[Complex64], step: f64) -> Result<f64> {
    Ok(kahler_potential_on(&x_stencil(f, w, step)?))
}

pub fn kahler_potential_on(stencil: &ChartStencil) -> f64 {
    let space = stencil.base().space();
    let d = stencil.derivative(|p| p.i.transpose() * &p.chart.xi);
    let dim = d.len();
    let mut worst = 0.0f64;
    for k in 0..dim {
        for j in 0..dim {
            let d_beta = d[k][j] - d[j][k];
            worst = worst.max((d_beta + 2.0 * space.omega()[(k, j)]).abs());
        }
    }
    worst
}

/// Legendre transform `φ* = Σ_{j≤2n} x_j ξ_j − φ` and
/// `max_j |∂φ*/∂ξ_j − x_j|` by differences in the ξ chart.
pub fn legendre_dual(f: &PrepotentialExpr, w: &[Complex64], step: f64) -> Result<(f64, f64)> {
    let base = sk_point(f, w)?;
    let phi_star = |p: &SKPoint| p.chart.x.dot(&p.chart.xi) - p.chart.phi;
    let d = ChartStencil::new(f, Projection::Xi, &base, step)?.derivative(|p| DVector::from_element(1, phi_star(p)));
    let residual = d
        .iter()
        .enumerate()
        .map(|(j, dj)| (dj[0] - base.chart.x[j]).abs())
        .fold(0.0, f64::max);
    Ok((phi_star(&base), residual))
}

/// Result of integrating `α_k = Σ ω_kl I^l_j dx_j` along a polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct XiRecovery {
    pub xi_end_estimate: DVector<f64>,
    pub xi_end: DVector<f64>,
    pub w_end: Vec<Complex64>,
    /// `‖estimate − ξ(end)‖∞`
    pub mismatch: f64,
}

/// Reconstructs ξ at the end of `path` (a polyline in the flat chart) from
/// ξ at its start, by composite Simpson quadrature with
/// `panels_per_segment` panels on each segment. Chart points along the path
/// are found by continuation from `w_start_guess`.
pub fn recover_xi(
    f: &PrepotentialExpr,
    path: &[DVector<f64>],
    w_start_guess: &[Complex64],
    panels_per_segment: usize,
) -> Result<XiRecovery> {
    if path.len() < 2 {
        return Err(Error::Config("a path needs at least two vertices".into()));
    }
    if panels_per_segment == 0 {
        return Err(Error::Config("Simpson quadrature needs at least one panel".into()));
    }
    let settings = NewtonSettings::default();
    let space = SymplecticSpace::standard(f.n());
    let mut w = invert_projection(f, Projection::X, &path[0], w_start_guess, &settings)?;
    let mut estimate = embed(f, &w)?.xi;
    for seg in path.windows(2) {
        let (start, end) = (&seg[0], &seg[1]);
        let delta = end - start;
        let nodes = 2 * panels_per_segment;
        let h = 1.0 / nodes as f64;
        let mut acc = DVector::zeros(delta.len());
        for s in 0..=nodes {
            let target = start + &delta * (s as f64 * h);
            w = invert_projection(f, Projection::X, &target, &w, &settings)?;
            let point = sk_point(f, &w)?;
            let alpha = space.omega() * &point.i * &delta;
            let weight = if s == 0 || s == nodes {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += alpha * weight;
        }
        estimate += acc * (h / 3.0);
    }
    let xi_end = embed(f, &w)?.xi;
    let mismatch = (&estimate - &xi_end).amax();
    Ok(XiRecovery {
        xi_end_estimate: estimate,
        xi_end,
        w_end: w,
        mismatch,
    })
}
