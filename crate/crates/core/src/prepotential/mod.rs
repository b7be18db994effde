//! Holomorphic prepotentials and the complex Lagrangian graph `v = ∂𝓕/∂w`.
//!
//! Coordinates on V × V* = R^{2n} × R^{2n} are identified with the complex
//! pairs `v_j = x_j + i ξ_{n+j}` and `w_j = ξ_j + i x_{n+j}`, so that the
//! complex symplectic form `½Ω₁ + iΩ₂` becomes `Σ dv_j ∧ dw_j`. The graph of
//! `v = 𝓕'(w)` is then Lagrangian for both Ω₁ and Ω₂.

mod builtin;
mod expr;
mod parse;

pub use builtin::{builtin, default_domain, DomainBox, BUILTIN_NAMES};
pub use expr::{Expr, Func, PrepotentialExpr};
pub use parse::parse;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;
use crate::jets::{idx3, sym3_len};
use crate::symplectic::ProductVector;

/// A point of the embedded chart, in the gauge
/// `φ = Σ_{k≤n} x_k ξ_k − Re 𝓕(w)`, which satisfies `dφ = Σ ξ_j dx_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub w: Vec<Complex64>,
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
    pub phi: f64,
    /// 𝓕(w)
    pub value: Complex64,
    /// Holomorphic Hessian ∂²𝓕/∂w_j∂w_k.
    pub tau: DMatrix<Complex64>,
}

impl ChartPoint {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Pushforwards of ∂/∂Re w_1, …, ∂/∂Re w_n, ∂/∂Im w_1, …, ∂/∂Im w_n.
    ///
    /// A parameter direction `dw` moves `v` by `τ dw`; the real components
    /// follow from the coordinate dictionary above.
    pub fn tangent_frame(&self) -> Vec<ProductVector> {
        let n = self.n();
        (0..2 * n)
            .map(|p| {
                let (j, dw) = if p < n {
                    (p, Complex64::new(1.0, 0.0))
                } else {
                    (p - n, Complex64::new(0.0, 1.0))
                };
                let mut a = DVector::zeros(2 * n);
                let mut alpha = DVector::zeros(2 * n);
                for k in 0..n {
                    let dv = self.tau[(k, j)] * dw;
                    a[k] = dv.re;
                    alpha[n + k] = dv.im;
                }
                alpha[j] = dw.re;
                a[n + j] = dw.im;
                ProductVector::new(a, alpha)
            })
            .collect()
    }

    /// `∂x/∂(Re w, Im w)` as a 2n×2n matrix (columns are frame dx-parts).
    pub fn x_jacobian(&self) -> DMatrix<f64> {
        frame_matrix(&self.tangent_frame(), |f| &f.a)
    }

    /// `∂ξ/∂(Re w, Im w)`.
    pub fn xi_jacobian(&self) -> DMatrix<f64> {
        frame_matrix(&self.tangent_frame(), |f| &f.alpha)
    }
}

pub(crate) fn frame_matrix(frame: &[ProductVector], part: impl Fn(&ProductVector) -> &DVector<f64>) -> DMatrix<f64> {
    let dim = frame.len();
    DMatrix::from_fn(dim, dim, |i, j| part(&frame[j])[i])
}

/// Places the point `w` on the graph of `∂𝓕/∂w`.
pub fn embed(f: &PrepotentialExpr, w: &[Complex64]) -> Result<ChartPoint> {
    let n = f.n();
    let jet = f.holo_jet(w, 2)?;
    let v = jet.grad().expect("order 2 jet");
    let mut x = DVector::zeros(2 * n);
    let mut xi = DVector::zeros(2 * n);
    for k in 0..n {
        x[k] = v[k].re;
        x[n + k] = w[k].im;
        xi[k] = w[k].re;
        xi[n + k] = v[k].im;
    }
    let phi = (0..n).map(|k| x[k] * xi[k]).sum::<f64>() - jet.value().re;
    Ok(ChartPoint {
        w: w.to_vec(),
        x,
        xi,
        phi,
        value: jet.value(),
        tau: jet.hessian().expect("order 2 jet"),
    })
}

pub fn tangent_frame(f: &PrepotentialExpr, w: &[Complex64]) -> Result<Vec<ProductVector>> {
    Ok(embed(f, w)?.tangent_frame())
}

/// Holomorphic cubic form Θ_abc = ∂³𝓕/∂w_a∂w_b∂w_c, stored packed.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicForm {
    n: usize,
    packed: Vec<Complex64>,
}

impl CubicForm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, a: usize, b: usize, c: usize) -> Complex64 {
        self.packed[idx3(self.n, a, b, c)]
    }

    /// Full n³ tensor in row-major (a, b, c) order.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push(self.at(a, b, c));
                }
            }
        }
        out
    }
}

pub fn cubic_form(f: &PrepotentialExpr, w: &[Complex64]) -> Result<CubicForm> {
    let jet = f.holo_jet(w, 3)?;
    let packed = jet.third_packed().expect("order 3 jet").to_vec();
    debug_assert_eq!(packed.len(), sym3_len(f.n()));
    Ok(CubicForm { n: f.n(), packed })
}
