//! Constant symplectic linear algebra on V ≅ R^{2n} and the cotangent model
//! V × V* of the bilagrangian product.
//!
//! Two-forms are evaluated through their antisymmetric coefficient matrix,
//! `A(u, v) = uᵀ A v`, i.e. a form `Σ_{i,j} A_ij dx_i ∧ dx_j` summed over all
//! ordered index pairs has Gram matrix `2A`. Under this convention
//!
//! * `Ω₁ = 2 Σ dx_i ∧ dξ_i` gives `Ω₁(u, v) = 2 (u.a · v.α − v.a · u.α)`,
//! * `Ω₂ = Σ ω_ij dx_i ∧ dx_j + Σ ω^ij dξ_i ∧ dξ_j` gives
//!   `Ω₂(u, v) = 2 (u.aᵀ ω v.a + u.αᵀ ω⁻¹ v.α)`.
//!
//! The V × V description is related to this one by `ξ = ω y`
//! ([`SymplecticSpace::covector_from_vector`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for antisymmetry and invertibility of a user-supplied ω.
pub const FORM_TOLERANCE: f64 = 1e-12;

/// Relative singular-value floor used for rank and transversality flags.
pub const RANK_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticSpace {
    n: usize,
    omega: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
}

impl SymplecticSpace {
    /// `ω = Σ_j dx_j ∧ dx_{n+j}`, block form `[[0, I], [−I, 0]]`.
    pub fn standard(n: usize) -> Self {
        assert!(n >= 1, "symplectic space needs n >= 1");
        let dim = 2 * n;
        let omega = DMatrix::from_fn(dim, dim, |i, j| {
            if j == i + n {
                1.0
            } else if i == j + n {
                -1.0
            } else {
                0.0
            }
        });
        let omega_inv = -omega.clone();
        SymplecticSpace { n, omega, omega_inv }
    }

    /// Accepts an arbitrary constant form after checking antisymmetry and
    /// invertibility.
    pub fn from_matrix(omega: DMatrix<f64>) -> Result<Self> {
        let dim = omega.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || omega.ncols() != dim {
            return Err(Error::InvalidSymplectic(format!(
                "need an even square matrix, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        let skew = (&omega + omega.transpose()).amax();
        if skew > FORM_TOLERANCE {
            return Err(Error::InvalidSymplectic(format!("not antisymmetric (|ω+ωᵀ| = {skew:.3e})")));
        }
        if linalg::singular_ratio(&omega) < FORM_TOLERANCE {
            return Err(Error::InvalidSymplectic("degenerate".into()));
        }
        let omega_inv = omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSymplectic("degenerate".into()))?;
        Ok(SymplecticSpace {
            n: dim / 2,
            omega,
            omega_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Coefficients ω_ij.
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// Coefficients ω^ij of the inverse.
    pub fn omega_inv(&self) -> &DMatrix<f64> {
        &self.omega_inv
    }

    /// `ξ_i = Σ_j ω_ij y_j`: identifies the second V factor with V*.
    pub fn covector_from_vector(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.omega * y
    }

    pub fn vector_from_covector(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.omega_inv * xi
    }

    fn check(&self, u: &ProductVector) -> Result<()> {
        for len in [u.a.len(), u.alpha.len()] {
            if len != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// A tangent vector of V × V*: `a` is the dx-part, `alpha` the dξ-part.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductVector {
    pub a: DVector<f64>,
    pub alpha: DVector<f64>,
}

impl ProductVector {
    pub fn new(a: DVector<f64>, alpha: DVector<f64>) -> Self {
        ProductVector { a, alpha }
    }

    pub fn from_slices(a: &[f64], alpha: &[f64]) -> Self {
        ProductVector {
            a: DVector::from_column_slice(a),
            alpha: DVector::from_column_slice(alpha),
        }
    }

    fn dim_check(&self, other: &ProductVector) -> Result<()> {
        let d = self.a.len();
        for len in [self.alpha.len(), other.a.len(), other.alpha.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, got: len });
            }
        }
        Ok(())
    }
}

/// `Ω₁(u, v) = 2 (u.a · v.α − v.a · u.α)`.
pub fn eval_omega1(u: &ProductVector, v: &ProductVector) -> Result<f64> {
    u.dim_check(v)?;
    Ok(2.0 * (u.a.dot(&v.alpha) - v.a.dot(&u.alpha)))
}

/// `Ω₂(u, v) = 2 (u.aᵀ ω v.a + u.αᵀ ω⁻¹ v.α)`.
pub fn eval_omega2(space: &SymplecticSpace, u: &ProductVector, v: &ProductVector) -> Result<f64> {
    space.check(u)?;
    space.check(v)?;
    let x_part = u.a.dot(&(space.omega() * &v.a));
    let xi_part = u.alpha.dot(&(space.omega_inv() * &v.alpha));
    Ok(2.0 * (x_part + xi_part))
}

/// Polarization of `g((x,ξ),(x,ξ)) = ½⟨x, ξ⟩`; on the graph of `dφ` it
/// restricts to the Hessian of φ.
pub fn pairing_metric(u: &ProductVector, v: &ProductVector) -> Result<f64> {
    u.dim_check(v)?;
    Ok(0.5 * (u.a.dot(&v.alpha) + v.a.dot(&u.alpha)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilagrangianResidual {
    /// `max |Ω₁(f_i, f_j)|`
    pub r1: f64,
    /// `max |Ω₂(f_i, f_j)|`
    pub r2: f64,
    /// The dx-parts span V.
    pub transversal_x: bool,
    /// The dξ-parts span V*.
    pub transversal_xi: bool,
}

pub fn bilagrangian_residual(space: &SymplecticSpace, frame: &[ProductVector]) -> Result<BilagrangianResidual> {
    let dim = space.dim();
    if frame.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: frame.len(),
        });
    }
    for f in frame {
        space.check(f)?;
    }
    let xs = DMatrix::from_fn(dim, dim, |i, j| frame[j].a[i]);
    let xis = DMatrix::from_fn(dim, dim, |i, j| frame[j].alpha[i]);
    let stacked = DMatrix::from_fn(2 * dim, dim, |i, j| if i < dim { xs[(i, j)] } else { xis[(i - dim, j)] });
    let r = linalg::rank(&stacked, RANK_RTOL);
    if r < dim {
        return Err(Error::RankDeficient { rank: r, expected: dim });
    }
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for (i, u) in frame.iter().enumerate() {
        for v in &frame[i + 1..] {
            r1 = r1.max(eval_omega1(u, v)?.abs());
            r2 = r2.max(eval_omega2(space, u, v)?.abs());
        }
    }
    Ok(BilagrangianResidual {
        r1,
        r2,
        transversal_x: linalg::rank(&xs, RANK_RTOL) == dim,
        transversal_xi: linalg::rank(&xis, RANK_RTOL) == dim,
    })
}

/// Frame of the graph `ξ = H x`: `f_j = (e_j, H e_j)`.
pub fn graph_frame(h: &DMatrix<f64>) -> Vec<ProductVector> {
    let dim = h.nrows();
    (0..dim)
        .map(|j| {
            let mut e = DVector::zeros(dim);
            e[j] = 1.0;
            ProductVector::new(e, h.column(j).into_owned())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(dim: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    }

    #[test]
    fn standard_space_blocks() {
        let s = SymplecticSpace::standard(1);
        assert_eq!(s.omega(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(s.omega_inv(), &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        for n in 1..5 {
            let s = SymplecticSpace::standard(n);
            assert_eq!(s.omega().transpose(), -s.omega().clone());
            assert!((s.omega() * s.omega_inv() - DMatrix::identity(2 * n, 2 * n)).amax() < 1e-13);
        }
    }

    #[test]
    fn from_matrix_validates() {
        assert!(SymplecticSpace::from_matrix(DMatrix::identity(2, 2)).is_err());
        assert!(SymplecticSpace::from_matrix(DMatrix::zeros(2, 2)).is_err());
        assert!(SymplecticSpace::from_matrix(DMatrix::zeros(3, 3)).is_err());
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let s = SymplecticSpace::from_matrix(w).unwrap();
        assert_eq!(s.omega_inv()[(0, 1)], -0.5);
    }

    #[test]
    fn omega1_examples() {
        let u = ProductVector::new(e(2, 0), DVector::zeros(2));
        let v = ProductVector::new(DVector::zeros(2), e(2, 0));
        assert_eq!(eval_omega1(&u, &v).unwrap(), 2.0);
        assert_eq!(eval_omega1(&u, &u).unwrap(), 0.0);
        let w = ProductVector::new(e(2, 1), DVector::zeros(2));
        assert_eq!(eval_omega1(&u, &w).unwrap(), 0.0);
        let bad = ProductVector::new(e(3, 0), DVector::zeros(3));
        assert!(eval_omega1(&u, &bad).is_err());
    }

    #[test]
    fn omega2_examples() {
        let s = SymplecticSpace::standard(1);
        let x1 = ProductVector::new(e(2, 0), DVector::zeros(2));
        let x2 = ProductVector::new(e(2, 1), DVector::zeros(2));
        let xi1 = ProductVector::new(DVector::zeros(2), e(2, 0));
        let xi2 = ProductVector::new(DVector::zeros(2), e(2, 1));
        assert_eq!(eval_omega2(&s, &x1, &x2).unwrap(), 2.0);
        assert_eq!(eval_omega2(&s, &xi1, &xi2).unwrap(), -2.0);
        assert_eq!(eval_omega2(&s, &x1, &x1).unwrap(), 0.0);
        let wrong = ProductVector::new(e(4, 0), DVector::zeros(4));
        assert!(eval_omega2(&s, &x1, &wrong).is_err());
    }

    #[test]
    fn pairing_examples() {
        let diag = ProductVector::new(e(2, 0), e(2, 0));
        assert_eq!(pairing_metric(&diag, &diag).unwrap(), 1.0);
        let u = ProductVector::new(e(2, 0), DVector::zeros(2));
        let v = ProductVector::new(DVector::zeros(2), e(2, 0));
        assert_eq!(pairing_metric(&u, &v).unwrap(), 0.5);
        let w = ProductVector::new(e(2, 1), DVector::zeros(2));
        assert_eq!(pairing_metric(&u, &w).unwrap(), 0.0);
    }

    #[test]
    fn identity_graph_is_bilagrangian() {
        let s = SymplecticSpace::standard(1);
        let res = bilagrangian_residual(&s, &graph_frame(&DMatrix::identity(2, 2))).unwrap();
        assert_eq!(res.r1, 0.0);
        assert_eq!(res.r2, 0.0);
        assert!(res.transversal_x && res.transversal_xi);
    }

    #[test]
    fn x_only_frame() {
        let s = SymplecticSpace::standard(2);
        let frame: Vec<_> = (0..4).map(|j| ProductVector::new(e(4, j), DVector::zeros(4))).collect();
        let res = bilagrangian_residual(&s, &frame).unwrap();
        assert_eq!(res.r1, 0.0);
        assert_eq!(res.r2, 2.0);
        assert!(res.transversal_x);
        assert!(!res.transversal_xi);
    }

    #[test]
    fn rank_deficient_frame_is_rejected() {
        let s = SymplecticSpace::standard(1);
        let f = ProductVector::new(e(2, 0), e(2, 1));
        let err = bilagrangian_residual(&s, &[f.clone(), f]).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 1, expected: 2 });
    }

    #[test]
    fn covector_identification_round_trips() {
        let s = SymplecticSpace::standard(2);
        let y = DVector::from_column_slice(&[0.5, -1.0, 2.0, 3.0]);
        let back = s.vector_from_covector(&s.covector_from_vector(&y));
        assert!((back - y).amax() < 1e-15);
    }
}
