//! Small dense helpers shared by the geometry modules.

use nalgebra::{DMatrix, SymmetricEigen};

/// Ratio of smallest to largest singular value (0 for the zero matrix).
pub fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Numerical rank with singular values below `rtol · σ_max` treated as zero.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * max).count()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    max_abs_diff(m, &m.transpose())
}

pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inertia of a symmetric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Nondegenerate { positive: usize, negative: usize },
    /// Some eigenvalue fell inside the zero threshold.
    Degenerate,
}

impl Signature {
    pub fn is_positive_definite(&self) -> bool {
        matches!(self, Signature::Nondegenerate { negative: 0, .. })
    }

    pub fn is_negative_definite(&self) -> bool {
        matches!(self, Signature::Nondegenerate { positive: 0, .. })
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Signature::Nondegenerate { positive, negative } => write!(f, "({positive},{negative})"),
            Signature::Degenerate => f.write_str("degenerate"),
        }
    }
}

/// Eigenvalues (ascending) and signature with zero threshold `rtol · ‖m‖`.
pub fn signature(m: &DMatrix<f64>, rtol: f64) -> (Vec<f64>, Signature) {
    let eig = SymmetricEigen::new(symmetrized(m));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    let threshold = rtol * m.norm();
    if values.iter().any(|v| v.abs() <= threshold) {
        return (values, Signature::Degenerate);
    }
    let positive = values.iter().filter(|&&v| v > 0.0).count();
    let sig = Signature::Nondegenerate {
        positive,
        negative: values.len() - positive,
    };
    (values, sig)
}
