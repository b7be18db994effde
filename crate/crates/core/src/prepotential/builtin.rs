use serde::{Deserialize, Serialize};

use super::expr::PrepotentialExpr;
use super::parse::parse;
use crate::error::{Error, Result};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &["quad_plus", "quad_minus", "cubic", "mixed2"];

fn sum_of(n: usize, term: impl Fn(usize) -> String) -> String {
    (1..=n).map(term).collect::<Vec<_>>().join("+")
}

/// Built-in prepotentials:
///
/// * `quad_plus`  = ½ Σ w_j²
/// * `quad_minus` = −½ Σ w_j²
/// * `cubic`      = Σ w_j³ / 3
/// * `mixed2`     = w₁² w₂ (n = 2 only)
pub fn builtin(name: &str, n: usize) -> Result<PrepotentialExpr> {
    if n == 0 {
        return Err(Error::Arity(format!("builtin `{name}` needs n >= 1")));
    }
    let text = match name {
        "quad_plus" => format!("(1/2)*({})", sum_of(n, |j| format!("w{j}^2"))),
        "quad_minus" => format!("-(1/2)*({})", sum_of(n, |j| format!("w{j}^2"))),
        "cubic" => sum_of(n, |j| format!("w{j}^3/3")),
        "mixed2" => {
            if n != 2 {
                return Err(Error::Arity(format!("builtin `mixed2` is defined for n = 2, got n = {n}")));
            }
            "w1^2*w2".to_string()
        }
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    };
    parse(&text, n)
}

/// Axis-aligned box in parameter space: one interval for `Re w_j` and one
/// for `Im w_j` per variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub re: Vec<(f64, f64)>,
    pub im: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn uniform(n: usize, re: (f64, f64), im: (f64, f64)) -> Self {
        DomainBox {
            re: vec![re; n],
            im: vec![im; n],
        }
    }

    pub fn n(&self) -> usize {
        self.re.len()
    }

    /// The 2n intervals in parameter order (Re w_1..Re w_n, Im w_1..Im w_n).
    pub fn axes(&self) -> Vec<(f64, f64)> {
        self.re.iter().chain(&self.im).copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.re.len() != self.im.len() || self.re.is_empty() {
            return Err(Error::Config("domain box needs matching nonempty Re/Im interval lists".into()));
        }
        for (lo, hi) in self.axes() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("empty or invalid interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Default sampling box for a builtin: ‖w‖∞ ≤ 2 for the quadratics, and
/// boxes that keep `Re w_j > 0` (away from the non-transversal locus) for
/// `cubic` and `mixed2`.
pub fn default_domain(name: &str, n: usize) -> Option<DomainBox> {
    match name {
        "quad_plus" | "quad_minus" => Some(DomainBox::uniform(n, (-2.0, 2.0), (-2.0, 2.0))),
        "cubic" => Some(DomainBox::uniform(n, (0.5, 2.0), (-1.0, 1.0))),
        "mixed2" => Some(DomainBox::uniform(n, (0.5, 2.0), (-0.5, 0.5))),
        _ => None,
    }
}
