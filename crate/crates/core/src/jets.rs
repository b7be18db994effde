//! Forward-mode truncated Taylor arithmetic to third order.
//!
//! A [`Jet`] carries the value of a scalar field together with its gradient,
//! Hessian and third-derivative tensor at a fixed point. Symmetric tensors
//! are stored packed (upper triangle / sorted index triples), so symmetry is
//! a property of the representation. Arithmetic propagates every populated
//! slot exactly; nothing here uses finite differences except [`fd_check`],
//! which exists as an independent oracle.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest supported derivative order.
pub const MAX_ORDER: u8 = 3;

/// Coefficient field of a jet: `f64` for real fields, `Complex64` for
/// holomorphic ones.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + nalgebra::Scalar
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(c: f64) -> Self;
    fn modulus(self) -> f64;
    fn exp(self) -> Self;
    fn checked_ln(self) -> Result<Self>;
    /// Square root; `differentiable` asks for a point where the derivative
    /// also exists (nonzero argument).
    fn checked_sqrt(self, differentiable: bool) -> Result<Self>;
    fn checked_recip(self) -> Result<Self> {
        if self.modulus() == 0.0 {
            return Err(Error::domain("div", "division by zero"));
        }
        Ok(Self::one() / self)
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(c: f64) -> Self {
        c
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn checked_ln(self) -> Result<Self> {
        if self <= 0.0 || !self.is_finite() {
            return Err(Error::domain("log", format!("nonpositive argument {self}")));
        }
        Ok(self.ln())
    }
    fn checked_sqrt(self, differentiable: bool) -> Result<Self> {
        if self < 0.0 || (differentiable && self == 0.0) {
            return Err(Error::domain("sqrt", format!("argument {self}")));
        }
        Ok(self.sqrt())
    }
}

/// Principal branches; arguments on the cut (the closed negative real axis)
/// are rejected rather than continued.
impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(c: f64) -> Self {
        Complex64::new(c, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn checked_ln(self) -> Result<Self> {
        if self.im == 0.0 && self.re <= 0.0 {
            return Err(Error::domain("log", format!("argument {self} on branch cut")));
        }
        Ok(self.ln())
    }
    fn checked_sqrt(self, differentiable: bool) -> Result<Self> {
        let on_cut = self.im == 0.0 && self.re < 0.0;
        if on_cut || (differentiable && self.norm() == 0.0) {
            return Err(Error::domain("sqrt", format!("argument {self} on branch cut")));
        }
        Ok(self.sqrt())
    }
}

pub(crate) fn sym2_len(m: usize) -> usize {
    m * (m + 1) / 2
}

pub(crate) fn sym3_len(m: usize) -> usize {
    m * (m + 1) * (m + 2) / 6
}

/// Packed index of the unordered pair `{i, j}` among `m` variables.
pub(crate) fn idx2(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * m - i + 1) / 2 + (j - i)
}

/// Packed index of the unordered triple `{i, j, k}` among `m` variables.
pub(crate) fn idx3(m: usize, i: usize, j: usize, k: usize) -> usize {
    let mut s = [i, j, k];
    s.sort_unstable();
    let [i, j, k] = s;
    let offset: usize = (0..i).map(|r| sym2_len(m - r)).sum();
    offset + idx2(m - i, j - i, k - i)
}

/// Truncated Taylor data of a scalar field on `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T: Scalar> {
    nvars: usize,
    order: u8,
    value: T,
    grad: Vec<T>,
    hess: Vec<T>,
    third: Vec<T>,
}

/// Real jet (fields on R^m).
pub type Jet3 = Jet<f64>;
/// Holomorphic (or complex-valued) jet.
pub type CJet3 = Jet<Complex64>;

impl<T: Scalar> Jet<T> {
    fn with_order(value: T, nvars: usize, order: u8) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let sized = |o: u8, len: usize| {
            if order >= o {
                vec![T::zero(); len]
            } else {
                Vec::new()
            }
        };
        Jet {
            nvars,
            order,
            value,
            grad: sized(1, nvars),
            hess: sized(2, sym2_len(nvars)),
            third: sized(3, sym3_len(nvars)),
        }
    }

    pub fn constant(value: T, nvars: usize, order: u8) -> Self {
        Self::with_order(value, nvars, order)
    }

    /// The coordinate function `x_index` at value `value`.
    pub fn variable(value: T, index: usize, nvars: usize, order: u8) -> Self {
        assert!(index < nvars);
        let mut jet = Self::with_order(value, nvars, order);
        if order >= 1 {
            jet.grad[index] = T::one();
        }
        jet
    }

    /// An affine function `value + Σ slope_i · x_i`.
    pub fn affine(value: T, slope: &[T], order: u8) -> Self {
        let mut jet = Self::with_order(value, slope.len(), order);
        if order >= 1 {
            jet.grad.copy_from_slice(slope);
        }
        jet
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn grad(&self) -> Option<&[T]> {
        (self.order >= 1).then_some(self.grad.as_slice())
    }

    pub fn hess_at(&self, i: usize, j: usize) -> Option<T> {
        (self.order >= 2).then(|| self.hess[idx2(self.nvars, i, j)])
    }

    pub fn third_at(&self, i: usize, j: usize, k: usize) -> Option<T> {
        (self.order >= 3).then(|| self.third[idx3(self.nvars, i, j, k)])
    }

    pub fn hessian(&self) -> Option<DMatrix<T>> {
        (self.order >= 2)
            .then(|| DMatrix::from_fn(self.nvars, self.nvars, |i, j| self.hess[idx2(self.nvars, i, j)]))
    }

    /// Packed third-derivative storage (sorted index triples, row-major).
    pub fn third_packed(&self) -> Option<&[T]> {
        (self.order >= 3).then_some(self.third.as_slice())
    }

    fn check_compatible(&self, other: &Self) -> u8 {
        assert_eq!(self.nvars, other.nvars, "jets over different variable counts");
        self.order.min(other.order)
    }

    fn truncated(mut self, order: u8) -> Self {
        if order < 1 {
            self.grad.clear();
        }
        if order < 2 {
            self.hess.clear();
        }
        if order < 3 {
            self.third.clear();
        }
        self.order = order;
        self
    }

    /// Applies a univariate function given its value and first three
    /// derivatives at `self.value` (Faà di Bruno to third order).
    pub fn compose(&self, d: [T; 4]) -> Self {
        let m = self.nvars;
        let [f0, f1, f2, f3] = d;
        let mut out = Self::with_order(f0, m, self.order);
        if self.order >= 1 {
            for (o, a) in out.grad.iter_mut().zip(&self.grad) {
                *o = f1 * *a;
            }
        }
        if self.order >= 2 {
            let a = &self.grad;
            let mut p = 0;
            for i in 0..m {
                for j in i..m {
                    out.hess[p] = f1 * self.hess[p] + f2 * a[i] * a[j];
                    p += 1;
                }
            }
        }
        if self.order >= 3 {
            let a = &self.grad;
            let h = |i, j| self.hess[idx2(m, i, j)];
            let mut p = 0;
            for i in 0..m {
                for j in i..m {
                    for k in j..m {
                        out.third[p] = f1 * self.third[p]
                            + f2 * (h(i, j) * a[k] + h(i, k) * a[j] + h(j, k) * a[i])
                            + f3 * a[i] * a[j] * a[k];
                        p += 1;
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, c: T) -> Self {
        self.compose([c * self.value, c, T::zero(), T::zero()])
    }

    pub fn add_scalar(&self, c: T) -> Self {
        let mut out = self.clone();
        out.value = out.value + c;
        out
    }

    pub fn recip(&self) -> Result<Self> {
        let r = self.value.checked_recip()?;
        let r2 = r * r;
        Ok(self.compose([
            r,
            -r2,
            T::from_f64(2.0) * r2 * r,
            T::from_f64(-6.0) * r2 * r2,
        ]))
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        Ok(self * &rhs.recip()?)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Result<Self> {
        let l = self.value.checked_ln()?;
        let r = self.value.checked_recip()?;
        let r2 = r * r;
        Ok(self.compose([l, r, -r2, T::from_f64(2.0) * r2 * r]))
    }

    pub fn sqrt(&self) -> Result<Self> {
        let s = self.value.checked_sqrt(self.order >= 1)?;
        if self.order == 0 {
            return Ok(Self::with_order(s, self.nvars, 0));
        }
        let r = s.checked_recip()?;
        let r3 = r * r * r;
        Ok(self.compose([
            s,
            T::from_f64(0.5) * r,
            T::from_f64(-0.25) * r3,
            T::from_f64(0.375) * r3 * r * r,
        ]))
    }

    /// Integer power by repeated squaring; negative exponents go through
    /// [`Jet::recip`].
    pub fn powi(&self, k: i64) -> Result<Self> {
        if k < 0 {
            return self.powi(-k)?.recip();
        }
        let mut result = Self::with_order(T::one(), self.nvars, self.order);
        let mut base = self.clone();
        let mut e = k as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }
}

impl Jet<f64> {
    /// Real power with a non-integer exponent; requires a positive base.
    pub fn powf(&self, p: f64) -> Result<Self> {
        if self.value <= 0.0 {
            return Err(Error::domain("powf", format!("nonpositive base {}", self.value)));
        }
        let x = self.value;
        Ok(self.compose([
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        ]))
    }
}

impl Jet<Complex64> {
    /// Real part, taken slot by slot (derivatives are with respect to real
    /// variables, so this is exact).
    pub fn re(&self) -> Jet<f64> {
        Jet {
            nvars: self.nvars,
            order: self.order,
            value: self.value.re,
            grad: self.grad.iter().map(|z| z.re).collect(),
            hess: self.hess.iter().map(|z| z.re).collect(),
            third: self.third.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> Jet<f64> {
        Jet {
            nvars: self.nvars,
            order: self.order,
            value: self.value.im,
            grad: self.grad.iter().map(|z| z.im).collect(),
            hess: self.hess.iter().map(|z| z.im).collect(),
            third: self.third.iter().map(|z| z.im).collect(),
        }
    }
}

impl<T: Scalar> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        let order = self.check_compatible(rhs);
        let zip = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| *x + *y).collect();
        Jet {
            nvars: self.nvars,
            order: self.order.max(rhs.order),
            value: self.value + rhs.value,
            grad: zip(&self.grad, &rhs.grad),
            hess: zip(&self.hess, &rhs.hess),
            third: zip(&self.third, &rhs.third),
        }
        .truncated(order)
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        let neg = |a: &[T]| a.iter().map(|x| -*x).collect();
        Jet {
            nvars: self.nvars,
            order: self.order,
            value: -self.value,
            grad: neg(&self.grad),
            hess: neg(&self.hess),
            third: neg(&self.third),
        }
    }
}

impl<T: Scalar> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        self + &(-rhs)
    }
}

impl<T: Scalar> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        let order = self.check_compatible(rhs);
        let m = self.nvars;
        let (a, b) = (self, rhs);
        let mut out = Jet::with_order(a.value * b.value, m, order);
        if order >= 1 {
            for i in 0..m {
                out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
            }
        }
        if order >= 2 {
            let mut p = 0;
            for i in 0..m {
                for j in i..m {
                    out.hess[p] = a.hess[p] * b.value
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i]
                        + a.value * b.hess[p];
                    p += 1;
                }
            }
        }
        if order >= 3 {
            let ah = |i, j| a.hess[idx2(m, i, j)];
            let bh = |i, j| b.hess[idx2(m, i, j)];
            let (ag, bg) = (&a.grad, &b.grad);
            let mut p = 0;
            for i in 0..m {
                for j in i..m {
                    for k in j..m {
                        out.third[p] = a.third[p] * b.value
                            + a.value * b.third[p]
                            + ah(i, j) * bg[k]
                            + ah(i, k) * bg[j]
                            + ah(j, k) * bg[i]
                            + ag[i] * bh(j, k)
                            + ag[j] * bh(i, k)
                            + ag[k] * bh(i, j);
                        p += 1;
                    }
                }
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($($tr:ident :: $m:ident),*) => {$(
        impl<T: Scalar> $tr for Jet<T> {
            type Output = Jet<T>;
            fn $m(self, rhs: Jet<T>) -> Jet<T> {
                (&self).$m(&rhs)
            }
        }
    )*};
}
forward_owned!(Add::add, Sub::sub, Mul::mul);

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        -&self
    }
}

/// Evaluates a real field on jets seeded at `x` (one variable per coordinate).
pub fn real_jet<F>(f: F, x: &[f64], order: u8) -> Result<Jet3>
where
    F: Fn(&[Jet3]) -> Result<Jet3>,
{
    if order > MAX_ORDER {
        return Err(Error::Config(format!("jet order {order} exceeds {MAX_ORDER}")));
    }
    let m = x.len();
    let vars: Vec<Jet3> = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| Jet::variable(xi, i, m, order))
        .collect();
    f(&vars)
}

/// Compares jet derivatives with central finite differences.
///
/// The gradient is checked against differences of values; the Hessian is
/// checked against differences of the (already checked) jet gradient, which
/// keeps the rounding floor at `eps / step` rather than `eps / step²`.
/// Returns the largest componentwise discrepancy.
pub fn fd_check<F>(f: F, x: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&[Jet3]) -> Result<Jet3>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let m = x.len();
    let jet = real_jet(&f, x, 2)?;
    let grad = jet.grad().expect("order 2 jet has a gradient");
    let shifted = |i: usize, h: f64| {
        let mut y = x.to_vec();
        y[i] += h;
        y
    };
    let mut worst = 0.0f64;
    for i in 0..m {
        let plus = real_jet(&f, &shifted(i, step), 1)?;
        let minus = real_jet(&f, &shifted(i, -step), 1)?;
        let fd_grad = (plus.value() - minus.value()) / (2.0 * step);
        worst = worst.max((fd_grad - grad[i]).abs());
        let (gp, gm) = (plus.grad().unwrap(), minus.grad().unwrap());
        for j in 0..m {
            let fd_hess = (gp[j] - gm[j]) / (2.0 * step);
            worst = worst.max((fd_hess - jet.hess_at(i, j).unwrap()).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_norm_sq(x: &[Jet3]) -> Result<Jet3> {
        Ok((&x[0] * &x[0] + &x[1] * &x[1]).scale(0.5))
    }

    fn cubic_potential(x: &[Jet3]) -> Result<Jet3> {
        let s = &x[0] + &(&x[1] * &x[1]);
        Ok(s.powf(1.5)?.scale(2.0 / 3.0))
    }

    #[test]
    fn packed_indices_are_dense_and_symmetric() {
        for m in 1..5 {
            let mut seen = vec![false; sym3_len(m)];
            for i in 0..m {
                for j in 0..m {
                    assert_eq!(idx2(m, i, j), idx2(m, j, i));
                    assert!(idx2(m, i, j) < sym2_len(m));
                    for k in 0..m {
                        let p = idx3(m, i, j, k);
                        assert_eq!(p, idx3(m, k, i, j));
                        assert_eq!(p, idx3(m, j, k, i));
                        seen[p] = true;
                    }
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn quadratic_form_jet() {
        let jet = real_jet(half_norm_sq, &[3.0, 4.0], 3).unwrap();
        assert_eq!(jet.value(), 12.5);
        assert_eq!(jet.grad().unwrap(), &[3.0, 4.0]);
        assert_eq!(jet.hessian().unwrap(), DMatrix::identity(2, 2));
        assert!(jet.third_packed().unwrap().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let c = |x: &[Jet3]| Ok(Jet::constant(7.25, x.len(), x[0].order()));
        let jet = real_jet(c, &[0.3, -1.0, 2.0], 3).unwrap();
        assert_eq!(jet.value(), 7.25);
        assert!(jet.grad().unwrap().iter().all(|&g| g == 0.0));
        assert!(jet.hessian().unwrap().iter().all(|&g| g == 0.0));
        assert!(jet.third_packed().unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unpopulated_slots_are_absent() {
        let jet = real_jet(half_norm_sq, &[1.0, 2.0], 1).unwrap();
        assert!(jet.grad().is_some());
        assert!(jet.hess_at(0, 0).is_none());
        assert!(jet.third_at(0, 0, 0).is_none());
        let jet = real_jet(half_norm_sq, &[1.0, 2.0], 0).unwrap();
        assert!(jet.grad().is_none());
    }

    #[test]
    fn cubic_potential_derivatives() {
        // s = x1 + x2^2 = 1 at (-3, 2); grad = (sqrt s, 2 x2 sqrt s),
        // hess = [[1/(2 sqrt s), x2/sqrt s], [x2/sqrt s, 2 sqrt s + 2 x2^2/sqrt s]].
        let jet = real_jet(cubic_potential, &[-3.0, 2.0], 3).unwrap();
        assert!((jet.value() - 2.0 / 3.0).abs() < 1e-15);
        let g = jet.grad().unwrap();
        assert!((g[0] - 1.0).abs() < 1e-14 && (g[1] - 4.0).abs() < 1e-14);
        let h = jet.hessian().unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 2.0, 10.0]);
        assert!((h - want).amax() < 1e-13);
    }

    #[test]
    fn fd_check_examples() {
        assert!(fd_check(half_norm_sq, &[3.0, 4.0], 1e-5).unwrap() < 1e-9);
        assert!(fd_check(cubic_potential, &[-3.0, 2.0], 1e-4).unwrap() < 1e-6);
        let exp = |x: &[Jet3]| Ok(x[0].exp());
        assert!(fd_check(exp, &[0.0], 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn fd_residual_is_second_order() {
        let r1 = fd_check(cubic_potential, &[-2.5, 1.7], 2e-3).unwrap();
        let r2 = fd_check(cubic_potential, &[-2.5, 1.7], 1e-3).unwrap();
        assert!(r1 / r2 > 3.0, "ratio {}", r1 / r2);
    }

    #[test]
    fn domain_errors() {
        let ln = |x: &[Jet3]| x[0].ln();
        assert!(matches!(real_jet(ln, &[-1.0], 1), Err(Error::Domain { .. })));
        let sqrt = |x: &[Jet3]| x[0].sqrt();
        assert!(matches!(real_jet(sqrt, &[0.0], 1), Err(Error::Domain { .. })));
        assert_eq!(real_jet(sqrt, &[0.0], 0).unwrap().value(), 0.0);
        let inv = |x: &[Jet3]| x[0].recip();
        assert!(matches!(real_jet(inv, &[0.0], 2), Err(Error::Domain { .. })));
        assert!(fd_check(half_norm_sq, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn third_order_of_quotient_and_log() {
        // f = ln(x) / x at x = 2: f' = (1 - ln x)/x^2, f'' = (2 ln x - 3)/x^3,
        // f''' = (11 - 6 ln x)/x^4.
        let f = |x: &[Jet3]| x[0].ln()?.checked_div(&x[0]);
        let jet = real_jet(f, &[2.0], 3).unwrap();
        let l = 2f64.ln();
        assert!((jet.grad().unwrap()[0] - (1.0 - l) / 4.0).abs() < 1e-15);
        assert!((jet.hess_at(0, 0).unwrap() - (2.0 * l - 3.0) / 8.0).abs() < 1e-15);
        assert!((jet.third_at(0, 0, 0).unwrap() - (11.0 - 6.0 * l) / 16.0).abs() < 1e-15);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = Jet::variable(1.3, 0, 1, 3);
        let p = x.powi(5).unwrap();
        assert!((p.third_at(0, 0, 0).unwrap() - 60.0 * 1.3f64.powi(2)).abs() < 1e-12);
        let q = x.powi(-2).unwrap();
        assert!((q.grad().unwrap()[0] + 2.0 / 1.3f64.powi(3)).abs() < 1e-14);
        assert_eq!(x.powi(0).unwrap().value(), 1.0);
    }

    #[test]
    fn mixed_order_operands_truncate() {
        let a = Jet::variable(1.0, 0, 2, 3);
        let b = Jet::variable(2.0, 1, 2, 1);
        let c = &a * &b;
        assert_eq!(c.order(), 1);
        assert!(c.hess_at(0, 1).is_none());
        assert_eq!(c.grad().unwrap(), &[2.0, 1.0]);
    }
}
