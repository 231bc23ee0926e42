//! Truncated power-series (Taylor-jet) arithmetic.
//!
//! A [`PowerSeries`] stores the scaled Taylor coefficients `coeffs[k] =
//! f^(k)(center)/k!` of a function at a fixed expansion point. Storing
//! `f^(k)/k!` instead of raw derivatives keeps the arithmetic free of
//! factorial overflow; factorials enter only at extraction
//! ([`PowerSeries::derivative_at`]), in log space for large `k`.
//!
//! All operations are pure and use min-order truncation semantics: the
//! result order is the smaller of the operand orders, never zero-padded.
//! Cauchy products accumulate with compensated (Kahan) summation.
//!
//! Arithmetic is plain IEEE binary64. Construction from user input
//! rejects nonfinite coefficients; results of arithmetic may carry
//! nonfinite values (overflow propagates), which downstream diagnostics
//! inspect and report.

use crate::error::{Error, Result};

/// Default construction cap on the series order.
pub const DEFAULT_MAX_ORDER: usize = 512;

/// Hard ceiling no configuration may exceed.
pub const ORDER_CEILING: usize = 4096;

/// Factorials are applied in log space above this derivative order.
const LOG_SPACE_FACTORIAL_THRESHOLD: usize = 150;

/// Configurable cap on series orders.
///
/// The default cap is [`DEFAULT_MAX_ORDER`]; explicit limits up to
/// [`ORDER_CEILING`] can be requested where large jets are needed
/// (e.g. high-order Post-Widder evaluations).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderLimit(usize);

impl OrderLimit {
    pub fn new(max_order: usize) -> Result<Self> {
        if max_order > ORDER_CEILING {
            return Err(Error::LimitTooLarge {
                requested: max_order,
                ceiling: ORDER_CEILING,
            });
        }
        Ok(OrderLimit(max_order))
    }

    pub fn max_order(self) -> usize {
        self.0
    }

    pub fn check(self, order: usize) -> Result<()> {
        if order > self.0 {
            Err(Error::OrderTooLarge {
                order,
                limit: self.0,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for OrderLimit {
    fn default() -> Self {
        OrderLimit(DEFAULT_MAX_ORDER)
    }
}

/// Compensated (Kahan-Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Truncated Taylor expansion of a real-analytic function.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    center: f64,
    coeffs: Vec<f64>,
}

impl PowerSeries {
    /// Builds a series from scaled Taylor coefficients, `coeffs[k] = f^(k)(center)/k!`,
    /// under the default order cap.
    pub fn new(center: f64, coeffs: Vec<f64>) -> Result<Self> {
        Self::with_limit(center, coeffs, OrderLimit::default())
    }

    /// Builds a series under an explicit order cap.
    pub fn with_limit(center: f64, coeffs: Vec<f64>, limit: OrderLimit) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::NonFiniteParameter { name: "center" });
        }
        if coeffs.is_empty() {
            return Err(Error::NonFiniteCoefficient { index: 0 });
        }
        limit.check(coeffs.len() - 1)?;
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index });
        }
        Ok(PowerSeries { center, coeffs })
    }

    /// Constant function `c`, truncated at `order`.
    pub fn constant(center: f64, value: f64, order: usize, limit: OrderLimit) -> Result<Self> {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self::with_limit(center, coeffs, limit)
    }

    /// Jet of the identity `s -> s` at `center`.
    pub fn identity(center: f64, order: usize, limit: OrderLimit) -> Result<Self> {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = center;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Self::with_limit(center, coeffs, limit)
    }

    /// Internal constructor for results of arithmetic; skips validation so
    /// that IEEE overflow propagates to the diagnostics layer instead of
    /// aborting mid-pipeline.
    pub(crate) fn raw(center: f64, coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        PowerSeries { center, coeffs }
    }

    pub(crate) fn raw_at_origin(coeffs: Vec<f64>) -> Self {
        Self::raw(0.0, coeffs)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    fn check_center(&self, rhs: &Self) -> Result<()> {
        // Exact comparison: jets meant to interact are built at the same point.
        if self.center == rhs.center {
            Ok(())
        } else {
            Err(Error::CenterMismatch {
                left: self.center,
                right: rhs.center,
            })
        }
    }

    /// Coefficientwise sum, truncated to the smaller order.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_center(rhs)?;
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeffs[k] + rhs.coeffs[k]).collect();
        Ok(Self::raw(self.center, coeffs))
    }

    /// Coefficientwise difference, truncated to the smaller order.
    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_center(rhs)?;
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeffs[k] - rhs.coeffs[k]).collect();
        Ok(Self::raw(self.center, coeffs))
    }

    /// Cauchy product truncated to the smaller order.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_center(rhs)?;
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = KahanSum::new();
            for i in 0..=k {
                acc.add(self.coeffs[i] * rhs.coeffs[k - i]);
            }
            coeffs.push(acc.value());
        }
        Ok(Self::raw(self.center, coeffs))
    }

    /// Series quotient `q` with `q * rhs = self` up to the truncation order.
    ///
    /// The constant term of the divisor must be exactly nonzero.
    pub fn div(&self, rhs: &Self) -> Result<Self> {
        self.check_center(rhs)?;
        if rhs.coeffs[0] == 0.0 {
            return Err(Error::DivisionByZeroConstant);
        }
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let mut q = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = KahanSum::new();
            acc.add(*self.coeffs.get(k).unwrap_or(&0.0));
            for i in 1..=k {
                if i < rhs.coeffs.len() {
                    acc.add(-rhs.coeffs[i] * q[k - i]);
                }
            }
            q.push(acc.value() / rhs.coeffs[0]);
        }
        Ok(Self::raw(self.center, q))
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        Self::raw(self.center, self.coeffs.iter().map(|c| -c).collect())
    }

    /// Scalar multiple.
    pub fn scale(&self, c: f64) -> Self {
        Self::raw(self.center, self.coeffs.iter().map(|v| c * v).collect())
    }

    /// Taylor series of `t -> outer(inner(t))` at the inner center.
    ///
    /// The inner constant term must equal the outer expansion point
    /// exactly; the composition is evaluated by Horner recursion on
    /// `inner - inner(0)`.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if inner.coeffs[0] != self.center {
            return Err(Error::CompositionMismatch {
                inner: inner.coeffs[0],
                center: self.center,
            });
        }
        let n = self.coeffs.len().min(inner.coeffs.len());
        let mut w = inner.coeffs[..n].to_vec();
        w[0] = 0.0;
        let w = Self::raw(inner.center, w);
        let mut acc = Self::constant(inner.center, self.coeffs[n - 1], n - 1, OrderLimit(n))
            .expect("constant jet");
        for k in (0..n - 1).rev() {
            acc = acc.mul(&w)?;
            acc.coeffs[0] += self.coeffs[k];
        }
        Ok(acc)
    }

    /// Exponential of the series.
    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let mut out = Vec::with_capacity(n);
        out.push(self.coeffs[0].exp());
        for k in 1..n {
            let mut acc = KahanSum::new();
            for j in 1..=k {
                acc.add(j as f64 * self.coeffs[j] * out[k - j]);
            }
            out.push(acc.value() / k as f64);
        }
        Self::raw(self.center, out)
    }

    /// Natural logarithm; requires a positive constant term.
    pub fn ln(&self) -> Result<Self> {
        let f0 = self.coeffs[0];
        if !(f0 > 0.0) {
            return Err(Error::NonPositiveConstantTerm {
                op: "log",
                value: f0,
            });
        }
        let n = self.coeffs.len();
        let mut out = Vec::with_capacity(n);
        out.push(f0.ln());
        for k in 1..n {
            let mut acc = KahanSum::new();
            acc.add(k as f64 * self.coeffs[k]);
            for j in 1..k {
                acc.add(-(j as f64) * out[j] * self.coeffs[k - j]);
            }
            out.push(acc.value() / (k as f64 * f0));
        }
        Ok(Self::raw(self.center, out))
    }

    /// Real power `f^r`; requires a positive constant term.
    pub fn powf(&self, r: f64) -> Result<Self> {
        let f0 = self.coeffs[0];
        if !(f0 > 0.0) {
            return Err(Error::NonPositiveConstantTerm {
                op: "pow",
                value: f0,
            });
        }
        let n = self.coeffs.len();
        let mut out = Vec::with_capacity(n);
        out.push(f0.powf(r));
        for k in 1..n {
            let mut acc = KahanSum::new();
            for j in 1..=k {
                acc.add(r * j as f64 * self.coeffs[j] * out[k - j]);
            }
            for j in 1..k {
                acc.add(-(j as f64) * out[j] * self.coeffs[k - j]);
            }
            out.push(acc.value() / (k as f64 * f0));
        }
        Ok(Self::raw(self.center, out))
    }

    /// Integer power by binary exponentiation; negative exponents require a
    /// nonzero constant term.
    pub fn powi(&self, k: i32) -> Result<Self> {
        let order = self.order();
        let one = Self::constant(self.center, 1.0, order, OrderLimit(order)).expect("one jet");
        if k == 0 {
            return Ok(one);
        }
        let mut base = if k < 0 { one.div(self)? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base)?,
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc.expect("nonzero exponent"))
    }

    /// Extracts `f^(k)(center) = k! * coeffs[k]`, in log space for large `k`.
    ///
    /// Errors if `k` exceeds the order or if the derivative overflows f64.
    pub fn derivative_at(&self, k: usize) -> Result<f64> {
        if k > self.order() {
            return Err(Error::DerivativeOrder {
                k,
                order: self.order(),
            });
        }
        let c = self.coeffs[k];
        if c == 0.0 {
            return Ok(0.0);
        }
        let value = if k <= LOG_SPACE_FACTORIAL_THRESHOLD {
            let mut fact = 1.0f64;
            for j in 2..=k {
                fact *= j as f64;
            }
            fact * c
        } else {
            let mut ln_fact = 0.0f64;
            for j in 2..=k {
                ln_fact += (j as f64).ln();
            }
            c.signum() * (ln_fact + c.abs().ln()).exp()
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Overflow)
        }
    }

    /// Horner evaluation of the truncated polynomial at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let t = x - self.center;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ps(center: f64, coeffs: &[f64]) -> PowerSeries {
        PowerSeries::new(center, coeffs.to_vec()).unwrap()
    }

    #[test]
    fn add_basic_and_identity() {
        // (1+y) + (2-y) = 3
        let s = ps(0.0, &[1.0, 1.0]).add(&ps(0.0, &[2.0, -1.0])).unwrap();
        assert_eq!(s.coeffs(), &[3.0, 0.0]);
        // a + 0 = a
        let a = ps(0.0, &[1.0, 2.0, 3.0]);
        assert_eq!(a.add(&ps(0.0, &[0.0, 0.0, 0.0])).unwrap(), a);
        assert_eq!(
            ps(0.0, &[1.0, 2.0, 3.0])
                .add(&ps(0.0, &[0.0, 1.0, 0.0]))
                .unwrap()
                .coeffs(),
            &[1.0, 3.0, 3.0]
        );
    }

    #[test]
    fn add_center_mismatch() {
        let err = ps(0.0, &[1.0]).add(&ps(1.0, &[1.0])).unwrap_err();
        assert!(matches!(err, Error::CenterMismatch { .. }));
    }

    #[test]
    fn mul_basic() {
        // (1+y)(1-y) at order 2 = 1 - y^2
        let s = ps(0.0, &[1.0, 1.0, 0.0])
            .mul(&ps(0.0, &[1.0, -1.0, 0.0]))
            .unwrap();
        assert_eq!(s.coeffs(), &[1.0, 0.0, -1.0]);
        // a * 1 = a
        let a = ps(0.5, &[3.0, -2.0, 0.25]);
        let one = PowerSeries::constant(0.5, 1.0, 2, OrderLimit::default()).unwrap();
        assert_eq!(a.mul(&one).unwrap(), a);
        // [1,1]*[1,1] order 2 -> [1,2,1]
        let s = ps(0.0, &[1.0, 1.0, 0.0])
            .mul(&ps(0.0, &[1.0, 1.0, 0.0]))
            .unwrap();
        assert_eq!(s.coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn mul_min_order_semantics() {
        let s = ps(0.0, &[1.0, 1.0]).mul(&ps(0.0, &[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.order(), 1);
    }

    #[test]
    fn div_geometric_and_roundtrip() {
        // 1/(1-y) order 3 = [1,1,1,1]
        let one = PowerSeries::constant(0.0, 1.0, 3, OrderLimit::default()).unwrap();
        let q = one.div(&ps(0.0, &[1.0, -1.0, 0.0, 0.0])).unwrap();
        assert_eq!(q.coeffs(), &[1.0, 1.0, 1.0, 1.0]);
        // a / a = 1
        let a = ps(0.0, &[2.0, -1.0, 0.5, 3.0]);
        let r = a.div(&a).unwrap();
        assert_eq!(r.coeffs(), &[1.0, 0.0, 0.0, 0.0]);
        // (1-y^2)/(1-y) = 1+y (order 2)
        let r = ps(0.0, &[1.0, 0.0, -1.0])
            .div(&ps(0.0, &[1.0, -1.0, 0.0]))
            .unwrap();
        assert_eq!(r.coeffs(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn div_by_zero_constant() {
        let err = ps(0.0, &[1.0, 0.0]).div(&ps(0.0, &[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DivisionByZeroConstant));
    }

    #[test]
    fn compose_exp_of_2y() {
        // outer = exp at 0 (order 3), inner = 2y -> e^{2y} = [1,2,2,4/3]
        let outer = ps(0.0, &[1.0, 1.0, 0.5, 1.0 / 6.0]);
        let inner = ps(0.0, &[0.0, 2.0, 0.0, 0.0]);
        let c = outer.compose(&inner).unwrap();
        assert_relative_eq!(c.coeffs()[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(c.coeffs()[1], 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.coeffs()[2], 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.coeffs()[3], 4.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn compose_identity_is_noop() {
        let outer = ps(2.0, &[4.0, 4.0, 1.0]);
        let inner = PowerSeries::identity(2.0, 2, OrderLimit::default()).unwrap();
        assert_eq!(outer.compose(&inner).unwrap().coeffs(), outer.coeffs());
    }

    #[test]
    fn compose_reciprocal_of_geometric() {
        // outer = jet of 1/s at 1, inner = 1/(1-y) at 0 -> 1-y
        let outer = ps(1.0, &[1.0, -1.0, 1.0, -1.0]);
        let inner = ps(0.0, &[1.0, 1.0, 1.0, 1.0]);
        let c = outer.compose(&inner).unwrap();
        assert_relative_eq!(c.coeffs()[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(c.coeffs()[1], -1.0, max_relative = 1e-14);
        assert!(c.coeffs()[2].abs() < 1e-14);
        assert!(c.coeffs()[3].abs() < 1e-14);
    }

    #[test]
    fn compose_mismatch_rejected() {
        let outer = ps(1.0, &[1.0, 1.0]);
        let inner = ps(0.0, &[0.5, 1.0]);
        assert!(matches!(
            outer.compose(&inner).unwrap_err(),
            Error::CompositionMismatch { .. }
        ));
    }

    #[test]
    fn exp_of_y() {
        let e = ps(0.0, &[0.0, 1.0, 0.0, 0.0]).exp();
        assert_relative_eq!(e.coeffs()[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(e.coeffs()[1], 1.0, max_relative = 1e-15);
        assert_relative_eq!(e.coeffs()[2], 0.5, max_relative = 1e-15);
        assert_relative_eq!(e.coeffs()[3], 1.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn powf_square_of_one_plus_y() {
        let p = ps(0.0, &[1.0, 1.0, 0.0]).powf(2.0).unwrap();
        assert_relative_eq!(p.coeffs()[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.coeffs()[1], 2.0, max_relative = 1e-14);
        assert_relative_eq!(p.coeffs()[2], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn powi_matches_repeated_mul() {
        let a = ps(0.0, &[2.0, 1.0, -0.5, 0.25]);
        let p3 = a.powi(3).unwrap();
        let m3 = a.mul(&a).unwrap().mul(&a).unwrap();
        for (x, y) in p3.coeffs().iter().zip(m3.coeffs()) {
            assert_relative_eq!(x, y, max_relative = 1e-13);
        }
        let inv = a.powi(-1).unwrap();
        let prod = inv.mul(&a).unwrap();
        assert_relative_eq!(prod.coeffs()[0], 1.0, max_relative = 1e-14);
        assert!(prod.coeffs()[1].abs() < 1e-14);
    }

    #[test]
    fn log_inverts_exp() {
        let a = ps(0.0, &[0.0, 0.7, -0.3, 0.11]);
        let back = a.exp().ln().unwrap();
        for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn log_requires_positive_constant() {
        assert!(matches!(
            ps(0.0, &[0.0, 1.0]).ln().unwrap_err(),
            Error::NonPositiveConstantTerm { .. }
        ));
        assert!(matches!(
            ps(0.0, &[-1.0, 1.0]).powf(0.5).unwrap_err(),
            Error::NonPositiveConstantTerm { .. }
        ));
    }

    #[test]
    fn derivative_extraction() {
        // exp jet: f''(0) = 1
        assert_relative_eq!(
            ps(0.0, &[1.0, 1.0, 0.5]).derivative_at(2).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        // k = 0 returns the constant term
        assert_eq!(ps(0.0, &[7.0, 1.0]).derivative_at(0).unwrap(), 7.0);
        // geometric: d^3/dy^3 1/(1-y) at 0 = 6
        assert_relative_eq!(
            ps(0.0, &[1.0, 1.0, 1.0, 1.0]).derivative_at(3).unwrap(),
            6.0,
            max_relative = 1e-15
        );
        assert!(matches!(
            ps(0.0, &[1.0]).derivative_at(1).unwrap_err(),
            Error::DerivativeOrder { .. }
        ));
    }

    #[test]
    fn derivative_log_space_path_matches_direct() {
        // coefficients of exp: c_k = 1/k!, so f^(k)(0) = 1 for every k
        let n = 200;
        let mut coeffs = Vec::with_capacity(n + 1);
        let mut c = 1.0f64;
        coeffs.push(c);
        for k in 1..=n {
            c /= k as f64;
            coeffs.push(c);
        }
        let s = PowerSeries::new(0.0, coeffs).unwrap();
        assert_relative_eq!(s.derivative_at(160).unwrap(), 1.0, max_relative = 1e-11);
    }

    #[test]
    fn construction_guards() {
        assert!(matches!(
            PowerSeries::new(0.0, vec![1.0, f64::NAN]).unwrap_err(),
            Error::NonFiniteCoefficient { index: 1 }
        ));
        assert!(matches!(
            PowerSeries::new(f64::INFINITY, vec![1.0]).unwrap_err(),
            Error::NonFiniteParameter { .. }
        ));
        assert!(matches!(
            PowerSeries::new(0.0, vec![0.0; DEFAULT_MAX_ORDER + 2]).unwrap_err(),
            Error::OrderTooLarge { .. }
        ));
        assert!(OrderLimit::new(ORDER_CEILING + 1).is_err());
        let big = OrderLimit::new(1024).unwrap();
        assert!(PowerSeries::with_limit(0.0, vec![0.0; 1025], big).is_ok());
    }
}
