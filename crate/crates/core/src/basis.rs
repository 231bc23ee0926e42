//! Orthonormal generalized-Laguerre system for the gamma weight.
//!
//! For the Gamma(a, λ) density `f_λ(x) = λ^a/Γ(a) · x^{a-1} e^{-λx}` the
//! complete orthonormal polynomial system `q_{n;λ}` (degree n, positive
//! leading coefficient) satisfies `q_{n;λ}(x) = q_{n;1}(λx)`, so only the
//! unit-rate system is materialized. It is built from the associated
//! Laguerre three-term recurrence; in orthonormal form
//!
//! ```text
//! sqrt((n+1)(n+a)) q_{n+1}(t) = (t - (2n+a)) q_n(t) - sqrt(n(n+a-1)) q_{n-1}(t)
//! ```
//!
//! with `q_0 = 1`, `q_1(t) = (t - a)/sqrt(a)`.
//!
//! Inner products against the gamma weight are exact: a polynomial
//! expectation is a finite sum of gamma moments `E[X^k] = [a]_k / λ^k`
//! with `[a]_k` the ascending factorial, and the whole sum is carried out
//! in exact rational arithmetic (every f64 input converts exactly), so
//! the only rounding is the final conversion back to f64. Monomial
//! moment sums cancel catastrophically in plain f64 — about ten digits
//! are lost by degree 15 — while the exact sum is clean.

use num::bigint::BigInt;
use num::rational::Ratio;
use num::traits::ToPrimitive;
use num::{One, Zero};

use crate::error::{Error, Result};

type Rational = Ratio<BigInt>;

/// Highest degree a basis may be built for.
pub const MAX_BASIS_DEGREE: usize = 200;

/// Monomial coefficient tables stop here; beyond this degree the
/// alternating monomial coefficients are numerically useless and the
/// recurrence serves evaluation.
pub const TABLE_DEGREE_CAP: usize = 40;

/// Cap on the Rodrigues differentiation order.
pub const MAX_RODRIGUES_ORDER: usize = 60;

/// Gamma model Γ(a, λ): shape `a > 0`, rate `λ > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaModel {
    shape: f64,
    rate: f64,
}

impl GammaModel {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::NonPositiveParameter {
                name: "shape",
                value: shape,
            });
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::NonPositiveParameter {
                name: "rate",
                value: rate,
            });
        }
        Ok(GammaModel { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Density value at `x > 0`; used by test oracles.
    pub fn density(&self, x: f64) -> f64 {
        let a = self.shape;
        let l = self.rate;
        let ln_gamma_a = ln_gamma(a);
        (a * l.ln() + (a - 1.0) * x.ln() - l * x - ln_gamma_a).exp()
    }
}

/// ln Γ(a) via the Lanczos approximation (g = 7, n = 9); absolute error
/// below 1e-13 for a > 0, plenty for the density used in test oracles.
fn ln_gamma(a: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if a < 0.5 {
        // reflection
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * a).sin().ln()
            - ln_gamma(1.0 - a);
    }
    let x = a - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Orthonormal polynomial system for shape `a`, unit rate.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    shape: f64,
    max_degree: usize,
    table: Vec<Vec<f64>>,
}

/// Builds the basis for `a > 0` up to `max_degree <= 200`; monomial
/// tables are materialized to degree `min(max_degree, 40)`.
pub fn build_basis(shape: f64, max_degree: usize) -> Result<OrthoBasis> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "shape",
            value: shape,
        });
    }
    if max_degree > MAX_BASIS_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: max_degree,
            cap: MAX_BASIS_DEGREE,
        });
    }
    let table_degree = max_degree.min(TABLE_DEGREE_CAP);
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(table_degree + 1);
    table.push(vec![1.0]);
    if table_degree >= 1 {
        let r = shape.sqrt();
        table.push(vec![-shape / r, 1.0 / r]);
    }
    for n in 1..table_degree {
        let a = shape;
        let nf = n as f64;
        let mut next = vec![0.0; n + 2];
        for (k, &v) in table[n].iter().enumerate() {
            next[k + 1] += v;
            next[k] -= (2.0 * nf + a) * v;
        }
        let c_prev = (nf * (nf + a - 1.0)).sqrt();
        for (k, &v) in table[n - 1].iter().enumerate() {
            next[k] -= c_prev * v;
        }
        let d = ((nf + 1.0) * (nf + a)).sqrt();
        for v in &mut next {
            *v /= d;
        }
        table.push(next);
    }
    Ok(OrthoBasis {
        shape,
        max_degree,
        table,
    })
}

impl OrthoBasis {
    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Highest degree with a materialized monomial table.
    pub fn table_degree(&self) -> usize {
        self.table.len() - 1
    }

    /// Monomial coefficients of `q_{n;1}` (constant term first).
    pub fn poly_coeffs(&self, n: usize) -> Result<&[f64]> {
        if n > self.max_degree {
            return Err(Error::BasisIndexOutOfRange {
                n,
                max: self.max_degree,
            });
        }
        self.table
            .get(n)
            .map(|v| v.as_slice())
            .ok_or(Error::NotTabulated {
                n,
                table: self.table_degree(),
            })
    }

    /// Monomial coefficients of `q_{n;λ}(x) = q_{n;1}(λx)`.
    pub fn poly_coeffs_at_rate(&self, n: usize, lambda: f64) -> Result<Vec<f64>> {
        let base = self.poly_coeffs(n)?;
        let mut pw = 1.0;
        Ok(base
            .iter()
            .map(|&c| {
                let v = c * pw;
                pw *= lambda;
                v
            })
            .collect())
    }

    /// `q_{n;λ}(x)` by the three-term recurrence at `λx`.
    ///
    /// Shares one code path with the unit-rate evaluation, so the scale
    /// law `eval_q(n, λ, x) = eval_q(n, 1, λx)` holds bit for bit.
    pub fn eval_q(&self, n: usize, lambda: f64, x: f64) -> Result<f64> {
        if n > self.max_degree {
            return Err(Error::BasisIndexOutOfRange {
                n,
                max: self.max_degree,
            });
        }
        if x < 0.0 {
            return Err(Error::NegativeArgument { x });
        }
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "lambda",
                value: lambda,
            });
        }
        Ok(eval_orthonormal(self.shape, n, lambda * x))
    }
}

/// `q_n(t)` for the unit-rate gamma weight of shape `a`, by recurrence.
pub fn eval_orthonormal(shape: f64, n: usize, t: f64) -> f64 {
    let mut rec = OrthonormalScan::new(shape, t);
    let mut q = 0.0;
    for _ in 0..=n {
        q = rec.next_value();
    }
    q
}

/// Streaming evaluator producing `q_0(t), q_1(t), ...` for one argument.
pub struct OrthonormalScan {
    shape: f64,
    t: f64,
    n: usize,
    prev: f64,
    cur: f64,
}

impl OrthonormalScan {
    pub fn new(shape: f64, t: f64) -> Self {
        OrthonormalScan {
            shape,
            t,
            n: 0,
            prev: 0.0,
            cur: 0.0,
        }
    }

    /// Returns `q_n(t)` and advances to `n + 1`.
    pub fn next_value(&mut self) -> f64 {
        let a = self.shape;
        let value = match self.n {
            0 => 1.0,
            1 => (self.t - a) / a.sqrt(),
            _ => {
                let nf = (self.n - 1) as f64;
                ((self.t - (2.0 * nf + a)) * self.cur - (nf * (nf + a - 1.0)).sqrt() * self.prev)
                    / (((nf + 1.0) * (nf + a)).sqrt())
            }
        };
        self.prev = self.cur;
        self.cur = value;
        self.n += 1;
        value
    }
}

/// Ascending factorial `[a]_n` with a log-space fallback once the
/// running product leaves the comfortable f64 range.
pub fn pochhammer(a: f64, n: usize) -> f64 {
    let mut product = 1.0f64;
    let mut j = 0usize;
    while j < n {
        let next = product * (a + j as f64);
        if !next.is_finite() || next.abs() > 1e300 {
            // switch to log space for the remaining factors
            let mut ln = product.abs().ln();
            let sign = product.signum();
            for k in j..n {
                ln += (a + k as f64).abs().ln();
            }
            return sign * ln.exp();
        }
        product = next;
        j += 1;
    }
    product
}

/// `ln [a]_n` accumulated termwise (valid for `a > 0`).
pub fn ln_pochhammer(a: f64, n: usize) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..n {
        acc += (a + j as f64).ln();
    }
    acc
}

/// Exact expectation of the product polynomial `p(X) q(X)` under Γ(a, λ).
///
/// All products and the moment sum `Σ c_k [a]_k / λ^k` run in exact
/// rational arithmetic seeded from the (exactly converted) f64 inputs;
/// the result is rounded once at the end. An unrepresentable result is
/// reported as an overflow rather than returned as infinity.
pub fn moment_inner_product(
    basis: &OrthoBasis,
    p: &[f64],
    q: &[f64],
    model: &GammaModel,
) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Ok(0.0);
    }
    let deg = (p.len() - 1) + (q.len() - 1);
    if deg > 2 * basis.max_degree() {
        return Err(Error::DegreeTooLarge {
            degree: deg,
            cap: 2 * basis.max_degree(),
        });
    }
    for (i, c) in p.iter().chain(q.iter()).enumerate() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCoefficient { index: i });
        }
    }
    let pr: Vec<Rational> = p.iter().map(|&c| exact(c)).collect();
    let qr: Vec<Rational> = q.iter().map(|&c| exact(c)).collect();
    let mut conv: Vec<Rational> = vec![Rational::zero(); deg + 1];
    for (i, a) in pr.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in qr.iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            conv[i + j] += a * b;
        }
    }
    let a = exact(model.shape());
    let lam = exact(model.rate());
    let mut moment = Rational::one(); // [a]_k / λ^k, running
    let mut total = Rational::zero();
    for (k, c) in conv.iter().enumerate() {
        if k > 0 {
            let kf = Rational::from_integer(BigInt::from(k as u64 - 1));
            moment = moment * (&a + kf) / &lam;
        }
        if !c.is_zero() {
            total += c * &moment;
        }
    }
    total.to_f64().filter(|v| v.is_finite()).ok_or(Error::Overflow)
}

fn exact(x: f64) -> Rational {
    Rational::from_float(x).expect("finite f64 converts exactly")
}

/// `Σ c_k x^{k}` factored against the gamma density: represents
/// `W(x) = f_λ(x) · Σ c_k x^k`, i.e. mixed terms
/// `(λ^a/Γ(a)) c_k x^{k+a-1} e^{-λx}` with the fixed exponent offset `a-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoly {
    model: GammaModel,
    coeffs: Vec<f64>,
}

impl WeightedPoly {
    pub fn model(&self) -> &GammaModel {
        &self.model
    }

    /// Coefficients of the polynomial factor over the density.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Term-by-term x-derivative:
    /// `c_k x^{k+a-1} e^{-λx} -> c_k (k+a-1) x^{k+a-2} e^{-λx} - λ c_k x^{k+a-1} e^{-λx}`.
    ///
    /// Only valid while the lowest-order coefficient is zero (true for
    /// every intermediate step of the Rodrigues differentiation), so no
    /// negative exponent ever materializes.
    fn derivative(&self) -> Self {
        let a = self.model.shape();
        let lam = self.model.rate();
        debug_assert!(self.coeffs.first().copied().unwrap_or(0.0) == 0.0);
        let mut out = vec![0.0; self.coeffs.len()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            out[k - 1] += c * (k as f64 + a - 1.0);
            out[k] -= lam * c;
        }
        WeightedPoly {
            model: self.model,
            coeffs: out,
        }
    }
}

/// `d^n/dx^n [x^n f_λ(x)]`, carried out symbolically on the weighted
/// representation. By the Rodrigues formula the result equals
/// `(-1)^n sqrt([a]_n n!) f_λ(x) q_{n;λ}(x)`; the returned coefficients
/// are the polynomial factor over `f_λ`.
pub fn rodrigues_poly(n: usize, model: &GammaModel) -> Result<WeightedPoly> {
    if n > MAX_RODRIGUES_ORDER {
        return Err(Error::DegreeTooLarge {
            degree: n,
            cap: MAX_RODRIGUES_ORDER,
        });
    }
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut w = WeightedPoly {
        model: *model,
        coeffs,
    };
    for step in 0..n {
        // after `step` derivatives the lowest power present is n - step > 0
        debug_assert!(w.coeffs[..n - step].iter().all(|&c| c == 0.0));
        w = w.derivative();
    }
    Ok(w)
}
