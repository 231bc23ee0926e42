//! Expression DSL for transforms and parametric functions.
//!
//! Grammar (precedence low to high): additive; multiplicative; unary
//! minus; power (right-associative); atoms are literals, the variable
//! `s`, function calls `exp(..)` / `log(..)`, and parenthesized
//! expressions. Whitespace is insignificant. The grammar is part of the
//! public contract and documented in `docs/grammar.md`.
//!
//! A parsed [`TransformExpr`] can be evaluated pointwise over complex
//! arguments (principal branch for `log` and non-integer powers) or as a
//! [`PowerSeries`] jet at a real regular point. Poles are detected
//! dynamically by nonfinite propagation, not symbolically.

use std::fmt;

use num::complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{OrderLimit, PowerSeries};

/// Maximum accepted source length (bytes).
pub const MAX_SOURCE_LEN: usize = 64 * 1024;

/// Maximum nesting depth; keeps parsing and evaluation stack-safe for
/// adversarial input within [`MAX_SOURCE_LEN`].
const MAX_DEPTH: usize = 256;

/// Parse failure with the first offending byte offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "offset {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Expression tree over one variable `s`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    fn contains_var(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.contains_var() || b.contains_var(),
            Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) => a.contains_var(),
        }
    }
}

/// A parsed analytic expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformExpr {
    ast: Expr,
    source: String,
}

impl TransformExpr {
    /// Parses `text`; total for all inputs up to [`MAX_SOURCE_LEN`].
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        if text.len() > MAX_SOURCE_LEN {
            return Err(ParseError {
                position: MAX_SOURCE_LEN,
                message: format!("input exceeds {} bytes", MAX_SOURCE_LEN),
            });
        }
        let mut p = Parser {
            bytes: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let ast = p.additive(0)?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("trailing input"));
        }
        Ok(TransformExpr {
            ast,
            source: text.to_string(),
        })
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// The expression `s * self`; the Laplace pipeline uses it because
    /// `Φ_λ(y) = g(y) φ(g(y))` is exactly `s φ(s)` under `s <- g(y)`.
    pub fn times_var(&self) -> TransformExpr {
        TransformExpr {
            ast: Expr::Mul(Box::new(Expr::Var), Box::new(self.ast.clone())),
            source: format!("s*({})", self.source),
        }
    }

    /// Canonical text form; `parse(print(ast))` is structurally equal to `ast`.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        print_expr(&self.ast, 0, &mut out);
        out
    }

    /// Recursive pointwise evaluation at a complex argument.
    ///
    /// Errors with a singularity when any intermediate value is nonfinite.
    pub fn eval_complex(&self, s: Complex64) -> Result<Complex64> {
        let v = eval_c(&self.ast, s);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::SingularPoint {
                point: format!("{}", s),
            })
        }
    }

    /// Evaluation at a real argument; errors if the value is singular or
    /// carries a non-negligible imaginary part.
    pub fn eval_real(&self, x: f64) -> Result<f64> {
        let v = self.eval_complex(Complex64::new(x, 0.0))?;
        if v.im.abs() > 1e-9 * v.re.abs().max(1.0) {
            return Err(Error::NonRealValue { at: x, imag: v.im });
        }
        Ok(v.re)
    }

    /// Taylor jet at a real regular point under the default order cap.
    pub fn eval_jet(&self, center: f64, order: usize) -> Result<PowerSeries> {
        self.eval_jet_with(center, order, OrderLimit::default())
    }

    /// Taylor jet at `center` with an explicit order cap.
    pub fn eval_jet_with(
        &self,
        center: f64,
        order: usize,
        limit: OrderLimit,
    ) -> Result<PowerSeries> {
        limit.check(order)?;
        let leaf = PowerSeries::identity(center, order, limit)?;
        eval_jet_node(&self.ast, &leaf)
    }

    /// Taylor series at `y = 0` of `y -> expr(λ0/(1-y))`.
    ///
    /// Evaluates the expression tree directly on the jet algebra with
    /// the variable bound to `λ0/(1-y)`, carrying the pole order at
    /// `y = 1` symbolically: every intermediate is `S(y)/(1-y)^k` with
    /// `S` free of that pole. Divisions then act on decaying-coefficient
    /// series, which keeps tiny tail coefficients at full relative
    /// accuracy where a generic compose-by-Horner pass (or a direct
    /// substitution with materialized 1/(1-y) powers) would bury them
    /// under amplified rounding noise.
    pub fn eval_geometric_substitution(
        &self,
        lambda0: f64,
        order: usize,
        limit: OrderLimit,
    ) -> Result<PowerSeries> {
        limit.check(order)?;
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(Error::NonFiniteParameter { name: "lambda0" });
        }
        eval_pole_scaled(&self.ast, lambda0, order)?.materialize()
    }

    /// Jet of `t -> expr(center + scale * t)` at `t = 0`.
    ///
    /// The returned series has center 0 and coefficients
    /// `expr^(k)(center) * scale^k / k!`; the rescaling keeps high-order
    /// coefficients representable where the raw derivatives would
    /// under- or overflow.
    pub fn eval_jet_scaled(
        &self,
        center: f64,
        scale: f64,
        order: usize,
        limit: OrderLimit,
    ) -> Result<PowerSeries> {
        limit.check(order)?;
        if !center.is_finite() || !scale.is_finite() {
            return Err(Error::NonFiniteParameter { name: "jet center/scale" });
        }
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = center;
        if order >= 1 {
            coeffs[1] = scale;
        }
        let leaf = PowerSeries::with_limit(0.0, coeffs, limit)?;
        eval_jet_node(&self.ast, &leaf)
    }
}

impl fmt::Display for TransformExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn additive(&mut self, depth: usize) -> Result<Expr, ParseError> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let mut node = self.multiplicative(depth + 1)?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                let rhs = self.multiplicative(depth + 1)?;
                node = Expr::Add(Box::new(node), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.multiplicative(depth + 1)?;
                node = Expr::Sub(Box::new(node), Box::new(rhs));
            } else {
                return Ok(node);
            }
        }
    }

    fn multiplicative(&mut self, depth: usize) -> Result<Expr, ParseError> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let mut node = self.unary(depth + 1)?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                let rhs = self.unary(depth + 1)?;
                node = Expr::Mul(Box::new(node), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary(depth + 1)?;
                node = Expr::Div(Box::new(node), Box::new(rhs));
            } else {
                return Ok(node);
            }
        }
    }

    fn unary(&mut self, depth: usize) -> Result<Expr, ParseError> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        self.skip_ws();
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary(depth + 1)?)))
        } else {
            self.power(depth + 1)
        }
    }

    fn power(&mut self, depth: usize) -> Result<Expr, ParseError> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let base = self.atom(depth + 1)?;
        self.skip_ws();
        if self.eat(b'^') {
            // right-associative; the exponent may carry a unary minus
            let exponent = self.unary(depth + 1)?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self, depth: usize) -> Result<Expr, ParseError> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.additive(depth + 1)?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                match name {
                    "s" => Ok(Expr::Var),
                    "exp" | "log" => {
                        self.skip_ws();
                        if !self.eat(b'(') {
                            return Err(self.error("expected '(' after function name"));
                        }
                        let arg = self.additive(depth + 1)?;
                        self.skip_ws();
                        if !self.eat(b')') {
                            return Err(self.error("expected ')'"));
                        }
                        Ok(match name {
                            "exp" => Expr::Exp(Box::new(arg)),
                            _ => Expr::Log(Box::new(arg)),
                        })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{}'", name)))
                    }
                }
            }
            _ => Err(self.error("expected a literal, 's', a function call or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.eat(b'.') {
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark; // not an exponent suffix
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => {
                self.pos = start;
                Err(self.error("invalid numeric literal"))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(_) | Expr::Var | Expr::Exp(..) | Expr::Log(..) => 5,
    }
}

fn print_expr(e: &Expr, min_prec: u8, out: &mut String) {
    let p = prec(e);
    let wrap = p < min_prec;
    if wrap {
        out.push('(');
    }
    match e {
        Expr::Num(v) => out.push_str(&format!("{}", v)),
        Expr::Var => out.push('s'),
        Expr::Add(a, b) => {
            print_expr(a, 1, out);
            out.push('+');
            print_expr(b, 2, out);
        }
        Expr::Sub(a, b) => {
            print_expr(a, 1, out);
            out.push('-');
            print_expr(b, 2, out);
        }
        Expr::Mul(a, b) => {
            print_expr(a, 2, out);
            out.push('*');
            print_expr(b, 3, out);
        }
        Expr::Div(a, b) => {
            print_expr(a, 2, out);
            out.push('/');
            print_expr(b, 3, out);
        }
        Expr::Neg(a) => {
            out.push('-');
            print_expr(a, 3, out);
        }
        Expr::Pow(a, b) => {
            print_expr(a, 5, out);
            out.push('^');
            print_expr(b, 3, out);
        }
        Expr::Exp(a) => {
            out.push_str("exp(");
            print_expr(a, 0, out);
            out.push(')');
        }
        Expr::Log(a) => {
            out.push_str("log(");
            print_expr(a, 0, out);
            out.push(')');
        }
    }
    if wrap {
        out.push(')');
    }
}

// ---------------------------------------------------------------------------
// Complex evaluation
// ---------------------------------------------------------------------------

/// Returns the exponent value when a `Pow` exponent is a small integer
/// constant; exponent subtrees never contain the variable in this mode.
fn const_int_exponent(e: &Expr) -> Option<i32> {
    if e.contains_var() {
        return None;
    }
    let v = eval_c(e, Complex64::new(0.0, 0.0));
    if v.im == 0.0 && v.re.fract() == 0.0 && v.re.abs() <= i32::MAX as f64 {
        Some(v.re as i32)
    } else {
        None
    }
}

fn eval_c(e: &Expr, s: Complex64) -> Complex64 {
    match e {
        Expr::Num(v) => Complex64::new(*v, 0.0),
        Expr::Var => s,
        Expr::Add(a, b) => eval_c(a, s) + eval_c(b, s),
        Expr::Sub(a, b) => eval_c(a, s) - eval_c(b, s),
        Expr::Mul(a, b) => eval_c(a, s) * eval_c(b, s),
        Expr::Div(a, b) => eval_c(a, s) / eval_c(b, s),
        Expr::Neg(a) => -eval_c(a, s),
        Expr::Exp(a) => eval_c(a, s).exp(),
        Expr::Log(a) => eval_c(a, s).ln(),
        Expr::Pow(a, b) => {
            let base = eval_c(a, s);
            if let Some(k) = const_int_exponent(b) {
                base.powi(k)
            } else {
                // principal branch
                base.powc(eval_c(b, s))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Jet evaluation
// ---------------------------------------------------------------------------

fn eval_jet_node(e: &Expr, leaf: &PowerSeries) -> Result<PowerSeries> {
    let order = leaf.order();
    let tag = leaf.center();
    let limit = OrderLimit::new(order.max(crate::series::DEFAULT_MAX_ORDER))
        .unwrap_or_default();
    match e {
        Expr::Num(v) => PowerSeries::constant(tag, *v, order, limit),
        Expr::Var => Ok(leaf.clone()),
        Expr::Add(a, b) => eval_jet_node(a, leaf)?.add(&eval_jet_node(b, leaf)?),
        Expr::Sub(a, b) => eval_jet_node(a, leaf)?.sub(&eval_jet_node(b, leaf)?),
        Expr::Mul(a, b) => eval_jet_node(a, leaf)?.mul(&eval_jet_node(b, leaf)?),
        Expr::Div(a, b) => eval_jet_node(a, leaf)?.div(&eval_jet_node(b, leaf)?),
        Expr::Neg(a) => Ok(eval_jet_node(a, leaf)?.neg()),
        Expr::Exp(a) => Ok(eval_jet_node(a, leaf)?.exp()),
        Expr::Log(a) => eval_jet_node(a, leaf)?.ln(),
        Expr::Pow(a, b) => {
            if b.contains_var() {
                return Err(Error::VariableExponent);
            }
            let base = eval_jet_node(a, leaf)?;
            let expv = eval_c(b, Complex64::new(0.0, 0.0));
            if expv.im != 0.0 || !expv.re.is_finite() {
                return Err(Error::VariableExponent);
            }
            if expv.re.fract() == 0.0 && expv.re.abs() <= i32::MAX as f64 {
                base.powi(expv.re as i32)
            } else {
                base.powf(expv.re)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pole-tracked substitution s <- λ0/(1-y)
// ---------------------------------------------------------------------------

/// A series `S(y)/(1-y)^k` with `S` regular at the tracked pole.
struct PoleScaled {
    series: PowerSeries,
    pole_order: i32,
}

impl PoleScaled {
    fn constant(value: f64, order: usize) -> Result<PoleScaled> {
        let limit = OrderLimit::new(order.max(crate::series::DEFAULT_MAX_ORDER))
            .unwrap_or_default();
        Ok(PoleScaled {
            series: PowerSeries::constant(0.0, value, order, limit)?,
            pole_order: 0,
        })
    }

    /// Multiplies by the polynomial `(1-y)^j`, `j >= 0`.
    fn mul_one_minus_y(&self, j: i32) -> Result<PoleScaled> {
        let mut series = self.series.clone();
        for _ in 0..j {
            let shifted: Vec<f64> = (0..series.coeffs().len())
                .map(|n| {
                    series.coeffs()[n] - if n > 0 { series.coeffs()[n - 1] } else { 0.0 }
                })
                .collect();
            series = PowerSeries::raw_at_origin(shifted);
        }
        Ok(PoleScaled {
            series,
            pole_order: self.pole_order,
        })
    }

    /// Aligns to a common pole order `k >= self.pole_order`.
    fn raise_to(&self, k: i32) -> Result<PoleScaled> {
        let mut out = self.mul_one_minus_y(k - self.pole_order)?;
        out.pole_order = k;
        Ok(out)
    }

    /// Expands the tracked pole back into the plain series.
    fn materialize(&self) -> Result<PowerSeries> {
        if self.pole_order == 0 {
            return Ok(self.series.clone());
        }
        if self.pole_order < 0 {
            return Ok(self.mul_one_minus_y(-self.pole_order)?.series);
        }
        // multiply by Σ C(n+k-1, k-1) y^n, the expansion of (1-y)^{-k}
        let k = self.pole_order as usize;
        let n = self.series.coeffs().len();
        let mut binom = Vec::with_capacity(n);
        let mut b = 1.0f64;
        binom.push(b);
        for i in 1..n {
            b = b * (i + k - 1) as f64 / i as f64;
            binom.push(b);
        }
        let expansion = PowerSeries::raw_at_origin(binom);
        self.series.mul(&expansion)
    }
}

fn eval_pole_scaled(e: &Expr, lambda0: f64, order: usize) -> Result<PoleScaled> {
    match e {
        Expr::Num(v) => PoleScaled::constant(*v, order),
        // λ0/(1-y): constant numerator over one pole power
        Expr::Var => Ok(PoleScaled {
            series: PoleScaled::constant(lambda0, order)?.series,
            pole_order: 1,
        }),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let lhs = eval_pole_scaled(a, lambda0, order)?;
            let rhs = eval_pole_scaled(b, lambda0, order)?;
            let k = lhs.pole_order.max(rhs.pole_order);
            let lhs = lhs.raise_to(k)?;
            let rhs = rhs.raise_to(k)?;
            let series = match e {
                Expr::Add(..) => lhs.series.add(&rhs.series)?,
                _ => lhs.series.sub(&rhs.series)?,
            };
            Ok(PoleScaled {
                series,
                pole_order: k,
            })
        }
        Expr::Mul(a, b) => {
            let lhs = eval_pole_scaled(a, lambda0, order)?;
            let rhs = eval_pole_scaled(b, lambda0, order)?;
            Ok(PoleScaled {
                series: lhs.series.mul(&rhs.series)?,
                pole_order: lhs.pole_order + rhs.pole_order,
            })
        }
        Expr::Div(a, b) => {
            let lhs = eval_pole_scaled(a, lambda0, order)?;
            let rhs = eval_pole_scaled(b, lambda0, order)?;
            Ok(PoleScaled {
                series: lhs.series.div(&rhs.series)?,
                pole_order: lhs.pole_order - rhs.pole_order,
            })
        }
        Expr::Neg(a) => {
            let v = eval_pole_scaled(a, lambda0, order)?;
            Ok(PoleScaled {
                series: v.series.neg(),
                pole_order: v.pole_order,
            })
        }
        Expr::Exp(a) => {
            let v = eval_pole_scaled(a, lambda0, order)?.materialize()?;
            Ok(PoleScaled {
                series: v.exp(),
                pole_order: 0,
            })
        }
        Expr::Log(a) => {
            let v = eval_pole_scaled(a, lambda0, order)?.materialize()?;
            Ok(PoleScaled {
                series: v.ln()?,
                pole_order: 0,
            })
        }
        Expr::Pow(a, b) => {
            if b.contains_var() {
                return Err(Error::VariableExponent);
            }
            let expv = eval_c(b, Complex64::new(0.0, 0.0));
            if expv.im != 0.0 || !expv.re.is_finite() {
                return Err(Error::VariableExponent);
            }
            let base = eval_pole_scaled(a, lambda0, order)?;
            if expv.re.fract() == 0.0 && expv.re.abs() <= i32::MAX as f64 {
                let k = expv.re as i32;
                Ok(PoleScaled {
                    series: base.series.powi(k)?,
                    pole_order: base.pole_order.saturating_mul(k),
                })
            } else {
                let v = base.materialize()?;
                Ok(PoleScaled {
                    series: v.powf(expv.re)?,
                    pole_order: 0,
                })
            }
        }
    }
}
