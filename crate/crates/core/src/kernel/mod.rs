//! Exact symbolic kernel: polynomials, canonical expressions, factoring,
//! zero-testing and numeric evaluation.

mod compiled;
mod expr;
mod factor;
pub mod poly;
mod tree;

use std::fmt;

use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use compiled::{CompiledExpr, CompiledVector, Point};
pub use expr::Expr;
pub use factor::{factor, factor_poly, Factorization};
pub use poly::{gcd, Monomial, Poly, Symbol, SymbolKind};
pub use tree::{normalize, ExprTree};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("division by an expression that normalizes to zero")]
    DivisionByZeroExpr,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("evaluation is singular: denominator of `{0}` vanishes")]
    EvalSingular(String),
    #[error("not a polynomial: `{0}`")]
    NotPolynomial(String),
}

/// Number of random points used by [`is_zero`].
pub const ZERO_TEST_POINTS: usize = 8;
/// Magnitude above which a sampled value counts as nonzero.
pub const NONZERO_THRESHOLD: f64 = 1e-9;

/// Numeric values for the state variables and parameters of a system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assignment {
    pub states: Vec<f64>,
    pub params: Vec<f64>,
}

impl Assignment {
    pub fn new(states: Vec<f64>, params: Vec<f64>) -> Self {
        Assignment { states, params }
    }

    pub fn value(&self, s: &Symbol) -> Option<f64> {
        match s.kind() {
            SymbolKind::State => self.states.get(s.index()).copied(),
            SymbolKind::Param => self.params.get(s.index()).copied(),
            SymbolKind::Sin => self.states.get(s.index()).map(|v| v.sin()),
            SymbolKind::Cos => self.states.get(s.index()).map(|v| v.cos()),
        }
    }
}

/// Sign constraint on a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Any,
}

/// The working domain: declared symbols, parameter signs and expressions
/// required to be nonzero.
#[derive(Clone, Debug, Default)]
pub struct Domain {
    pub states: Vec<Symbol>,
    pub params: Vec<(Symbol, Sign)>,
    pub nonzero: Vec<Expr>,
}

/// Outcome of a zero test.
#[derive(Clone, Debug, PartialEq)]
pub enum ZeroVerdict {
    ProvenZero,
    ProvenNonzero(Assignment),
    Unknown,
}

impl ZeroVerdict {
    pub fn is_proven_zero(&self) -> bool {
        matches!(self, ZeroVerdict::ProvenZero)
    }

    pub fn is_proven_nonzero(&self) -> bool {
        matches!(self, ZeroVerdict::ProvenNonzero(_))
    }
}

/// Margin kept from the zero set of every declared-nonzero constraint when sampling.
const CONSTRAINT_MARGIN: f64 = 1e-3;
const STATE_BOX: i64 = 32;
const BOX_DENOM: f64 = 16.0;

impl Domain {
    /// A domain over exactly the symbols occurring in `e`, unconstrained.
    pub fn for_expr(e: &Expr) -> Self {
        let mut d = Domain::default();
        for s in e.symbols() {
            let base = if s.is_trig() { s.base() } else { s.clone() };
            match base.kind() {
                SymbolKind::Param => {
                    if !d.params.iter().any(|(p, _)| *p == base) {
                        d.params.push((base, Sign::Any));
                    }
                }
                _ => {
                    if !d.states.contains(&base) {
                        d.states.push(base);
                    }
                }
            }
        }
        d
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &Symbol {
        &self.states[i]
    }

    pub fn with_constraint(&self, e: Expr) -> Domain {
        let mut d = self.clone();
        d.add_constraint(e);
        d
    }

    pub fn add_constraint(&mut self, e: Expr) {
        if !e.is_constant() && !self.nonzero.contains(&e) {
            self.nonzero.push(e);
        }
    }

    fn slots(&self) -> (usize, usize) {
        let ns = self.states.iter().map(|s| s.index() + 1).max().unwrap_or(0);
        let np = self.params.iter().map(|(s, _)| s.index() + 1).max().unwrap_or(0);
        (ns, np)
    }

    fn draw_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let (_, np) = self.slots();
        let mut params = vec![0.0; np];
        for (s, sign) in &self.params {
            let mag = f64::from(rng.gen_range(4..=32)) / BOX_DENOM;
            params[s.index()] = match sign {
                Sign::Positive => mag,
                Sign::Negative => -mag,
                Sign::Any => {
                    if rng.gen_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                }
            };
        }
        params
    }

    fn draw_states<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let (ns, _) = self.slots();
        let mut states = vec![0.0; ns];
        for s in &self.states {
            states[s.index()] = rng.gen_range(-STATE_BOX..=STATE_BOX) as f64 / BOX_DENOM;
        }
        states
    }

    /// Whether every declared constraint is away from zero at `p`.
    pub fn admits(&self, p: &Assignment) -> bool {
        self.admits_with_margin(p, CONSTRAINT_MARGIN)
    }

    pub fn admits_with_margin(&self, p: &Assignment, margin: f64) -> bool {
        self.nonzero
            .iter()
            .all(|c| c.evaluate(p).map(|v| v.abs() > margin).unwrap_or(false))
    }

    /// A random rational point of the box, away from declared constraints.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Assignment {
        for _ in 0..10_000 {
            let p = Assignment::new(self.draw_states(rng), self.draw_params(rng));
            if self.admits(&p) {
                return p;
            }
        }
        panic!("domain constraints exclude the whole sampling box");
    }

    /// A random point with the given parameter values.
    pub fn sample_states<R: Rng>(&self, rng: &mut R, params: &[f64]) -> Assignment {
        for _ in 0..10_000 {
            let p = Assignment::new(self.draw_states(rng), params.to_vec());
            if self.admits(&p) {
                return p;
            }
        }
        panic!("domain constraints exclude the whole sampling box");
    }

    pub fn sample_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.draw_params(rng)
    }

    /// Whether `e` is nonzero everywhere on the domain by construction:
    /// every irreducible factor of its numerator and denominator is a
    /// constant, a sign-constrained parameter, or a factor of a declared
    /// nonzero constraint.
    pub fn certified_nonzero(&self, e: &Expr) -> bool {
        if e.is_zero() {
            return false;
        }
        self.poly_certified(e.numer()) && self.poly_certified(e.denom())
    }

    fn poly_certified(&self, p: &Poly) -> bool {
        if p.is_constant() {
            return !p.is_zero();
        }
        let Ok(fac) = factor_poly(p) else { return false };
        fac.factors.iter().all(|(f, _)| self.factor_certified(f))
    }

    fn factor_certified(&self, f: &Poly) -> bool {
        let syms = f.symbols();
        if f.num_terms() == 1 && syms.len() == 1 {
            let s = syms.iter().next().unwrap();
            if s.kind() == SymbolKind::Param {
                return self
                    .params
                    .iter()
                    .any(|(p, sign)| p == s && *sign != Sign::Any);
            }
        }
        let target = f.integer_primitive().1;
        self.nonzero.iter().any(|c| {
            [c.numer(), c.denom()].into_iter().any(|part| {
                factor_poly(part)
                    .map(|fc| fc.factors.iter().any(|(g, _)| g.integer_primitive().1 == target))
                    .unwrap_or(false)
            })
        })
    }
}

/// Three-valued zero test on the domain of `e`'s own symbols.
pub fn is_zero(e: &Expr, seed: u64) -> ZeroVerdict {
    is_zero_on(e, &Domain::for_expr(e), seed)
}

/// Three-valued zero test: exact normal form first, then random points.
pub fn is_zero_on(e: &Expr, domain: &Domain, seed: u64) -> ZeroVerdict {
    if e.is_zero() {
        return ZeroVerdict::ProvenZero;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ZERO_TEST_POINTS {
        let p = domain.sample(&mut rng);
        if let Ok(v) = e.evaluate(&p) {
            if v.abs() > NONZERO_THRESHOLD {
                return ZeroVerdict::ProvenNonzero(p);
            }
        }
    }
    ZeroVerdict::Unknown
}

/// Partial derivative; errors on parameters and trig atoms.
pub fn differentiate(e: &Expr, v: &Symbol) -> Result<Expr, KernelError> {
    e.differentiate(v)
}

pub fn evaluate(e: &Expr, p: &Assignment) -> Result<f64, KernelError> {
    e.evaluate(p)
}

pub fn divide_exact(num: &Expr, den: &Expr) -> Option<Expr> {
    num.divide_exact(den)
}

/// Parse a rational literal such as `3`, `-2/5` or `0.25`.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    use num_bigint::BigInt;
    use std::str::FromStr;
    if let Some((int, frac)) = text.split_once('.') {
        let digits = format!("{int}{frac}");
        let n = BigInt::from_str(&digits).ok()?;
        let d = BigInt::from(10u32).pow(frac.len() as u32);
        return Some(BigRational::new(n, d));
    }
    if let Some((n, d)) = text.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    BigInt::from_str(text).ok().map(BigRational::from_integer)
}

impl fmt::Display for ZeroVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroVerdict::ProvenZero => write!(f, "proven zero"),
            ZeroVerdict::ProvenNonzero(_) => write!(f, "proven nonzero"),
            ZeroVerdict::Unknown => write!(f, "unknown"),
        }
    }
}
