//! Canonical scalar expressions: reduced quotients of trig-reduced polynomials.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::{gcd, Poly, Symbol, SymbolKind};
use super::{Assignment, KernelError};

/// A scalar expression in normal form.
///
/// Both parts are trig-reduced (`sin(v)` occurs with exponent at most one),
/// the quotient is cancelled by the polynomial gcd, and the denominator is
/// monic. A zero expression is stored as `0/1`.
#[derive(Clone, Debug)]
pub struct Expr {
    num: Poly,
    den: Poly,
}

impl Expr {
    pub fn zero() -> Self {
        Expr { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        Expr::from_poly(Poly::one())
    }

    pub fn int(n: i64) -> Self {
        Expr::from_poly(Poly::from_i64(n))
    }

    pub fn rational(q: BigRational) -> Self {
        Expr::from_poly(Poly::constant(q))
    }

    pub fn symbol(sym: Symbol) -> Self {
        Expr::from_poly(Poly::symbol(sym))
    }

    pub fn from_poly(p: Poly) -> Self {
        Expr { num: p.reduce_trig(), den: Poly::one() }
    }

    /// Build `num / den`, reducing to normal form.
    pub fn from_parts(num: Poly, den: Poly) -> Result<Self, KernelError> {
        let den = den.reduce_trig();
        if den.is_zero() {
            return Err(KernelError::DivisionByZeroExpr);
        }
        Ok(Self::canonical(num.reduce_trig(), den))
    }

    fn canonical(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = den.constant_value() {
            return Expr { num: num.scale(&c.recip()), den: Poly::one() };
        }
        // Sine-free denominators make the normal form unique.
        let (den, mult) = den.sine_conjugate();
        let num = if mult.is_one() { num } else { num.mul(&mult).reduce_trig() };
        if let Some(c) = den.constant_value() {
            return Expr { num: num.scale(&c.recip()), den: Poly::one() };
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_exact(&g).expect("gcd divides"), den.div_exact(&g).expect("gcd divides"))
        };
        let lc = den.leading_coeff();
        Expr { num: num.scale(&lc.recip()), den: den.scale(&lc.recip()) }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    /// The zero node.
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        self.is_polynomial().then_some(&self.num)
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        if !self.den.is_one() {
            return None;
        }
        self.num.constant_value()
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn symbols(&self) -> std::collections::BTreeSet<Symbol> {
        let mut s = self.num.symbols();
        s.extend(self.den.symbols());
        s
    }

    /// Whether the expression depends on any state variable.
    pub fn depends_on_state(&self) -> bool {
        self.symbols().iter().any(|s| s.kind() != SymbolKind::Param)
    }

    pub fn checked_div(&self, other: &Expr) -> Result<Expr, KernelError> {
        if other.is_zero() {
            return Err(KernelError::DivisionByZeroExpr);
        }
        Expr::from_parts(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    /// Integer power; negative exponents divide.
    pub fn pow(&self, e: i32) -> Result<Expr, KernelError> {
        let pos = Expr {
            num: self.num.pow(e.unsigned_abs()).reduce_trig(),
            den: self.den.pow(e.unsigned_abs()).reduce_trig(),
        };
        if e >= 0 {
            Ok(pos)
        } else {
            Expr::one().checked_div(&pos)
        }
    }

    pub fn scale(&self, c: &BigRational) -> Expr {
        Expr { num: self.num.scale(c), den: self.den.clone() }.fix_zero()
    }

    fn fix_zero(self) -> Expr {
        if self.num.is_zero() {
            Expr::zero()
        } else {
            self
        }
    }

    /// Partial derivative with respect to state variable `v`.
    pub fn differentiate(&self, v: &Symbol) -> Result<Expr, KernelError> {
        if !v.is_state() {
            return Err(KernelError::UnknownSymbol(v.to_string()));
        }
        let dn = self.num.derivative(v);
        if self.den.is_one() {
            return Ok(Expr::from_poly(dn));
        }
        let dd = self.den.derivative(v);
        if dd.is_zero() {
            return Ok(Expr::canonical(dn.reduce_trig(), self.den.clone()));
        }
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        Expr::from_parts(num, self.den.mul(&self.den))
    }

    pub fn evaluate(&self, p: &Assignment) -> Result<f64, KernelError> {
        let lookup = |s: &Symbol| p.value(s);
        let n = self
            .num
            .eval_with(lookup)
            .ok_or_else(|| KernelError::UnknownSymbol(self.missing_symbol(p)))?;
        if self.den.is_one() {
            return Ok(n);
        }
        let d = self
            .den
            .eval_with(lookup)
            .ok_or_else(|| KernelError::UnknownSymbol(self.missing_symbol(p)))?;
        if d.abs() < 1e-12 {
            return Err(KernelError::EvalSingular(self.to_string()));
        }
        Ok(n / d)
    }

    fn missing_symbol(&self, p: &Assignment) -> String {
        self.symbols()
            .into_iter()
            .find(|s| p.value(s).is_none())
            .map(|s| s.to_string())
            .unwrap_or_default()
    }

    /// Exact quotient `self / den` when the quotient stays in the same
    /// denominator class: the numerator must be divisible by the numerator
    /// of `den`.
    pub fn divide_exact(&self, den: &Expr) -> Option<Expr> {
        if den.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Expr::zero());
        }
        let q = self.num.div_exact_trig(&den.num)?;
        Expr::from_parts(q.mul(&den.den), self.den.clone()).ok()
    }

    /// Replace state variable `v` by zero (`sin -> 0`, `cos -> 1`).
    pub fn at_zero(&self, v: &Symbol) -> Result<Expr, KernelError> {
        Expr::from_parts(self.num.at_zero(v), self.den.at_zero(v))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if self.num == other.num && self.den == other.den {
            return true;
        }
        self.num.mul(&other.den).sub(&other.num.mul(&self.den)).reduce_trig().is_zero()
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        if self.den == rhs.den {
            if self.den.is_one() {
                return Expr { num: self.num.add(&rhs.num).reduce_trig(), den: Poly::one() };
            }
            return Expr::canonical(self.num.add(&rhs.num).reduce_trig(), self.den.clone());
        }
        let num = self.num.mul(&rhs.den).add(&rhs.num.mul(&self.den));
        Expr::from_parts(num, self.den.mul(&rhs.den)).expect("product of nonzero denominators")
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self + &(-rhs)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr { num: self.num.neg(), den: self.den.clone() }
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            return Expr::zero();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return Expr { num: self.num.mul(&rhs.num).reduce_trig(), den: Poly::one() };
        }
        Expr::from_parts(self.num.mul(&rhs.num), self.den.mul(&rhs.den))
            .expect("product of nonzero denominators")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |a, b| &a + &b)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

fn needs_parens(p: &Poly) -> bool {
    p.num_terms() > 1
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        if needs_parens(&self.num) {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        let single_factor = self.den.num_terms() == 1
            && self.den.leading().is_some_and(|(m, c)| c.is_one() && m.factors().count() == 1);
        if single_factor {
            write!(f, "/{}", self.den)
        } else {
            write!(f, "/({})", self.den)
        }
    }
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl Expr {
    /// True when `self` is a nonzero rational constant.
    pub fn is_nonzero_constant(&self) -> bool {
        self.constant_value().is_some_and(|c| !c.is_zero())
    }
}
