//! Sparse multivariate polynomials over the rationals.
//!
//! Trig atoms `sin(v)` and `cos(v)` are ordinary indeterminates at this
//! level. Multiplication here is the free one; the Pythagorean rewrite is
//! applied explicitly through [`Poly::reduce_trig`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use smallvec::SmallVec;

/// Kind of an indeterminate. The declaration order here is the term order
/// between kinds: state variables, then parameters, then trig atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    State,
    Param,
    Sin,
    Cos,
}

/// An indeterminate. `index` is the declaration index of the state variable
/// or parameter; for trig atoms it is the index of the state variable they
/// wrap. The name is carried for printing only.
#[derive(Clone, Debug)]
pub struct Symbol {
    kind: SymbolKind,
    index: u32,
    name: Arc<str>,
}

impl Symbol {
    pub fn state(index: usize, name: impl Into<Arc<str>>) -> Self {
        Symbol { kind: SymbolKind::State, index: index as u32, name: name.into() }
    }

    pub fn param(index: usize, name: impl Into<Arc<str>>) -> Self {
        Symbol { kind: SymbolKind::Param, index: index as u32, name: name.into() }
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }

    /// Name of the underlying variable (`w` for `sin(w)`).
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_state(&self) -> bool {
        self.kind == SymbolKind::State
    }

    pub fn is_trig(&self) -> bool {
        matches!(self.kind, SymbolKind::Sin | SymbolKind::Cos)
    }

    /// `sin` of the state variable underlying `self`. Panics on parameters.
    pub fn sin(&self) -> Symbol {
        assert!(self.kind != SymbolKind::Param, "sin of parameter {}", self.name);
        Symbol { kind: SymbolKind::Sin, index: self.index, name: self.name.clone() }
    }

    pub fn cos(&self) -> Symbol {
        assert!(self.kind != SymbolKind::Param, "cos of parameter {}", self.name);
        Symbol { kind: SymbolKind::Cos, index: self.index, name: self.name.clone() }
    }

    /// The state variable wrapped by a trig atom, or `self`.
    pub fn base(&self) -> Symbol {
        Symbol { kind: SymbolKind::State, index: self.index, name: self.name.clone() }
    }

    /// Whether this symbol depends on state variable `state` (itself or a trig atom of it).
    pub fn depends_on_state(&self, state: usize) -> bool {
        self.kind != SymbolKind::Param && self.index as usize == state
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.index == other.index
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
        self.index.hash(state);
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.kind, self.index).cmp(&(other.kind, other.index))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SymbolKind::State | SymbolKind::Param => write!(f, "{}", self.name),
            SymbolKind::Sin => write!(f, "sin({})", self.name),
            SymbolKind::Cos => write!(f, "cos({})", self.name),
        }
    }
}

/// A power product, sorted by symbol with strictly positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(Symbol, u32); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn var(sym: Symbol, exp: u32) -> Self {
        if exp == 0 {
            Monomial::one()
        } else {
            Monomial(smallvec::smallvec![(sym, exp)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, sym: &Symbol) -> u32 {
        self.0.iter().find(|(s, _)| s == sym).map_or(0, |(_, e)| *e)
    }

    pub fn factors(&self) -> impl Iterator<Item = &(Symbol, u32)> {
        self.0.iter()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(self.0[i..].iter().cloned());
        out.extend(other.0[j..].iter().cloned());
        Monomial(out)
    }

    /// `self / other` when every exponent of `other` fits.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = SmallVec::new();
        let mut j = 0;
        for (s, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < *s {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == *s {
                let oe = other.0[j].1;
                j += 1;
                match e.cmp(&oe) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((s.clone(), e - oe)),
                }
            } else {
                out.push((s.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::new();
        for (s, e) in &self.0 {
            let oe = other.exponent(s);
            if oe > 0 {
                out.push((s.clone(), (*e).min(oe)));
            }
        }
        Monomial(out)
    }

    /// Split off the power of `sym`.
    pub fn split(&self, sym: &Symbol) -> (u32, Monomial) {
        let mut exp = 0;
        let mut rest = SmallVec::new();
        for (s, e) in &self.0 {
            if s == sym {
                exp = *e;
            } else {
                rest.push((s.clone(), *e));
            }
        }
        (exp, Monomial(rest))
    }

    fn lex_cmp(&self, other: &Monomial) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                    // `a` is an earlier (more significant) symbol that `other` lacks.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

/// Graded lexicographic order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.lex_cmp(other))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, (s, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{s}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Multivariate polynomial with rational coefficients, terms kept in
/// ascending graded-lex order (the leading term is the last entry).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn from_i64(c: i64) -> Self {
        Poly::constant(rat(c))
    }

    pub fn symbol(sym: Symbol) -> Self {
        Poly::term(Monomial::var(sym, 1), BigRational::one())
    }

    pub fn term(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// The value of a constant polynomial (zero included).
    pub fn constant_value(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in descending order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter().rev()
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> BigRational {
        self.leading().map_or_else(BigRational::zero, |(_, c)| c.clone())
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.terms.keys().flat_map(|m| m.factors().map(|(s, _)| s.clone())).collect()
    }

    pub fn contains(&self, sym: &Symbol) -> bool {
        self.terms.keys().any(|m| m.exponent(sym) > 0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, sym: &Symbol) -> u32 {
        self.terms.keys().map(|m| m.exponent(sym)).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = other.constant_value() {
            return self.scale(&c);
        }
        if let Some(c) = self.constant_value() {
            return other.scale(&c);
        }
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn mul_term(&self, m: &Monomial, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(k, v)| (k.mul(m), v * c)).collect() }
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn pow(&self, mut e: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Rewrite `sin(v)^2` as `1 - cos(v)^2` until every sine has exponent at most one.
    pub fn reduce_trig(&self) -> Poly {
        if !self.terms.keys().any(|m| m.factors().any(|(s, e)| s.kind() == SymbolKind::Sin && *e >= 2)) {
            return self.clone();
        }
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut factor = Poly::term(Monomial::one(), c.clone());
            let mut rest = Monomial::one();
            for (s, e) in m.factors() {
                if s.kind() == SymbolKind::Sin && *e >= 2 {
                    let cos = Poly::symbol(s.cos());
                    let one_minus = Poly::one().sub(&cos.mul(&cos));
                    factor = factor.mul(&one_minus.pow(e / 2));
                    if e % 2 == 1 {
                        rest = rest.mul(&Monomial::var(s.clone(), 1));
                    }
                } else {
                    rest = rest.mul(&Monomial::var(s.clone(), *e));
                }
            }
            out = out.add(&factor.mul_term(&rest, &BigRational::one()));
        }
        out
    }

    /// Formal partial derivative with respect to an indeterminate.
    pub fn formal_derivative(&self, sym: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split(sym);
            if e > 0 {
                let m2 = rest.mul(&Monomial::var(sym.clone(), e - 1));
                out.add_term(m2, c * rat(i64::from(e)));
            }
        }
        out
    }

    /// Partial derivative with respect to state variable `state`, chaining
    /// through `sin`/`cos` atoms of that variable. Not trig-reduced.
    pub fn derivative(&self, state: &Symbol) -> Poly {
        let mut out = self.formal_derivative(state);
        let sin = state.sin();
        let cos = state.cos();
        if self.contains(&sin) {
            out = out.add(&self.formal_derivative(&sin).mul(&Poly::symbol(cos.clone())));
        }
        if self.contains(&cos) {
            out = out.sub(&self.formal_derivative(&cos).mul(&Poly::symbol(sin)));
        }
        out
    }

    /// Coefficients with respect to `sym`, indexed by degree.
    pub fn coeffs_in(&self, sym: &Symbol) -> Vec<Poly> {
        let deg = self.degree_in(sym) as usize;
        let mut out = vec![Poly::zero(); deg + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split(sym);
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    pub fn from_coeffs_in(sym: &Symbol, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in coeffs.iter().enumerate() {
            let m = Monomial::var(sym.clone(), e as u32);
            for (k, v) in &c.terms {
                out.add_term(k.mul(&m), v.clone());
            }
        }
        out
    }

    /// Division with remainder by a single divisor in graded-lex order.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "polynomial division by zero");
        let (lm, lc) = divisor.leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let mut p = self.clone();
        let mut q = Poly::zero();
        let mut r = Poly::zero();
        while let Some((m, c)) = p.leading().map(|(m, c)| (m.clone(), c.clone())) {
            match m.div(&lm) {
                Some(t) => {
                    let tc = &c / &lc;
                    p = p.sub(&divisor.mul_term(&t, &tc));
                    q.add_term(t, tc);
                }
                None => {
                    p.terms.remove(&m);
                    r.add_term(m, c);
                }
            }
        }
        (q, r)
    }

    /// Exact quotient, if `divisor` divides `self` in the free polynomial ring.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        if divisor.is_zero() {
            return None;
        }
        if let Some(c) = divisor.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let (q, r) = self.div_rem(divisor);
        r.is_zero().then_some(q)
    }

    /// Multiply by `P - Q sin(v)` for each sine of `self = P + Q sin(v)`.
    /// Returns the sine-free product and the multiplier. `self` must be trig-reduced.
    pub fn sine_conjugate(&self) -> (Poly, Poly) {
        let mut prod = self.clone();
        let mut mult = Poly::one();
        let sines: Vec<Symbol> = self.symbols().into_iter().filter(|s| s.kind() == SymbolKind::Sin).collect();
        for s in sines {
            let cs = prod.coeffs_in(&s);
            if cs.len() < 2 {
                continue;
            }
            let conj = cs[0].sub(&cs[1].mul(&Poly::symbol(s)));
            prod = prod.mul(&conj).reduce_trig();
            mult = mult.mul(&conj).reduce_trig();
        }
        (prod, mult)
    }

    /// Exact quotient modulo `sin(v)^2 + cos(v)^2 = 1`. Both operands must be trig-reduced.
    pub fn div_exact_trig(&self, divisor: &Poly) -> Option<Poly> {
        if let Some(q) = self.div_exact(divisor) {
            return Some(q);
        }
        let (den, mult) = divisor.sine_conjugate();
        if mult.is_one() {
            return None;
        }
        self.mul(&mult).reduce_trig().div_exact(&den)
    }

    /// Rescale to leading coefficient one.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Split into `unit * primitive` where the primitive part has coprime
    /// integer coefficients and a positive leading coefficient.
    pub fn integer_primitive(&self) -> (BigRational, Poly) {
        if self.is_zero() {
            return (BigRational::one(), Poly::zero());
        }
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            let scaled = (c * BigRational::from_integer(den_lcm.clone())).to_integer();
            num_gcd = num_gcd.gcd(&scaled);
        }
        let mut unit = BigRational::new(num_gcd, den_lcm);
        if self.leading_coeff().is_negative() {
            unit = -unit;
        }
        (unit.clone(), self.scale(&unit.recip()))
    }

    /// Substitute zero for a state variable (`sin -> 0`, `cos -> 1`).
    pub fn at_zero(&self, state: &Symbol) -> Poly {
        let sin = state.sin();
        let cos = state.cos();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if m.exponent(state) > 0 || m.exponent(&sin) > 0 {
                continue;
            }
            let (_, rest) = m.split(&cos);
            out.add_term(rest, c.clone());
        }
        out
    }

    /// Smallest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else { return Monomial::one() };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    pub fn eval_with<F>(&self, mut lookup: F) -> Option<f64>
    where
        F: FnMut(&Symbol) -> Option<f64>,
    {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (s, e) in m.factors() {
                t *= lookup(s)?.powi(*e as i32);
            }
            acc += t;
        }
        Some(acc)
    }

    /// Square root in the polynomial ring, when one exists.
    pub fn sqrt(&self) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (lm, lc) = self.leading()?;
        let root_m = monomial_sqrt(lm)?;
        let root_c = rational_sqrt(lc)?;
        let min_deg = self.terms.keys().map(Monomial::degree).min().unwrap_or(0);
        let mut s = Poly::term(root_m.clone(), root_c.clone());
        let two_lead = (root_m, root_c * rat(2));
        loop {
            let r = self.sub(&s.mul(&s));
            let Some((rm, rc)) = r.leading() else { return Some(s) };
            let t = rm.div(&two_lead.0)?;
            if 2 * t.degree() < min_deg {
                return None;
            }
            let tc = rc / &two_lead.1;
            if let Some((last, _)) = s.terms.iter().next() {
                if &t >= last {
                    return None;
                }
            }
            s.add_term(t, tc);
        }
    }
}

fn monomial_sqrt(m: &Monomial) -> Option<Monomial> {
    let mut out = SmallVec::new();
    for (s, e) in m.factors() {
        if e % 2 != 0 {
            return None;
        }
        out.push((s.clone(), e / 2));
    }
    Some(Monomial(out))
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| BigRational::new(n, d))
}

/// Greatest common divisor in the free polynomial ring, made monic.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a == b {
        return a.monic();
    }
    // Monomial divisors fast path.
    if a.num_terms() == 1 || b.num_terms() == 1 {
        let m = a.monomial_content().gcd(&b.monomial_content());
        return Poly::term(m, BigRational::one());
    }
    let sa = a.symbols();
    let sb = b.symbols();
    // A common divisor is free of any indeterminate missing from one side,
    // so it divides the content with respect to that indeterminate.
    if let Some(v) = sa.difference(&sb).next() {
        return gcd(&content_in(a, v), b);
    }
    if let Some(v) = sb.difference(&sa).next() {
        return gcd(a, &content_in(b, v));
    }
    let v = sa
        .iter()
        .min_by_key(|v| (a.degree_in(v).min(b.degree_in(v)), a.degree_in(v).max(b.degree_in(v))))
        .expect("non-constant")
        .clone();
    let ca = content_in(a, &v);
    let cb = content_in(b, &v);
    let g = gcd(&ca, &cb);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    if modular_coprime(&pa, &pb, &v) {
        return g;
    }
    let (mut f0, mut f1) = if pa.degree_in(&v) >= pb.degree_in(&v) { (pa, pb) } else { (pb, pa) };
    loop {
        if f1.degree_in(&v) == 0 {
            // f1 is v-free and primitive in v, hence a unit up to content.
            f1 = Poly::one();
            break;
        }
        let r = pseudo_rem(&f0, &f1, &v);
        if r.is_zero() {
            break;
        }
        let r = primitive_in(&r, &v);
        f0 = f1;
        f1 = r;
    }
    let res = primitive_in(&f1, &v);
    g.mul(&res).monic()
}

const MOD_P: u64 = 2_147_483_647;

fn mod_pow(mut b: u64, mut e: u64) -> u64 {
    let mut acc = 1u64;
    b %= MOD_P;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % MOD_P;
        }
        b = b * b % MOD_P;
        e >>= 1;
    }
    acc
}

fn mod_inv(a: u64) -> u64 {
    mod_pow(a, MOD_P - 2)
}

fn rat_mod(c: &BigRational) -> Option<u64> {
    let p = BigInt::from(MOD_P);
    let to_u64 = |x: &BigInt| -> u64 {
        let r = ((x % &p) + &p) % &p;
        u64::try_from(r).expect("reduced below the modulus")
    };
    let d = to_u64(c.denom());
    (d != 0).then(|| to_u64(c.numer()) * mod_inv(d) % MOD_P)
}

/// Coefficients in `v` of the image of `p` under `vals`, mod `MOD_P`.
fn image_in(p: &Poly, v: &Symbol, vals: &BTreeMap<Symbol, u64>) -> Option<Vec<u64>> {
    let mut out = vec![0u64; p.degree_in(v) as usize + 1];
    for (m, c) in &p.terms {
        let mut t = rat_mod(c)?;
        let mut e = 0;
        for (s, k) in m.factors() {
            if s == v {
                e = *k as usize;
            } else {
                t = t * mod_pow(vals[s], u64::from(*k)) % MOD_P;
            }
        }
        out[e] = (out[e] + t) % MOD_P;
    }
    Some(out)
}

fn trim(p: &mut Vec<u64>) {
    while p.last() == Some(&0) {
        p.pop();
    }
}

/// Degree of the univariate gcd mod `MOD_P`.
fn mod_gcd_degree(mut a: Vec<u64>, mut b: Vec<u64>) -> usize {
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let inv = mod_inv(*b.last().unwrap());
        while a.len() >= b.len() {
            let f = a.last().unwrap() * inv % MOD_P;
            let shift = a.len() - b.len();
            for (k, bk) in b.iter().enumerate() {
                a[k + shift] = (a[k + shift] + MOD_P - f * bk % MOD_P) % MOD_P;
            }
            trim(&mut a);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}

/// Whether `a` and `b`, both primitive in `v`, are certainly coprime: an
/// image keeping both leading coefficients has a constant gcd. `false` means
/// undecided.
fn modular_coprime(a: &Poly, b: &Poly, v: &Symbol) -> bool {
    let others: BTreeSet<Symbol> = a.symbols().union(&b.symbols()).filter(|s| *s != v).cloned().collect();
    let (la, lb) = (a.coeffs_in(v).pop().unwrap(), b.coeffs_in(v).pop().unwrap());
    let mut state: u64 = 0x9e37_79b9;
    for _ in 0..3 {
        let vals: BTreeMap<Symbol, u64> = others
            .iter()
            .map(|s| {
                state = (state * 6_364_136_223 + 1_442_695_041) % MOD_P;
                (s.clone(), state)
            })
            .collect();
        let lead_ok = |l: &Poly| image_in(l, v, &vals).map_or(false, |c| c[0] != 0);
        if !lead_ok(&la) || !lead_ok(&lb) {
            continue;
        }
        let (Some(ia), Some(ib)) = (image_in(a, v, &vals), image_in(b, v, &vals)) else { continue };
        return mod_gcd_degree(ia, ib) == 0;
    }
    false
}

/// Gcd of the coefficients with respect to `v`, monic.
pub fn content_in(p: &Poly, v: &Symbol) -> Poly {
    let coeffs = p.coeffs_in(v);
    let mut g = Poly::zero();
    for c in coeffs.iter().rev() {
        if c.is_zero() {
            continue;
        }
        g = gcd(&g, c);
        if g.is_one() {
            break;
        }
    }
    g
}

pub fn primitive_in(p: &Poly, v: &Symbol) -> Poly {
    let c = content_in(p, v);
    p.div_exact(&c).expect("content divides")
}

/// `lc(b)^(deg a - deg b + 1) * a mod b`, as polynomials in `v`.
pub fn pseudo_rem(a: &Poly, b: &Poly, v: &Symbol) -> Poly {
    let db = b.degree_in(v) as usize;
    let bc = b.coeffs_in(v);
    let lb = bc[db].clone();
    let mut r = a.coeffs_in(v);
    while r.len() > db && r.len() > 0 {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        if lr.is_zero() {
            r.pop();
            continue;
        }
        for c in r.iter_mut() {
            *c = c.mul(&lb);
        }
        let shift = dr - db;
        for (k, bk) in bc.iter().enumerate() {
            r[k + shift] = r[k + shift].sub(&lr.mul(bk));
        }
        r.pop();
    }
    Poly::from_coeffs_in(v, &r)
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> (Poly, Poly, Poly) {
        (
            Poly::symbol(Symbol::state(0, "x")),
            Poly::symbol(Symbol::state(1, "y")),
            Poly::symbol(Symbol::state(2, "z")),
        )
    }

    #[test]
    fn grlex_orders_degree_first_then_declaration() {
        let x = Monomial::var(Symbol::state(0, "x"), 1);
        let y = Monomial::var(Symbol::state(1, "y"), 1);
        let y2 = Monomial::var(Symbol::state(1, "y"), 2);
        assert!(x > y);
        assert!(y2 > x);
        let a = Monomial::var(Symbol::param(0, "a"), 1);
        assert!(y > a);
    }

    #[test]
    fn gcd_recovers_common_factor() {
        let (x, y, z) = vars();
        let common = x.add(&y.mul(&z));
        let a = common.mul(&x.sub(&Poly::one()));
        let b = common.mul(&y.add(&z)).mul(&z);
        assert_eq!(gcd(&a, &b), common.monic());
        assert_eq!(gcd(&x, &y), Poly::one());
    }

    #[test]
    fn division_with_remainder() {
        let (x, y, _) = vars();
        let num = x.mul(&y).add(&Poly::one());
        let (q, r) = num.div_rem(&x);
        assert_eq!(q, y);
        assert_eq!(r, Poly::one());
        assert!(num.div_exact(&x).is_none());
    }

    #[test]
    fn sqrt_of_square() {
        let (x, y, _) = vars();
        let s = x.sub(&y.scale(&rat(3)));
        assert_eq!(s.mul(&s).sqrt().unwrap().integer_primitive().1, s.integer_primitive().1);
        assert!(x.mul(&x).add(&y).sqrt().is_none());
    }

    #[test]
    fn trig_reduction() {
        let w = Symbol::state(0, "w");
        let s = Poly::symbol(w.sin());
        let c = Poly::symbol(w.cos());
        let e = s.mul(&s).add(&c.mul(&c));
        assert_eq!(e.reduce_trig(), Poly::one());
    }
}
