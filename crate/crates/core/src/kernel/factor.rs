//! Factoring within a modest scope: rational content, monomial factors,
//! content splitting in each variable, square-free decomposition, and
//! complete splitting of factors of degree at most two in some variable.
//! Trig atoms are opaque indeterminates here.

use num_rational::BigRational;
use num_traits::One;

use super::poly::{content_in, gcd, Poly, Symbol};
use super::{Expr, KernelError};

/// `unit * prod(factor^multiplicity)`.
#[derive(Clone, Debug)]
pub struct Factorization<P = Poly> {
    pub unit: BigRational,
    pub factors: Vec<(P, u32)>,
    /// False when some returned factor has degree at least three in every
    /// variable and could not be certified irreducible.
    pub complete: bool,
}

impl Factorization<Poly> {
    pub fn expand(&self) -> Poly {
        self.factors
            .iter()
            .fold(Poly::constant(self.unit.clone()), |acc, (f, m)| acc.mul(&f.pow(*m)))
    }
}

/// Factor a polynomial expression. Rejects proper quotients.
pub fn factor(e: &Expr) -> Result<Factorization<Expr>, KernelError> {
    let p = e.as_poly().ok_or_else(|| KernelError::NotPolynomial(e.to_string()))?;
    let f = factor_poly(p)?;
    Ok(Factorization {
        unit: f.unit,
        factors: f.factors.into_iter().map(|(p, m)| (Expr::from_poly(p), m)).collect(),
        complete: f.complete,
    })
}

pub fn factor_poly(p: &Poly) -> Result<Factorization, KernelError> {
    if p.is_zero() {
        return Err(KernelError::NotPolynomial("0".into()));
    }
    let (_, prim) = p.integer_primitive();
    let mut acc = Acc { factors: Vec::new(), complete: true };

    let mono = prim.monomial_content();
    for (s, e) in mono.factors() {
        acc.push(Poly::symbol(s.clone()), *e);
    }
    let rest = prim
        .div_exact(&Poly::term(mono, BigRational::one()))
        .expect("monomial content divides");
    acc.split(&rest, 1);

    let mut factors: Vec<(Poly, u32)> = Vec::new();
    for (f, m) in acc.factors {
        let f = f.integer_primitive().1;
        if let Some(slot) = factors.iter_mut().find(|(g, _)| *g == f) {
            slot.1 += m;
        } else {
            factors.push((f, m));
        }
    }
    factors.sort_by(|(a, _), (b, _)| {
        a.degree()
            .cmp(&b.degree())
            .then_with(|| a.leading().map(|l| l.0.clone()).cmp(&b.leading().map(|l| l.0.clone())))
            .then_with(|| a.to_string().cmp(&b.to_string()))
    });

    let mut out = Factorization { unit: BigRational::one(), factors, complete: acc.complete };
    let product = out.expand();
    out.unit = p.leading_coeff() / product.leading_coeff();
    debug_assert_eq!(out.expand(), *p);
    Ok(out)
}

struct Acc {
    factors: Vec<(Poly, u32)>,
    complete: bool,
}

impl Acc {
    fn push(&mut self, f: Poly, m: u32) {
        if !f.is_constant() {
            self.factors.push((f, m));
        }
    }

    fn split(&mut self, p: &Poly, mult: u32) {
        if p.is_constant() {
            return;
        }
        let syms: Vec<Symbol> = p.symbols().into_iter().collect();

        // Content splitting in any variable.
        for v in &syms {
            let c = content_in(p, v);
            if !c.is_constant() {
                let rest = p.div_exact(&c).expect("content divides");
                self.split(&c, mult);
                self.split(&rest, mult);
                return;
            }
        }

        // Primitive in every variable; pick the variable of least degree.
        let v = syms
            .iter()
            .min_by_key(|s| (p.degree_in(s), (*s).clone()))
            .expect("nonconstant polynomial has a symbol")
            .clone();

        let sqf = square_free(p, &v);
        if sqf.len() > 1 || sqf.first().is_some_and(|(_, m)| *m > 1) {
            for (f, m) in sqf {
                self.split(&f, mult * m);
            }
            return;
        }

        match p.degree_in(&v) {
            1 => self.push(p.clone(), mult),
            2 => match split_quadratic(p, &v) {
                Some((a, b)) => {
                    self.push(a, mult);
                    self.push(b, mult);
                }
                None => self.push(p.clone(), mult),
            },
            _ => {
                self.complete = false;
                self.push(p.clone(), mult);
            }
        }
    }
}

/// Yun's square-free decomposition with respect to `v`; `p` must be
/// primitive in `v`.
fn square_free(p: &Poly, v: &Symbol) -> Vec<(Poly, u32)> {
    let dp = p.formal_derivative(v);
    let mut c = gcd(p, &dp);
    let mut w = p.div_exact(&c).expect("gcd divides");
    let mut out = Vec::new();
    let mut i = 1;
    while !w.is_constant() {
        let y = gcd(&w, &c);
        let z = w.div_exact(&y).expect("gcd divides");
        if !z.is_constant() {
            out.push((z, i));
        }
        c = c.div_exact(&y).expect("gcd divides");
        w = y;
        i += 1;
    }
    out
}

/// Split `A v^2 + B v + C` into two factors linear in `v`, when the
/// discriminant is a perfect square.
fn split_quadratic(p: &Poly, v: &Symbol) -> Option<(Poly, Poly)> {
    let c = p.coeffs_in(v);
    let (c0, c1, c2) = (&c[0], &c[1], &c[2]);
    let disc = c1.mul(c1).sub(&c2.mul(c0).scale(&super::poly::rat(4)));
    let root = disc.sqrt()?;
    let vv = Poly::symbol(v.clone());
    let lin = vv.mul(c2).scale(&super::poly::rat(2)).add(c1);
    let f1 = super::poly::primitive_in(&lin.add(&root), v);
    let f2 = super::poly::primitive_in(&lin.sub(&root), v);
    if f1.is_zero() || f2.is_zero() {
        return None;
    }
    Some((f1, f2))
}
