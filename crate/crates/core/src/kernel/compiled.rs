//! Floating-point evaluation of expressions without rational arithmetic.

use num_traits::ToPrimitive;

use super::{Expr, KernelError, Poly, SymbolKind};

#[derive(Clone, Copy, Debug)]
enum Slot {
    State(usize),
    Param(usize),
    Sin(usize),
    Cos(usize),
}

#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<(f64, Vec<(Slot, i32)>)>,
}

impl CompiledPoly {
    fn new(p: &Poly) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let factors = m
                    .factors()
                    .map(|(s, e)| {
                        let slot = match s.kind() {
                            SymbolKind::State => Slot::State(s.index()),
                            SymbolKind::Param => Slot::Param(s.index()),
                            SymbolKind::Sin => Slot::Sin(s.index()),
                            SymbolKind::Cos => Slot::Cos(s.index()),
                        };
                        (slot, *e as i32)
                    })
                    .collect();
                (c.to_f64().unwrap_or(f64::NAN), factors)
            })
            .collect();
        CompiledPoly { terms }
    }

    fn eval(&self, at: &Point<'_>) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(slot, e) in factors {
                let v = match slot {
                    Slot::State(i) => at.states[i],
                    Slot::Param(i) => at.params[i],
                    Slot::Sin(i) => at.sin[i],
                    Slot::Cos(i) => at.cos[i],
                };
                t *= if e == 1 { v } else { v.powi(e) };
            }
            acc += t;
        }
        acc
    }
}

/// State values with their sines and cosines precomputed.
pub struct Point<'a> {
    pub states: &'a [f64],
    pub params: &'a [f64],
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl<'a> Point<'a> {
    pub fn new(states: &'a [f64], params: &'a [f64]) -> Self {
        Point { states, params, sin: states.iter().map(|v| v.sin()).collect(), cos: states.iter().map(|v| v.cos()).collect() }
    }
}

/// An expression compiled to `f64` arithmetic.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    num: CompiledPoly,
    den: Option<CompiledPoly>,
    text: String,
}

impl CompiledExpr {
    pub fn new(e: &Expr) -> Self {
        CompiledExpr {
            num: CompiledPoly::new(e.numer()),
            den: (!e.is_polynomial()).then(|| CompiledPoly::new(e.denom())),
            text: e.to_string(),
        }
    }

    pub fn eval_at(&self, at: &Point<'_>) -> Result<f64, KernelError> {
        let n = self.num.eval(at);
        match &self.den {
            None => Ok(n),
            Some(d) => {
                let d = d.eval(at);
                if d.abs() < 1e-12 {
                    Err(KernelError::EvalSingular(self.text.clone()))
                } else {
                    Ok(n / d)
                }
            }
        }
    }

    pub fn eval(&self, states: &[f64], params: &[f64]) -> Result<f64, KernelError> {
        self.eval_at(&Point::new(states, params))
    }
}

/// A vector of compiled expressions.
#[derive(Clone, Debug)]
pub struct CompiledVector(pub Vec<CompiledExpr>);

impl CompiledVector {
    pub fn new(v: &[Expr]) -> Self {
        CompiledVector(v.iter().map(CompiledExpr::new).collect())
    }

    pub fn eval_at(&self, at: &Point<'_>) -> Result<Vec<f64>, KernelError> {
        self.0.iter().map(|c| c.eval_at(at)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expr, SymbolTable};
    use crate::kernel::{Assignment, Sign};

    #[test]
    fn agrees_with_exact_evaluation() {
        let t = SymbolTable::new(&["x", "w"], &[("a", Sign::Any)]);
        let e = parse_expr("(a*x^2 - sin(w))/(1 + cos(w)^2) + 3/4", &t).unwrap();
        let c = CompiledExpr::new(&e);
        let p = Assignment::new(vec![0.3, -1.2], vec![2.5]);
        let want = e.evaluate(&p).unwrap();
        let got = c.eval(&p.states, &p.params).unwrap();
        assert!((want - got).abs() < 1e-14);
    }
}
