//! Expression trees as produced by the parser, and their normalization.

use std::sync::Arc;

use num_rational::BigRational;

use super::{Expr, KernelError, Symbol};

/// An unnormalized expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum ExprTree {
    Const(BigRational),
    Sym(Symbol),
    Neg(Arc<ExprTree>),
    Add(Arc<ExprTree>, Arc<ExprTree>),
    Sub(Arc<ExprTree>, Arc<ExprTree>),
    Mul(Arc<ExprTree>, Arc<ExprTree>),
    Div(Arc<ExprTree>, Arc<ExprTree>),
    Pow(Arc<ExprTree>, i32),
    /// `sin` of a state variable.
    Sin(Symbol),
    Cos(Symbol),
}

/// Canonical form of a tree.
pub fn normalize(t: &ExprTree) -> Result<Expr, KernelError> {
    Ok(match t {
        ExprTree::Const(c) => Expr::rational(c.clone()),
        ExprTree::Sym(s) => Expr::symbol(s.clone()),
        ExprTree::Neg(a) => -normalize(a)?,
        ExprTree::Add(a, b) => normalize(a)? + normalize(b)?,
        ExprTree::Sub(a, b) => normalize(a)? - normalize(b)?,
        ExprTree::Mul(a, b) => normalize(a)? * normalize(b)?,
        ExprTree::Div(a, b) => normalize(a)?.checked_div(&normalize(b)?)?,
        ExprTree::Pow(a, e) => normalize(a)?.pow(*e)?,
        ExprTree::Sin(v) => Expr::symbol(v.sin()),
        ExprTree::Cos(v) => Expr::symbol(v.cos()),
    })
}
