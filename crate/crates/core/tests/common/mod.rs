//! Shared fixtures, generators and property checks for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use affine_invariants::dsl::{parse_system, ControlAffineSystem, SymbolTable};
use affine_invariants::forms::{Coords, DifferentialForm, VectorField};
use affine_invariants::kernel::{is_zero, normalize, Assignment, Expr, ExprTree, Sign, Symbol};
use affine_invariants::numeric::lie_bracket;
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const EXAMPLES: [&str; 4] = ["ex1", "ex2", "ex3", "ex4"];

pub fn example_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.sys"))
}

pub fn load(name: &str) -> ControlAffineSystem {
    let text = std::fs::read_to_string(example_path(name)).expect("bundled system exists");
    parse_system(&text).expect("bundled system parses")
}

pub fn expr(sys: &ControlAffineSystem, text: &str) -> Expr {
    sys.parse_expr(text).expect("test expression parses")
}

/// Whether `a = u * b` for a nonzero constant `u`.
pub fn equal_up_to_constant(a: &Expr, b: &Expr) -> bool {
    if a.is_zero() || b.is_zero() {
        return a.is_zero() && b.is_zero();
    }
    a.checked_div(b).map_or(false, |q| q.is_constant())
}

/// Whether `a = u * b` for a unit `u` free of state variables.
pub fn equal_up_to_unit(a: &Expr, b: &Expr) -> bool {
    if a.is_zero() || b.is_zero() {
        return a.is_zero() && b.is_zero();
    }
    a.checked_div(b).map_or(false, |q| !q.depends_on_state())
}

// ---------------------------------------------------------------------------
// Generators. States x y z w, one positive parameter a.

pub fn table() -> SymbolTable {
    SymbolTable::new(&["x", "y", "z", "w"], &[("a", Sign::Positive)])
}

pub fn coords3() -> Coords {
    let t = table();
    t.states[..3].to_vec().into()
}

fn constant(n: i64) -> ExprTree {
    ExprTree::Const(BigRational::from_integer(n.into()))
}

fn leaf(states: usize, trig: bool) -> BoxedStrategy<ExprTree> {
    let t = table();
    let syms: Vec<Symbol> = t.states[..states].to_vec();
    let a = t.params[0].0.clone();
    let mut options: Vec<BoxedStrategy<ExprTree>> = vec![
        (-3i64..=3).prop_map(constant).boxed(),
        proptest::sample::select(syms.clone()).prop_map(ExprTree::Sym).boxed(),
        Just(ExprTree::Sym(a)).boxed(),
    ];
    if trig {
        options.push(proptest::sample::select(syms.clone()).prop_map(ExprTree::Sin).boxed());
        options.push(proptest::sample::select(syms).prop_map(ExprTree::Cos).boxed());
    }
    proptest::strategy::Union::new(options).boxed()
}

/// Random expression trees of bounded size. Quotients divide by `1 + t^2`
/// so that every tree is finite on the whole sampling box.
pub fn tree(states: usize, depth: u32, trig: bool, quotients: bool) -> BoxedStrategy<ExprTree> {
    leaf(states, trig)
        .prop_recursive(depth, 16, 2, move |inner| {
            let bin = |f: fn(Arc<ExprTree>, Arc<ExprTree>) -> ExprTree, inner: &BoxedStrategy<ExprTree>| {
                (inner.clone(), inner.clone()).prop_map(move |(a, b)| f(Arc::new(a), Arc::new(b))).boxed()
            };
            let mut options = vec![
                bin(ExprTree::Add, &inner),
                bin(ExprTree::Sub, &inner),
                bin(ExprTree::Mul, &inner),
                inner.clone().prop_map(|a| ExprTree::Pow(Arc::new(a), 2)).boxed(),
            ];
            if quotients {
                options.push(
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| {
                            let b = Arc::new(b);
                            let den = ExprTree::Add(Arc::new(constant(1)), Arc::new(ExprTree::Mul(b.clone(), b)));
                            ExprTree::Div(Arc::new(a), Arc::new(den))
                        })
                        .boxed(),
                );
            }
            proptest::strategy::Union::new(options)
        })
        .boxed()
}

pub fn arb_expr(states: usize, depth: u32, trig: bool, quotients: bool) -> BoxedStrategy<Expr> {
    tree(states, depth, trig, quotients).prop_map(|t| normalize(&t).expect("denominators are positive")).boxed()
}

/// A point of the box `[-2, 2]^4` with `a` in `[0.5, 2]`.
pub fn arb_point() -> impl Strategy<Value = Assignment> {
    (proptest::collection::vec(-2.0f64..2.0, 4), 0.5f64..2.0).prop_map(|(s, a)| Assignment::new(s, vec![a]))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if k > n {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Random forms of degree `p` on `(x, y, z)` with polynomial-trig coefficients.
pub fn arb_form(p: usize) -> BoxedStrategy<DifferentialForm> {
    let idx = subsets(3, p);
    let k = idx.len();
    proptest::collection::vec(arb_expr(3, 2, true, false), k)
        .prop_map(move |coeffs| {
            let c = coords3();
            idx.iter().zip(coeffs).fold(DifferentialForm::zero(c.clone(), p), |acc, (i, e)| {
                let basis = i.iter().fold(DifferentialForm::scalar(c.clone(), Expr::one()), |b, &j| {
                    b.wedge(&DifferentialForm::basis(c.clone(), j))
                });
                acc.add(&basis.scale(&e))
            })
        })
        .boxed()
}

pub fn arb_degree_form() -> BoxedStrategy<DifferentialForm> {
    (0usize..=3).prop_flat_map(arb_form).boxed()
}

/// Random polynomial vector fields on `(x, y, z)`.
pub fn arb_field() -> BoxedStrategy<VectorField> {
    proptest::collection::vec(arb_expr(3, 2, false, false), 3).prop_map(VectorField::new).boxed()
}

// ---------------------------------------------------------------------------
// Property checks shared by the property suites and the acceptance run.

fn proven_zero_form(f: &DifferentialForm, what: &str) -> Result<(), TestCaseError> {
    for (idx, c) in f.terms() {
        if !is_zero(c, 7).is_proven_zero() {
            return Err(TestCaseError::fail(format!("{what}: coefficient {idx:?} = {c}")));
        }
    }
    Ok(())
}

fn sign(p: usize, q: usize) -> Expr {
    if (p * q) % 2 == 0 {
        Expr::one()
    } else {
        -Expr::one()
    }
}

pub fn check_dd(a: &DifferentialForm) -> Result<(), TestCaseError> {
    proven_zero_form(&a.d().d(), "d(d(a))")
}

pub fn check_graded(a: &DifferentialForm, b: &DifferentialForm) -> Result<(), TestCaseError> {
    let lhs = a.wedge(b);
    let rhs = b.wedge(a).scale(&sign(a.degree(), b.degree()));
    proven_zero_form(&lhs.sub(&rhs), "a^b - (-1)^pq b^a")
}

pub fn check_leibniz(a: &DifferentialForm, b: &DifferentialForm) -> Result<(), TestCaseError> {
    let lhs = a.wedge(b).d();
    let rhs = a.d().wedge(b).add(&a.wedge(&b.d()).scale(&sign(a.degree(), 1)));
    proven_zero_form(&lhs.sub(&rhs), "d(a^b) - da^b - (-1)^p a^db")
}

fn field_diff_zero(v: &VectorField, what: &str) -> Result<(), TestCaseError> {
    for (i, c) in v.0.iter().enumerate() {
        if !c.is_zero() {
            return Err(TestCaseError::fail(format!("{what}: component {i} = {c}")));
        }
    }
    Ok(())
}

fn field_add(a: &VectorField, b: &VectorField) -> VectorField {
    VectorField::new(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect())
}

pub fn check_antisymmetry(x: &VectorField, y: &VectorField) -> Result<(), TestCaseError> {
    let c = coords3();
    field_diff_zero(&field_add(&lie_bracket(x, y, &c), &lie_bracket(y, x, &c)), "[X,Y] + [Y,X]")
}

pub fn check_jacobi(x: &VectorField, y: &VectorField, z: &VectorField) -> Result<(), TestCaseError> {
    let c = coords3();
    let a = lie_bracket(x, &lie_bracket(y, z, &c), &c);
    let b = lie_bracket(y, &lie_bracket(z, x, &c), &c);
    let d = lie_bracket(z, &lie_bracket(x, y, &c), &c);
    field_diff_zero(&field_add(&field_add(&a, &b), &d), "Jacobi sum")
}

/// Central difference with `h = 1e-5` against the symbolic partial, relative
/// to `max(1, |symbolic|)`.
pub fn check_finite_difference(e: &Expr, var: usize, p: &Assignment) -> Result<(), TestCaseError> {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-6;
    let s = table().states[var].clone();
    let exact = e.differentiate(&s).expect("state derivative").evaluate(p).expect("finite");
    let shifted = |dx: f64| {
        let mut q = p.clone();
        q.states[var] += dx;
        e.evaluate(&q).expect("finite")
    };
    let fd = (shifted(H) - shifted(-H)) / (2.0 * H);
    let err = (fd - exact).abs() / exact.abs().max(1.0);
    if err <= TOL {
        Ok(())
    } else {
        Err(TestCaseError::fail(format!("d/d{s} of {e}: symbolic {exact}, finite difference {fd}, relative error {err:e}")))
    }
}

/// Run `check` on `cases` deterministic draws from `strategy`.
pub fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

pub fn fd_strategy() -> impl Strategy<Value = (Expr, usize, Assignment)> {
    (arb_expr(4, 3, true, true), 0usize..4, arb_point())
}

pub fn form_pair() -> impl Strategy<Value = (DifferentialForm, DifferentialForm)> {
    (arb_degree_form(), arb_degree_form())
}

pub fn field_triple() -> impl Strategy<Value = (VectorField, VectorField, VectorField)> {
    (arb_field(), arb_field(), arb_field())
}

pub fn dd_suite(cases: u32) -> Result<(), String> {
    run_cases(cases, arb_degree_form(), |a| check_dd(&a))
}

pub fn graded_suite(cases: u32) -> Result<(), String> {
    run_cases(cases, form_pair(), |(a, b)| check_graded(&a, &b))
}

pub fn leibniz_suite(cases: u32) -> Result<(), String> {
    run_cases(cases, form_pair(), |(a, b)| check_leibniz(&a, &b))
}

pub fn bracket_suite(cases: u32) -> Result<(), String> {
    run_cases(cases, field_triple(), |(x, y, z)| {
        check_antisymmetry(&x, &y)?;
        check_jacobi(&x, &y, &z)
    })
}

pub fn finite_difference_suite(cases: u32) -> Result<(), String> {
    run_cases(cases, fd_strategy(), |(e, v, p)| check_finite_difference(&e, v, &p))
}
