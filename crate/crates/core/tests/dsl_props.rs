mod common;

use affine_invariants::dsl::{parse_system, ControlAffineSystem};
use affine_invariants::kernel::Expr;
use common::*;
use proptest::prelude::*;

fn source(fields: &[Vec<Expr>], drift: Option<&[Expr]>, candidate: &Expr) -> String {
    let row = |v: &[Expr]| v.iter().map(Expr::to_string).collect::<Vec<_>>().join(", ");
    let mut s = String::from("# generated\nstates: x y z w\nparams: a > 0\n");
    if let Some(f) = drift {
        s.push_str(&format!("drift: [{}]\n", row(f)));
    }
    for (j, g) in fields.iter().enumerate() {
        s.push_str(&format!("control g{}: [{}]\n", j + 1, row(g)));
    }
    s.push_str(&format!("candidate r: {candidate}\nassume_nonzero: cos(w)\n"));
    s
}

fn same_system(a: &ControlAffineSystem, b: &ControlAffineSystem) -> bool {
    a.drift == b.drift
        && a.controls.len() == b.controls.len()
        && a.controls.iter().zip(&b.controls).all(|(x, y)| x.name == y.name && x.field == y.field)
        && a.candidates.iter().map(|c| &c.rho).eq(b.candidates.iter().map(|c| &c.rho))
        && a.assume_nonzero == b.assume_nonzero
}

fn arb_vector() -> impl Strategy<Value = Vec<Expr>> {
    proptest::collection::vec(arb_expr(4, 2, true, true), 4)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_systems_parse_back(
        fields in proptest::collection::vec(arb_vector(), 1..3),
        drift in proptest::option::of(arb_vector()),
        cand in arb_expr(4, 2, true, false),
    ) {
        let text = source(&fields, drift.as_deref(), &cand);
        let sys = parse_system(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        for (g, c) in fields.iter().zip(&sys.controls) {
            prop_assert_eq!(g, &c.field);
        }
        let again = parse_system(&sys.to_source()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(same_system(&sys, &again), "{}", sys.to_source());
    }

    #[test]
    fn parser_never_panics_on_noise(text in "[a-z0-9 :\\[\\],+*/^()<>#.\\n-]{0,120}") {
        let _ = parse_system(&text);
    }

    #[test]
    fn parser_never_panics_on_mutated_source(cut in 0usize..200, insert in "[\\[\\](),:*^/0-9a-z ]{0,4}") {
        let base = std::fs::read_to_string(example_path("ex3")).unwrap();
        let mut at = cut.min(base.len());
        while !base.is_char_boundary(at) {
            at -= 1;
        }
        let text = format!("{}{}{}", &base[..at], insert, &base[at..]);
        let _ = parse_system(&text);
    }
}

#[test]
fn errors_carry_positions() {
    let err = parse_system("states: x y\ncontrol g: [1, y +]\n").unwrap_err();
    let pos = err.pos().expect("syntax errors are located");
    assert_eq!(pos.line, 2);
}

#[test]
fn bundled_examples_round_trip() {
    for name in ["ex1", "ex2", "ex3", "ex4", "ex4_case_a", "ex4_case_b"] {
        let sys = load(name);
        let again = parse_system(&sys.to_source()).unwrap();
        assert!(same_system(&sys, &again), "{name}");
    }
}
