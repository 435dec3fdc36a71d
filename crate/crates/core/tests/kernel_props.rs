mod common;

use affine_invariants::kernel::{factor, is_zero, Expr};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sum_and_product_commute(a in arb_expr(4, 3, true, true), b in arb_expr(4, 3, true, true)) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
    }

    #[test]
    fn difference_with_self_is_proven_zero(a in arb_expr(4, 3, true, true)) {
        prop_assert!(is_zero(&(&a - &a), 1).is_proven_zero());
    }

    #[test]
    fn product_rule(a in arb_expr(4, 2, true, true), b in arb_expr(4, 2, true, true), v in 0usize..4) {
        let s = table().states[v].clone();
        let lhs = (&a * &b).differentiate(&s).unwrap();
        let rhs = &a.differentiate(&s).unwrap() * &b + &a * &b.differentiate(&s).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn derivative_matches_finite_difference((e, v, p) in fd_strategy()) {
        check_finite_difference(&e, v, &p)?;
    }

    #[test]
    fn factors_multiply_back(a in arb_expr(4, 2, false, false), b in arb_expr(4, 2, false, false)) {
        let e = &a * &b;
        prop_assume!(!e.is_zero());
        let f = factor(&e).unwrap();
        let back = f.factors.iter().fold(Expr::rational(f.unit.clone()), |acc, (g, m)| acc * g.pow(*m as i32).unwrap());
        prop_assert_eq!(back, e);
    }

    #[test]
    fn exact_division_recovers_factor(a in arb_expr(4, 2, true, false), b in arb_expr(4, 2, true, false)) {
        prop_assume!(!b.is_zero());
        prop_assert_eq!((&a * &b).divide_exact(&b), Some(a));
    }

    #[test]
    fn quotient_by_factor_is_canonical(a in arb_expr(4, 2, true, true), b in arb_expr(4, 2, true, true)) {
        prop_assume!(!b.is_zero());
        prop_assert_eq!((&a * &b).checked_div(&b).unwrap(), a);
    }
}

#[test]
fn sine_denominators_are_rationalized() {
    let sys = affine_invariants::dsl::parse_system("states: y\ncontrol g: [1]\n").unwrap();
    let lhs = expr(&sys, "(cos(y)^2 - 1)/sin(y)");
    assert_eq!(lhs, expr(&sys, "-sin(y)"));
    assert_eq!(expr(&sys, "sin(y)/(1 + cos(y))"), expr(&sys, "(1 - cos(y))/sin(y)"));
}
