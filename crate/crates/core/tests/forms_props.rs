mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn d_squared_vanishes(a in arb_degree_form()) {
        check_dd(&a)?;
    }

    #[test]
    fn wedge_is_graded_commutative((a, b) in form_pair()) {
        check_graded(&a, &b)?;
    }

    #[test]
    fn d_satisfies_leibniz((a, b) in form_pair()) {
        check_leibniz(&a, &b)?;
    }

    #[test]
    fn wedge_is_associative(a in arb_degree_form(), b in arb_degree_form(), c in arb_degree_form()) {
        prop_assert_eq!(a.wedge(&b).wedge(&c), a.wedge(&b.wedge(&c)));
    }
}
