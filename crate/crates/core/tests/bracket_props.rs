mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn bracket_is_antisymmetric((x, y, _) in field_triple()) {
        check_antisymmetry(&x, &y)?;
    }

    #[test]
    fn bracket_satisfies_jacobi((x, y, z) in field_triple()) {
        check_jacobi(&x, &y, &z)?;
    }
}
