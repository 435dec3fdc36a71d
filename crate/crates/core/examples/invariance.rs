//! Numeric invariance trials on a zero locus, and the escape search for a
//! rejected candidate.
//!
//! cargo run --release --example invariance

use affine_invariants::dsl::parse_system;
use affine_invariants::numeric::{escape_test, invariance_test, TrialPlan};

fn main() {
    let load = |name: &str| {
        let path = format!("{}/examples/{name}.sys", env!("CARGO_MANIFEST_DIR"));
        parse_system(&std::fs::read_to_string(path).unwrap()).unwrap()
    };

    let ex1 = load("ex1");
    let z = ex1.parse_expr("z").unwrap();
    let v = invariance_test(&ex1, &[z], TrialPlan::default(), 42);
    println!("ex1, z = 0: {:?} over {} trials, max |z| = {:e}", v.verdict, v.trials.len(), v.max_abs_rho);

    let ex2 = load("ex2");
    let y = ex2.parse_expr("y").unwrap();
    let v = invariance_test(&ex2, &[y.clone()], TrialPlan { trials: 20, ..TrialPlan::default() }, 42);
    println!("ex2, y = 0: {:?}, max |y| = {:.3}", v.verdict, v.max_abs_rho);
    if let Some(e) = escape_test(&ex2, &y, 42) {
        println!("escape from {:?} under u = {:?}: |y| = {:.3} at t = {}", e.x0, e.schedule.pieces[0].control, e.value.abs(), e.time);
    }
}
