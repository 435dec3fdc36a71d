//! Lie brackets, bracket ranks, controllability on a leaf and the
//! distribution type dual to the derived flag.
//!
//! cargo run --example brackets

use affine_invariants::dsl::{parse_system, vector_text};
use affine_invariants::forms::VectorField;
use affine_invariants::kernel::Assignment;
use affine_invariants::numeric::{bracket_table, distribution_type, leaf_controllability, system_fields};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ex3.sys");
    let sys = parse_system(&std::fs::read_to_string(path).unwrap()).unwrap();
    let coords = &sys.symbols.states;
    let fields = system_fields(&sys);

    for (depth, level) in bracket_table(&fields, coords, 3).iter().enumerate() {
        for f in level {
            println!("depth {}: {} = {}", depth + 1, f.label, vector_text(&f.field.0));
        }
    }

    let rho = sys.parse_expr("b*x - a*z").unwrap();
    let p = Assignment::new(vec![0.3, -1.0, 0.2, 0.5], vec![1.0, 2.0]);
    let leaf = leaf_controllability(&fields, coords, &[rho], &p, 4).unwrap();
    println!(
        "leaf through {:?}: bracket rank {} of {}, tangent {}, controllable {}",
        p.states, leaf.rank, leaf.leaf_dimension, leaf.tangent, leaf.controllable
    );

    let plain: Vec<VectorField> = fields.into_iter().map(|f| f.field).collect();
    println!("distribution type {:?}", distribution_type(&plain, coords, &sys.domain(), 42).unwrap());
}
