//! Exterior calculus: wedge, d, contraction and reduction modulo a Pfaffian system.
//!
//! cargo run --example forms

use affine_invariants::dsl::{parse_expr, SymbolTable};
use affine_invariants::forms::{Coords, DifferentialForm, Reducer, VectorField};
use affine_invariants::kernel::Domain;

fn main() {
    let table = SymbolTable::new(&["x", "y", "z"], &[]);
    let p = |s: &str| parse_expr(s, &table).expect("valid expression");
    let coords: Coords = table.states.clone().into();

    let theta = DifferentialForm::one_form(coords.clone(), &[p("x*y*z"), p("-x*z"), p("1")]);
    println!("theta = {theta}");
    let dtheta = theta.d();
    println!("d theta = {dtheta}");
    assert!(dtheta.d().is_zero());
    println!("theta ^ d theta = {}", theta.wedge(&dtheta));

    // theta annihilates the control fields.
    for g in [[p("1"), p("y"), p("0")], [p("0"), p("1"), p("x*z")]] {
        println!("theta(g) = {}", theta.contract(&VectorField::new(g.to_vec())));
    }

    // Solve theta = 0 for dz and reduce d theta: the torsion.
    let domain = Domain { states: table.states.clone(), params: vec![], nonzero: vec![] };
    let red = Reducer::new(&[theta.clone()], &[2], &domain, 42).expect("dz coefficient is 1");
    println!("d theta mod theta = {}", red.reduce(&dtheta));
    println!("dz mod theta = {}", red.reduce(&DifferentialForm::exact(coords, &p("z"))));
}
