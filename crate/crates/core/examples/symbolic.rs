//! Canonical expressions: normalization, derivatives, factoring, zero tests.
//!
//! cargo run --example symbolic

use affine_invariants::dsl::{parse_expr, SymbolTable};
use affine_invariants::kernel::{factor, is_zero, Expr, Sign, ZeroVerdict};

fn main() {
    let table = SymbolTable::new(&["x", "y", "w"], &[("a", Sign::Positive)]);
    let p = |s: &str| parse_expr(s, &table).expect("valid expression");

    // Equal inputs share one normal form.
    let e = p("(x^2 - 1)/(x - 1) + sin(w)^2");
    println!("{e}");
    assert_eq!(e, p("x + 2 - cos(w)^2"));
    assert_eq!(p("(cos(y)^2 - 1)/sin(y)"), p("-sin(y)"));

    let x = table.states[0].clone();
    let w = table.states[2].clone();
    let f = p("a*x^2*cos(w)/(1 + x^2)");
    println!("d/dx {f} = {}", f.differentiate(&x).unwrap());
    println!("d/dw {f} = {}", f.differentiate(&w).unwrap());

    let h = p("x^3*y - x*y^3");
    let fac = factor(&h).unwrap();
    let parts: Vec<String> =
        fac.factors.iter().map(|(f, m)| if *m == 1 { format!("({f})") } else { format!("({f})^{m}") }).collect();
    println!("{h} = {} {}", fac.unit, parts.join(" "));

    let identity = p("sin(w)^2 + cos(w)^2 - 1");
    assert!(is_zero(&identity, 1).is_proven_zero());
    if let ZeroVerdict::ProvenNonzero(at) = is_zero(&p("x - y"), 1) {
        println!("x - y is nonzero at {:?}", at.states);
    }
    println!("a/a = {}", p("a").checked_div(&p("a")).unwrap_or_else(|_| Expr::zero()));
}
