//! Derived flag of the annihilating Pfaffian system of a control system.
//!
//! cargo run --example derived_flag -- examples/ex3.sys

use affine_invariants::dsl::parse_system;
use affine_invariants::flag::derived_flag;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ex3.sys").into());
    let sys = parse_system(&std::fs::read_to_string(&path).expect("readable system file")).expect("valid system");
    let flag = derived_flag(&sys, 42).expect("flag computes");
    for (k, level) in flag.levels.iter().enumerate() {
        let s = &level.system;
        println!("I({k}): rank {}", s.rank());
        for g in s.generators() {
            println!("  {g}");
        }
        let labels = level.torsion.column_labels(s.coords());
        for row in &level.torsion.entries {
            let cells: Vec<String> = labels.iter().zip(row).map(|(l, e)| format!("{l}: {e}")).collect();
            println!("  torsion [{}]", cells.join(", "));
        }
    }
    println!("type ({}, {}), dual distribution type {:?}", flag.nu, flag.q, flag.dual_type());
    if !flag.assumptions().is_empty() {
        let a: Vec<String> = flag.assumptions().iter().map(|e| e.to_string()).collect();
        println!("valid where these do not vanish: {}", a.join(", "));
    }
}
