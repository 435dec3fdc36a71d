//! Parse a system description and print its canonical source and fields.
//!
//! cargo run --example system_dsl -- examples/ex3.sys

use affine_invariants::dsl::{parse_system, vector_text};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ex3.sys").into());
    let text = std::fs::read_to_string(&path).expect("readable system file");
    let sys = match parse_system(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    print!("{}", sys.to_source());
    println!("n = {}, m = {}, drift: {}", sys.n(), sys.m(), sys.has_drift());
    for (k, f) in sys.spanning_fields().iter().enumerate() {
        println!("field {k}: {}", vector_text(f));
    }

    // Errors carry a line and column.
    let err = parse_system("states: x\ncontrol g: [x +]\n").unwrap_err();
    println!("error example: {err}");
}
