//! Full pipeline on a system file, as text or JSON.
//!
//! cargo run --release --example analyze -- examples/ex1.sys [--json]

use affine_invariants::dsl::parse_system;
use affine_invariants::report::{analyze, AnalyzeOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ex1.sys").into());
    let json = args.any(|a| a == "--json");
    let sys = parse_system(&std::fs::read_to_string(&path).expect("readable system file")).expect("valid system");
    match analyze(&sys, &AnalyzeOptions::default()) {
        Ok(r) if json => print!("{}", r.to_json()),
        Ok(r) => print!("{}", r.to_text()),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
