//! First integrals from the terminal system and generalized first integrals
//! from torsion minors, with membership certificates.
//!
//! cargo run --example first_integrals

use affine_invariants::dsl::parse_system;
use affine_invariants::flag::derived_flag;
use affine_invariants::integrals::{check_membership, default_dmax, first_integrals, gfi_candidates, Evidence};

fn load(name: &str) -> affine_invariants::dsl::ControlAffineSystem {
    let path = format!("{}/examples/{name}.sys", env!("CARGO_MANIFEST_DIR"));
    parse_system(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn main() {
    // Integrable terminal system: a foliation.
    let sys = load("ex3");
    let flag = derived_flag(&sys, 42).unwrap();
    for c in first_integrals(&flag, &sys.spanning_fields(), 42) {
        println!("ex3: {} is {:?}", c.rho[0], c.classification);
    }

    // Non-integrable: candidates from torsion minors, then membership.
    for name in ["ex1", "ex2", "ex4"] {
        let sys = load(name);
        let flag = derived_flag(&sys, 42).unwrap();
        let base = flag.base();
        let cands = gfi_candidates(&flag.levels[0].torsion, base.rank(), default_dmax(base.rank()), &flag.domain, 42).unwrap();
        for rho in &cands.candidates {
            let c = check_membership(rho, base, &flag.domain, affine_invariants::integrals::Provenance::FromTorsionMinors, 42).unwrap();
            print!("{name}: {} is {:?}", rho[0], c.classification);
            match &c.evidence {
                Evidence::Membership(cert) => println!(
                    ", d rho = ({}) theta + rho ({})",
                    cert.multipliers[0][0], cert.quotients[0][0]
                ),
                Evidence::Failure { coefficient: Some(k), differential, .. } => {
                    println!(", coefficient {k} of {} survives", differential.as_deref().unwrap_or("?"))
                }
                _ => println!(),
            }
        }
    }
}
