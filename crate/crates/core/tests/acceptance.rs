//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use affine_invariants::dsl::{ControlAffineSystem, ControlSchedule, SchedulePiece};
use affine_invariants::flag::{annihilator, derived_flag};
use affine_invariants::forms::{DifferentialForm, VectorField};
use affine_invariants::integrals::{
    check_membership, default_dmax, first_integrals, gfi_candidates, Classification, Evidence, Provenance,
};
use affine_invariants::kernel::{Domain, Expr};
use affine_invariants::numeric::{
    convergence_ratio, distribution_type, escape_test, invariance_test, leaf_controllability, lie_bracket, system_fields,
    TrialPlan, Verdict,
};
use affine_invariants::report::{analyze, AnalyzeOptions, InvariantReport};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// 100 trials, 10 pieces, horizon 5, h = 1e-3.
fn plan() -> TrialPlan {
    TrialPlan { trials: 100, pieces: 10, horizon: 5.0, h: 1e-3 }
}

fn report(sys: &ControlAffineSystem) -> Result<InvariantReport, String> {
    analyze(sys, &AnalyzeOptions { seed: SEED, plan: plan(), ..AnalyzeOptions::default() }).map_err(|e| e.to_string())
}

/// Every 2x2 minor of the stacked coefficient rows vanishes exactly.
fn same_line(a: &[Expr], b: &[Expr]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (&a[i] * &b[j] - &a[j] * &b[i]).is_zero()))
}

fn one_form(sys: &ControlAffineSystem, coeffs: &[&str]) -> Vec<Expr> {
    coeffs.iter().map(|c| expr(sys, c)).collect()
}

fn held_within_tolerance(v: &affine_invariants::numeric::InvarianceVerdict) -> Check {
    ensure!(v.verdict == Verdict::Held, "invariance violated: max |rho| = {:e}", v.max_abs_rho);
    ensure!(v.unstarted == 0, "{} trials found no start on the zero locus", v.unstarted);
    for t in &v.trials {
        ensure!(t.max_abs_rho < 1e-6 * (1.0 + t.arc_length), "trial {}: |rho| = {:e}", t.index, t.max_abs_rho);
    }
    Ok(())
}

fn criterion_1() -> Check {
    let sys = load("ex1");
    let theta = annihilator(&sys, SEED).map_err(|e| e.to_string())?;
    ensure!(theta.rank() == 1, "annihilator rank {}", theta.rank());
    let expected = one_form(&sys, &["x*y*z", "-x*z", "1"]);
    ensure!(same_line(&theta.generators()[0].one_form_coeffs(), &expected), "annihilator {}", theta.generators()[0]);

    let flag = derived_flag(&sys, SEED).map_err(|e| e.to_string())?;
    let t = &flag.levels[0].torsion.entries[0][0];
    ensure!(equal_up_to_unit(t, &expr(&sys, "-z*(1 + x)")), "torsion {t}");

    let base = flag.base();
    let cands = gfi_candidates(&flag.levels[0].torsion, base.rank(), default_dmax(base.rank()), &flag.domain, SEED)
        .map_err(|e| e.to_string())?;
    let z = expr(&sys, "z");
    ensure!(cands.candidates.iter().any(|c| c.len() == 1 && equal_up_to_constant(&c[0], &z)), "candidates lack z");

    let m = check_membership(&[z.clone()], base, &flag.domain, Provenance::FromTorsionMinors, SEED).map_err(|e| e.to_string())?;
    ensure!(m.classification == Classification::GeneralizedFirstIntegral, "z classified {:?}", m.classification);
    let Evidence::Membership(cert) = &m.evidence else { return Err(format!("evidence {:?}", m.evidence)) };
    let coords = base.coords().clone();
    let quotient = DifferentialForm::one_form(coords.clone(), &one_form(&sys, &["x*y", "-x", "0"])).neg();
    ensure!(cert.multipliers[0] == vec![Expr::one()], "multiplier {:?}", cert.multipliers[0]);
    ensure!(cert.quotients[0][0] == quotient, "quotient {}", cert.quotients[0][0]);
    let lhs = DifferentialForm::exact(coords, &z);
    let rhs = base.generators()[0].add(&quotient.scale(&z));
    ensure!(lhs == rhs, "dz != theta - z(xy dx - x dy)");

    let r = report(&sys)?;
    ensure!(r.summary == "1 isolated invariant submanifold {z = 0}", "summary {:?}", r.summary);
    let iso = &r.isolated[0];
    let ctl = iso.controllability.as_ref().ok_or("no bracket rank on the leaf")?;
    ensure!(ctl.bracket_rank == 2 && ctl.leaf_dimension == 2 && ctl.controllable, "leaf brackets {ctl:?}");
    let inv = iso.invariance.as_ref().ok_or("no invariance run")?;
    ensure!(inv.trials == 100 && inv.verdict == "held" && inv.worst_ratio < 1.0, "invariance {inv:?}");
    held_within_tolerance(&invariance_test(&sys, &[z], plan(), SEED))
}

fn criterion_2() -> Check {
    let sys = load("ex2");
    let flag = derived_flag(&sys, SEED).map_err(|e| e.to_string())?;
    let t = &flag.levels[0].torsion.entries[0][0];
    ensure!(equal_up_to_unit(t, &expr(&sys, "-y*(1 + 2*x)")), "torsion {t}");
    for (rho, coeff) in [("y", Some("1")), ("1 + 2*x", None)] {
        let e = expr(&sys, rho);
        let m = check_membership(&[e], flag.base(), &flag.domain, Provenance::FromTorsionMinors, SEED).map_err(|e| e.to_string())?;
        ensure!(m.classification == Classification::Rejected, "{rho} classified {:?}", m.classification);
        if let Some(c) = coeff {
            let Evidence::Failure { coefficient: Some(k), .. } = &m.evidence else {
                return Err(format!("{rho}: evidence {:?}", m.evidence));
            };
            ensure!(*k == expr(&sys, c), "{rho}: irreducible coefficient {k}");
        }
    }
    let r = report(&sys)?;
    ensure!(r.summary == "no invariant submanifolds", "summary {:?}", r.summary);
    let esc = escape_test(&sys, &expr(&sys, "y"), SEED).ok_or("no escaping schedule")?;
    ensure!(esc.value.abs() > 0.1 && esc.time <= 5.0, "escape |y| = {} at t = {}", esc.value, esc.time);
    Ok(())
}

fn criterion_3() -> Check {
    let sys = load("ex3");
    let flag = derived_flag(&sys, SEED).map_err(|e| e.to_string())?;
    ensure!((flag.nu, flag.q) == (1, 1), "flag type ({}, {})", flag.nu, flag.q);
    let term = flag.terminal();
    ensure!(term.rank() == 1, "I(1) rank {}", term.rank());
    ensure!(same_line(&term.generators()[0].one_form_coeffs(), &one_form(&sys, &["b", "0", "-a", "0"])), "I(1) = {}", term.generators()[0]);

    let rho = expr(&sys, "b*x - a*z");
    let fis = first_integrals(&flag, &sys.spanning_fields(), SEED);
    ensure!(
        fis.iter().any(|c| c.classification == Classification::FirstIntegral && c.rho.len() == 1 && equal_up_to_constant(&c.rho[0], &rho)),
        "first integrals {:?}",
        fis.iter().map(|c| c.rho.iter().map(Expr::to_string).collect::<Vec<_>>()).collect::<Vec<_>>()
    );

    let coords = &sys.symbols.states;
    let g1 = VectorField::new(sys.controls[0].field.clone());
    let g2 = VectorField::new(sys.controls[1].field.clone());
    let br = lie_bracket(&g1, &g2, coords);
    ensure!(br.0 == one_form(&sys, &["a*sin(w)", "-cos(w)", "b*sin(w)", "0"]), "[g1, g2] = {:?}", br.0.iter().map(Expr::to_string).collect::<Vec<_>>());

    let fields = system_fields(&sys);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let domain = sys.domain();
    for _ in 0..10 {
        let p = domain.sample(&mut rng);
        let l = leaf_controllability(&fields, coords, &[rho.clone()], &p, 4).map_err(|e| e.to_string())?;
        ensure!(l.rank == 3 && l.controllable, "leaf brackets at {:?}: {l:?}", p.states);
    }

    for _ in 0..5 {
        let c = Expr::rational(num_rational::BigRational::new(rng.gen_range(-32..=32).into(), 16.into()));
        held_within_tolerance(&invariance_test(&sys, &[&rho - &c], plan(), SEED)).map_err(|e| format!("c = {c}: {e}"))?;
    }
    Ok(())
}

fn criterion_4() -> Check {
    let sys = load("ex4");
    let rho = expr(&sys, "b*x - a*z");
    let flag = derived_flag(&sys, SEED).map_err(|e| e.to_string())?;
    let base = flag.base();
    let m = check_membership(&[rho.clone()], base, &flag.domain, Provenance::UserDeclared, SEED).map_err(|e| e.to_string())?;
    ensure!(m.classification == Classification::GeneralizedFirstIntegral, "rho classified {:?}", m.classification);
    let Evidence::Membership(cert) = &m.evidence else { return Err(format!("evidence {:?}", m.evidence)) };
    let coords = base.coords().clone();
    let mut rhs = cert.quotients[0][0].scale(&rho);
    for (l, g) in cert.multipliers[0].iter().zip(base.generators()) {
        rhs = rhs.add(&g.scale(l));
    }
    ensure!(DifferentialForm::exact(coords, &rho) == rhs, "certificate identity fails");
    // Certificates are regular on the domain: every denominator is certified.
    let regular = |e: &Expr| flag.domain.certified_nonzero(&Expr::from_poly(e.denom().clone()));
    ensure!(cert.multipliers[0].iter().all(regular), "multiplier not regular on the domain");
    ensure!(cert.quotients[0][0].terms().all(|(_, c)| regular(c)), "quotient not regular on the domain");
    held_within_tolerance(&invariance_test(&sys, &[rho.clone()], plan(), SEED))?;

    let b = load("ex4_case_b");
    let fb = derived_flag(&b, SEED).map_err(|e| e.to_string())?;
    let fis = first_integrals(&fb, &b.spanning_fields(), SEED);
    ensure!(
        fis.iter().any(|c| c.classification == Classification::FirstIntegral && equal_up_to_constant(&c.rho[0], &rho)),
        "case (b): rho is not a first integral"
    );
    let mb = check_membership(&[rho.clone()], fb.base(), &fb.domain, Provenance::UserDeclared, SEED).map_err(|e| e.to_string())?;
    ensure!(mb.classification == Classification::FirstIntegral, "case (b): rho classified {:?}", mb.classification);

    let a = report(&load("ex4_case_a"))?;
    let driftless = report(&load("ex3"))?;
    let shape = |r: &InvariantReport| {
        (
            r.summary.clone(),
            r.flag.flag_type,
            r.foliation.iter().map(|f| f.rho.clone()).collect::<Vec<_>>(),
            r.isolated.iter().map(|f| f.rho.clone()).collect::<Vec<_>>(),
        )
    };
    ensure!(shape(&a) == shape(&driftless), "case (a) {:?} vs driftless {:?}", shape(&a), shape(&driftless));
    Ok(())
}

fn criterion_5() -> Check {
    dd_suite(200).map_err(|e| format!("d(d(a)): {e}"))?;
    graded_suite(200).map_err(|e| format!("graded commutativity: {e}"))?;
    leibniz_suite(200).map_err(|e| format!("Leibniz: {e}"))?;
    bracket_suite(100).map_err(|e| format!("brackets: {e}"))?;
    finite_difference_suite(200).map_err(|e| format!("finite differences: {e}"))?;

    let sys = load("ex3");
    let sched = ControlSchedule::new(vec![
        SchedulePiece { duration: 1.0, control: vec![1.0, 0.3] },
        SchedulePiece { duration: 1.0, control: vec![-0.5, -0.6] },
    ]);
    let ratio = convergence_ratio(&sys, &[0.1, 0.2, 0.3, 0.4], &[1.0, 2.0], &sched, 0.1).map_err(|e| e.to_string())?;
    ensure!((10.0..=25.0).contains(&ratio), "RK4 convergence ratio {ratio}");

    for name in EXAMPLES {
        let sys = load(name);
        let flag = derived_flag(&sys, SEED).map_err(|e| e.to_string())?;
        let fields: Vec<VectorField> = system_fields(&sys).into_iter().map(|f| f.field).collect();
        let domain: Domain = flag.domain.clone();
        let numeric = distribution_type(&fields, &sys.symbols.states, &domain, SEED).map_err(|e| e.to_string())?;
        ensure!(numeric == flag.dual_type(), "{name}: Pfaffian dual type {:?}, bracket type {numeric:?}", flag.dual_type());
    }
    Ok(())
}

fn criterion_6() -> Check {
    for name in EXAMPLES {
        let path = example_path(name);
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_affine-invariants"))
                .args(["analyze", "--seed", "42"])
                .arg(&path)
                .output()
                .map_err(|e| e.to_string())
        };
        let (a, b) = (run()?, run()?);
        ensure!(a.status.success() && b.status.success(), "{name}: {}", String::from_utf8_lossy(&a.stderr));
        ensure!(!a.stdout.is_empty() && a.stdout == b.stdout, "{name}: JSON differs between runs");
        // In-process output agrees with the binary.
        let r = analyze(&load(name), &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
        ensure!(r.to_json().as_bytes() == a.stdout.as_slice(), "{name}: library and binary JSON differ");
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 6] = [
        ("1 ex1 isolated invariant submanifold {z = 0}", criterion_1),
        ("2 ex2 has no invariant submanifolds", criterion_2),
        ("3 ex3 foliation by b*x - a*z", criterion_3),
        ("4 ex4 generalized first integral and drift cases", criterion_4),
        ("5 property suites, RK4 order, flag duality", criterion_5),
        ("6 deterministic JSON", criterion_6),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS criterion {name} ({secs:.1}s)"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
