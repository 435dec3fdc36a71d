//! Values frozen from `tests/oracle/torsion_oracle.py` (sympy, brute-force
//! expansion of d(theta) and substitution of the pivot differential), plus a
//! finite-difference torsion oracle.

mod common;

use affine_invariants::flag::derived_flag;
use affine_invariants::forms::DifferentialForm;
use affine_invariants::kernel::{Assignment, Expr};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;

fn torsion_row(name: &str) -> (affine_invariants::dsl::ControlAffineSystem, Vec<Expr>, Vec<Expr>) {
    let sys = load(name);
    let flag = derived_flag(&sys, SEED).unwrap();
    let theta = flag.base().generators()[0].one_form_coeffs();
    (sys, theta, flag.levels[0].torsion.entries[0].clone())
}

#[test]
fn ex1_torsion_matches_oracle() {
    let (sys, theta, t) = torsion_row("ex1");
    let oracle_theta = ["x*y*z", "-x*z", "1"].map(|s| expr(&sys, s));
    assert_eq!(theta, oracle_theta);
    assert_eq!(t, vec![expr(&sys, "-z*(x + 1)")]);
}

#[test]
fn ex2_torsion_matches_oracle() {
    let (sys, theta, t) = torsion_row("ex2");
    assert_eq!(theta, ["x*y^2", "-x*y", "1"].map(|s| expr(&sys, s)));
    assert_eq!(t, vec![expr(&sys, "-y*(2*x + 1)")]);
}

#[test]
fn ex4_torsion_matches_oracle() {
    let (sys, theta, t) = torsion_row("ex4");
    // The oracle generator is the negative of ours; torsion scales with it.
    let oracle_theta = ["-b*cos(w)", "b*(b*x - a*z)*cos(w)", "a*cos(w) - (b*x - a*z)*sin(w)", "0"];
    let oracle_t = ["0", "0", "(-a*z + b*x)/cos(w)"];
    assert_eq!(theta, oracle_theta.map(|s| -expr(&sys, s)));
    assert_eq!(t, oracle_t.map(|s| -expr(&sys, s)));
}

#[test]
fn ex4_reduced_differential_of_rho() {
    let sys = load("ex4");
    let flag = derived_flag(&sys, SEED).unwrap();
    let red = flag.base().reducer(&flag.domain, SEED).unwrap();
    let rho = expr(&sys, "b*x - a*z");
    let r = red.reduce(&DifferentialForm::exact(flag.base().coords().clone(), &rho));
    assert_eq!(r.one_form_coeffs(), ["0", "b*(b*x - a*z)", "-(b*x - a*z)*sin(w)/cos(w)", "0"].map(|s| expr(&sys, s)));
}

/// Torsion of a rank-one system from central differences of its generator.
fn numeric_torsion(theta: &[Expr], pivot: usize, p: &Assignment) -> Vec<Vec<f64>> {
    const H: f64 = 1e-5;
    let n = theta.len();
    let eval = |e: &Expr, q: &Assignment| e.evaluate(q).unwrap();
    let partial = |e: &Expr, j: usize| {
        let (mut a, mut b) = (p.clone(), p.clone());
        a.states[j] += H;
        b.states[j] -= H;
        (eval(e, &a) - eval(e, &b)) / (2.0 * H)
    };
    // d(theta) as an antisymmetric matrix c[j][k] = d_j theta_k - d_k theta_j.
    let mut c = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                c[j][k] = partial(&theta[k], j) - partial(&theta[j], k);
            }
        }
    }
    let tp = eval(&theta[pivot], p);
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        if i == pivot {
            for j in 0..n {
                if j != pivot {
                    s[i][j] = -eval(&theta[j], p) / tp;
                }
            }
        } else {
            s[i][i] = 1.0;
        }
    }
    let mut red = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            red[a][b] = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| s[i][a] * c[i][j] * s[j][b]).sum();
        }
    }
    red
}

#[test]
fn torsion_agrees_with_finite_differences() {
    for name in ["ex1", "ex2", "ex4"] {
        let sys = load(name);
        let flag = derived_flag(&sys, SEED).unwrap();
        let base = flag.base();
        let theta = base.generators()[0].one_form_coeffs();
        let t = &flag.levels[0].torsion;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = flag.domain.sample(&mut rng);
            if theta[base.pivots()[0]].evaluate(&p).unwrap().abs() < 0.1 {
                continue;
            }
            let red = numeric_torsion(&theta, base.pivots()[0], &p);
            for (col, &(j, k)) in t.columns.iter().enumerate() {
                let exact = t.entries[0][col].evaluate(&p).unwrap();
                let err = (red[j][k] - exact).abs() / exact.abs().max(1.0);
                assert!(err < 1e-6, "{name} column {col}: {} vs {exact}", red[j][k]);
            }
        }
    }
}
