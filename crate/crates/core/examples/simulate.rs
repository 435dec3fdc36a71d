//! RK4 under piecewise-constant controls. Prints the trajectory as CSV on
//! stdout and the step-halving convergence ratio on stderr.
//!
//! cargo run --example simulate > trajectory.csv

use affine_invariants::dsl::{parse_system, ControlSchedule, SchedulePiece};
use affine_invariants::numeric::{convergence_ratio, simulate};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ex3.sys");
    let sys = parse_system(&std::fs::read_to_string(path).unwrap()).unwrap();
    let rho = sys.parse_expr("b*x - a*z").unwrap();
    let sched = ControlSchedule::new(vec![
        SchedulePiece { duration: 1.0, control: vec![1.0, 0.3] },
        SchedulePiece { duration: 1.5, control: vec![-0.5, -0.6] },
    ]);
    let x0 = [0.1, 0.2, 0.3, 0.4];
    let params = [1.0, 2.0];
    let traj = simulate(&sys, &x0, &params, &sched, 1e-2, &[rho]).expect("stays in cos(w) != 0");
    print!("{}", traj.to_csv());
    eprintln!("{} samples, arc length {:.4}, max |rho - rho(0)| {:.3e}", traj.len(), traj.arc_length(), {
        let r0 = traj.monitors[0][0];
        traj.monitors.iter().map(|m| (m[0] - r0).abs()).fold(0.0, f64::max)
    });
    let ratio = convergence_ratio(&sys, &x0, &params, &sched, 0.1).unwrap();
    eprintln!("step-halving error ratio {ratio:.2} (16 for fourth order)");
}
