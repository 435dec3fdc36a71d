//! Numeric evidence: fixed-step RK4 under piecewise-constant controls,
//! invariance and escape tests, Lie brackets and bracket ranks.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::{ControlAffineSystem, ControlSchedule, SchedulePiece};
use crate::flag::RANK_TOL;
use crate::forms::VectorField;
use crate::integrals::ZeroLocus;
use crate::kernel::{Assignment, CompiledExpr, CompiledVector, Domain, Expr, KernelError, Point, Symbol};
use crate::linalg::{independent_rows, numeric_rank};

/// Margin from declared constraints required of an initial state.
pub const START_MARGIN: f64 = 1e-6;
/// Relative invariance tolerance, scaled by `1 + arc length`.
pub const INVARIANCE_TOL: f64 = 1e-6;
pub const ESCAPE_THRESHOLD: f64 = 0.1;
pub const ESCAPE_HORIZON: f64 = 5.0;
pub const ESCAPE_STARTS: usize = 20;
pub const ESCAPE_RANDOM_CONTROLS: usize = 50;
/// Integration step of the escape search.
pub const ESCAPE_STEP: f64 = 1e-2;
pub const DEFAULT_BRACKET_DEPTH: usize = 4;
/// Tangency tolerance for bracket vectors on a leaf.
pub const TANGENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericError {
    #[error("vector field evaluation is singular at t = {t}: {msg}")]
    StepSingular { t: f64, msg: String },
    #[error("constraint `{constraint}` crosses zero at t = {t}")]
    DomainExit { t: f64, constraint: String },
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("initial state violates constraint `{0}`")]
    StartOutsideDomain(String),
    #[error("expected {expected} values for {what}, got {found}")]
    Arity { what: &'static str, expected: usize, found: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// States sampled on a uniform grid, with controls and monitored values.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub monitors: Vec<Vec<f64>>,
    pub schedule: ControlSchedule,
    pub params: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn arc_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .sum()
    }

    /// Largest `|rho_k|` over the samples, for monitor `k`.
    pub fn max_abs_monitor(&self, k: usize) -> f64 {
        self.monitors.iter().map(|v| v[k].abs()).fold(0.0, f64::max)
    }

    /// CSV with header `t,x1..xn,u1..um,rho1..rhod`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.controls.first().map_or(0, Vec::len);
        let d = self.monitors.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.extend((1..=d).map(|i| format!("rho{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{}", self.times[i]);
            for v in self.states[i].iter().chain(&self.controls[i]).chain(&self.monitors[i]) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// A system compiled for repeated numeric evaluation.
#[derive(Clone, Debug)]
pub struct Simulator {
    n: usize,
    drift: Option<CompiledVector>,
    controls: Vec<CompiledVector>,
    constraints: Vec<(CompiledExpr, String)>,
}

impl Simulator {
    pub fn new(sys: &ControlAffineSystem) -> Self {
        Simulator {
            n: sys.n(),
            drift: sys.has_drift().then(|| CompiledVector::new(&sys.drift)),
            controls: sys.controls.iter().map(|c| CompiledVector::new(&c.field)).collect(),
            constraints: sys.assume_nonzero.iter().map(|e| (CompiledExpr::new(e), e.to_string())).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.controls.len()
    }

    fn rhs(&self, x: &[f64], params: &[f64], u: &[f64]) -> Result<Vec<f64>, KernelError> {
        let at = Point::new(x, params);
        let mut out = match &self.drift {
            Some(f) => f.eval_at(&at)?,
            None => vec![0.0; self.n],
        };
        for (g, &uj) in self.controls.iter().zip(u) {
            if uj == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(g.eval_at(&at)?) {
                *o += v * uj;
            }
        }
        Ok(out)
    }

    fn rk4(&self, x: &[f64], params: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>, KernelError> {
        let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + s * k).collect() };
        let k1 = self.rhs(x, params, u)?;
        let k2 = self.rhs(&axpy(x, &k1, h / 2.0), params, u)?;
        let k3 = self.rhs(&axpy(x, &k2, h / 2.0), params, u)?;
        let k4 = self.rhs(&axpy(x, &k3, h), params, u)?;
        Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    fn constraint_signs(&self, x: &[f64], params: &[f64]) -> Vec<f64> {
        let at = Point::new(x, params);
        self.constraints.iter().map(|(c, _)| c.eval_at(&at).unwrap_or(0.0)).collect()
    }

    /// Integrate, returning the trajectory up to the failure if one occurs.
    /// Stops early once monitor 0 exceeds `stop_above` in magnitude.
    pub fn integrate(
        &self,
        x0: &[f64],
        params: &[f64],
        sched: &ControlSchedule,
        h: f64,
        monitors: &[CompiledExpr],
        stop_above: Option<f64>,
    ) -> (Trajectory, Option<NumericError>) {
        let mut traj = Trajectory {
            h,
            times: Vec::new(),
            states: Vec::new(),
            controls: Vec::new(),
            monitors: Vec::new(),
            schedule: sched.clone(),
            params: params.to_vec(),
        };
        let m = self.m();
        let eval_monitors = |x: &[f64]| -> Vec<f64> {
            let at = Point::new(x, params);
            monitors.iter().map(|c| c.eval_at(&at).unwrap_or(f64::NAN)).collect()
        };
        let first_control = sched.pieces.first().map_or_else(|| vec![0.0; m], |p| p.control.clone());
        let signs0 = self.constraint_signs(x0, params);
        let mut x = x0.to_vec();
        traj.times.push(0.0);
        traj.states.push(x.clone());
        traj.controls.push(first_control);
        traj.monitors.push(eval_monitors(&x));
        let mut elapsed = 0.0;
        let mut step = 0usize;
        for piece in &sched.pieces {
            elapsed += piece.duration;
            let end = (elapsed / h).round() as usize;
            while step < end {
                let t = (step + 1) as f64 * h;
                match self.rk4(&x, params, &piece.control, h) {
                    Ok(nx) => x = nx,
                    Err(e) => return (traj, Some(NumericError::StepSingular { t, msg: e.to_string() })),
                }
                step += 1;
                let signs = self.constraint_signs(&x, params);
                if let Some(k) = (0..signs.len()).find(|&k| signs[k] * signs0[k] <= 0.0) {
                    return (traj, Some(NumericError::DomainExit { t, constraint: self.constraints[k].1.clone() }));
                }
                traj.times.push(t);
                traj.states.push(x.clone());
                traj.controls.push(piece.control.clone());
                let mv = eval_monitors(&x);
                let stop = stop_above.is_some_and(|th| mv.first().is_some_and(|v| v.abs() > th));
                traj.monitors.push(mv);
                if stop {
                    return (traj, None);
                }
            }
        }
        (traj, None)
    }
}

/// Simulate `sys` from `x0` under `sched` with fixed step `h`.
pub fn simulate(
    sys: &ControlAffineSystem,
    x0: &[f64],
    params: &[f64],
    sched: &ControlSchedule,
    h: f64,
    monitors: &[Expr],
) -> Result<Trajectory, NumericError> {
    if !(h > 0.0) {
        return Err(NumericError::InvalidStep(h));
    }
    check_arity("initial state", sys.n(), x0.len())?;
    check_arity("parameters", sys.symbols.params.len(), params.len())?;
    for p in &sched.pieces {
        check_arity("control", sys.m(), p.control.len())?;
    }
    let at = Assignment::new(x0.to_vec(), params.to_vec());
    for c in &sys.assume_nonzero {
        if c.evaluate(&at).map_or(true, |v| v.abs() <= START_MARGIN) {
            return Err(NumericError::StartOutsideDomain(c.to_string()));
        }
    }
    let sim = Simulator::new(sys);
    let mons: Vec<CompiledExpr> = monitors.iter().map(CompiledExpr::new).collect();
    match sim.integrate(x0, params, sched, h, &mons, None) {
        (t, None) => Ok(t),
        (_, Some(e)) => Err(e),
    }
}

/// Step-halving ratio `|x_h - x_{h/2}| / |x_{h/2} - x_{h/4}|` of final
/// states; near 16 for a fourth-order method. Piece boundaries must lie on
/// the grid of `h / 4`.
pub fn convergence_ratio(
    sys: &ControlAffineSystem,
    x0: &[f64],
    params: &[f64],
    sched: &ControlSchedule,
    h: f64,
) -> Result<f64, NumericError> {
    let finals: Vec<Vec<f64>> = [h, h / 2.0, h / 4.0]
        .iter()
        .map(|&s| simulate(sys, x0, params, sched, s, &[]).map(|t| t.last().to_vec()))
        .collect::<Result<_, _>>()?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(dist(&finals[0], &finals[1]) / dist(&finals[1], &finals[2]))
}

fn check_arity(what: &'static str, expected: usize, found: usize) -> Result<(), NumericError> {
    if expected == found {
        Ok(())
    } else {
        Err(NumericError::Arity { what, expected, found })
    }
}

/// Random schedule: `pieces` controls from `[-1, 1]^m` with random
/// durations summing to `horizon`.
pub fn random_schedule<R: Rng>(rng: &mut R, m: usize, pieces: usize, horizon: f64) -> ControlSchedule {
    let weights: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    ControlSchedule::new(
        weights
            .iter()
            .map(|w| SchedulePiece { duration: horizon * w / total, control: (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect() })
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Held,
    Violated,
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub params: Vec<f64>,
    pub max_abs_rho: f64,
    pub arc_length: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Simulation error that ended the trial early.
    pub aborted: Option<String>,
}

impl TrialRecord {
    pub fn violated(&self) -> bool {
        !(self.max_abs_rho < self.tolerance)
    }
}

#[derive(Clone, Debug)]
pub struct InvarianceVerdict {
    pub max_abs_rho: f64,
    pub trials: Vec<TrialRecord>,
    pub verdict: Verdict,
    pub seed: u64,
    /// Trials for which no start on the zero locus was found.
    pub unstarted: usize,
}

impl InvarianceVerdict {
    pub fn aborted(&self) -> usize {
        self.trials.iter().filter(|t| t.aborted.is_some()).count()
    }
}

/// Parameters of an invariance test.
#[derive(Clone, Copy, Debug)]
pub struct TrialPlan {
    pub trials: usize,
    pub pieces: usize,
    pub horizon: f64,
    pub h: f64,
}

impl Default for TrialPlan {
    fn default() -> Self {
        TrialPlan { trials: 100, pieces: 10, horizon: 5.0, h: 1e-3 }
    }
}

/// Simulate random schedules from random points of `{rho = 0}` and record
/// the largest `|rho|` reached.
pub fn invariance_test(sys: &ControlAffineSystem, rho: &[Expr], plan: TrialPlan, seed: u64) -> InvarianceVerdict {
    let domain = sys.domain();
    let locus = ZeroLocus::new(rho, &domain);
    let sim = Simulator::new(sys);
    let mons: Vec<CompiledExpr> = rho.iter().map(CompiledExpr::new).collect();
    let results: Vec<Option<TrialRecord>> = (0..plan.trials)
        .into_par_iter()
        .map(|i| {
            let tseed = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(tseed);
            let p = locus.sample(&mut rng)?;
            let sched = random_schedule(&mut rng, sim.m(), plan.pieces, plan.horizon);
            let (traj, err) = sim.integrate(&p.states, &p.params, &sched, plan.h, &mons, None);
            let max_abs_rho = (0..mons.len()).map(|k| traj.max_abs_monitor(k)).fold(0.0, f64::max);
            let arc_length = traj.arc_length();
            Some(TrialRecord {
                index: i,
                seed: tseed,
                x0: p.states,
                params: p.params,
                max_abs_rho,
                arc_length,
                tolerance: INVARIANCE_TOL * (1.0 + arc_length),
                samples: traj.len(),
                aborted: err.map(|e| e.to_string()),
            })
        })
        .collect();
    let unstarted = results.iter().filter(|r| r.is_none()).count();
    let trials: Vec<TrialRecord> = results.into_iter().flatten().collect();
    let max_abs_rho = trials.iter().map(|t| t.max_abs_rho).fold(0.0, f64::max);
    let verdict = if trials.iter().any(TrialRecord::violated) { Verdict::Violated } else { Verdict::Held };
    InvarianceVerdict { max_abs_rho, trials, verdict, seed, unstarted }
}

/// A constant control driving `|rho|` above the escape threshold.
#[derive(Clone, Debug)]
pub struct Escape {
    pub x0: Vec<f64>,
    pub params: Vec<f64>,
    pub schedule: ControlSchedule,
    pub time: f64,
    pub value: f64,
}

/// Search single-piece controls `{0, ±e_j}` and random values from
/// zero-locus starts for one that leaves `{rho = 0}`.
pub fn escape_test(sys: &ControlAffineSystem, rho: &Expr, seed: u64) -> Option<Escape> {
    let domain = sys.domain();
    let locus = ZeroLocus::new(std::slice::from_ref(rho), &domain);
    let sim = Simulator::new(sys);
    let m = sim.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut controls: Vec<Vec<f64>> = vec![vec![0.0; m]];
    for j in 0..m {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; m];
            u[j] = s;
            controls.push(u);
        }
    }
    for _ in 0..ESCAPE_RANDOM_CONTROLS {
        controls.push((0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect());
    }
    let mon = [CompiledExpr::new(rho)];
    for _ in 0..ESCAPE_STARTS {
        let Some(p) = locus.sample(&mut rng) else { continue };
        for u in &controls {
            let sched = ControlSchedule::constant(u.clone(), ESCAPE_HORIZON);
            let (traj, _) = sim.integrate(&p.states, &p.params, &sched, ESCAPE_STEP, &mon, Some(ESCAPE_THRESHOLD));
            let k = traj.monitors.iter().position(|v| v[0].abs() > ESCAPE_THRESHOLD);
            if let Some(k) = k {
                return Some(Escape {
                    x0: p.states.clone(),
                    params: p.params.clone(),
                    schedule: sched,
                    time: traj.times[k],
                    value: traj.monitors[k][0],
                });
            }
        }
    }
    None
}

/// `[X, Y]_i = sum_k X_k dY_i/dx_k - Y_k dX_i/dx_k`.
pub fn lie_bracket(x: &VectorField, y: &VectorField, coords: &[Symbol]) -> VectorField {
    let n = coords.len();
    VectorField::new((0..n).map(|i| &x.apply(coords, &y.0[i]) - &y.apply(coords, &x.0[i])).collect())
}

/// A field together with its bracket expression, e.g. `[g1,[g1,g2]]`.
#[derive(Clone, Debug)]
pub struct LabelledField {
    pub label: String,
    pub field: VectorField,
}

/// Left iterated brackets `[X_i1, [X_i2, ... X_ik]]` up to `depth`, skipping
/// zero and repeated fields.
pub fn bracket_table(fields: &[LabelledField], coords: &[Symbol], depth: usize) -> Vec<Vec<LabelledField>> {
    let mut levels: Vec<Vec<LabelledField>> = vec![fields.to_vec()];
    let mut seen: Vec<VectorField> = fields.iter().map(|f| f.field.clone()).collect();
    for _ in 1..depth {
        let prev = levels.last().expect("nonempty");
        let mut next = Vec::new();
        for a in fields {
            for b in prev {
                let v = lie_bracket(&a.field, &b.field, coords);
                if v.is_zero() {
                    continue;
                }
                let neg = VectorField::new(v.0.iter().map(|e| -e).collect());
                if seen.contains(&v) || seen.contains(&neg) {
                    continue;
                }
                seen.push(v.clone());
                next.push(LabelledField { label: format!("[{},{}]", a.label, b.label), field: v });
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    levels
}

fn eval_field(f: &VectorField, p: &Assignment) -> Result<Vec<f64>, KernelError> {
    f.0.iter().map(|e| e.evaluate(p)).collect()
}

/// Numeric rank at `p` of the iterated brackets up to `depth`, stopping
/// once the rank reaches `target`.
pub fn bracket_rank_to(fields: &[LabelledField], coords: &[Symbol], p: &Assignment, depth: usize, target: usize) -> Result<(usize, Vec<Vec<f64>>), KernelError> {
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut rank = 0;
    let mut level: Vec<LabelledField> = fields.to_vec();
    for k in 0..depth.max(1) {
        if k > 0 {
            let mut next = Vec::new();
            for a in fields {
                for b in &level {
                    let v = lie_bracket(&a.field, &b.field, coords);
                    if !v.is_zero() {
                        next.push(LabelledField { label: format!("[{},{}]", a.label, b.label), field: v });
                    }
                }
            }
            level = next;
        }
        for f in &level {
            vectors.push(eval_field(&f.field, p)?);
        }
        rank = numeric_rank(&vectors, RANK_TOL);
        if rank >= target || level.is_empty() {
            break;
        }
    }
    Ok((rank, vectors))
}

/// Numeric rank at `p` of the iterated brackets of `fields` up to `depth`.
pub fn bracket_rank(fields: &[VectorField], coords: &[Symbol], p: &Assignment, depth: usize) -> Result<usize, KernelError> {
    let labelled = label_fields(fields);
    bracket_rank_to(&labelled, coords, p, depth, coords.len()).map(|r| r.0)
}

pub fn label_fields(fields: &[VectorField]) -> Vec<LabelledField> {
    fields.iter().enumerate().map(|(i, f)| LabelledField { label: format!("X{}", i + 1), field: f.clone() }).collect()
}

/// Named fields of a system: `f` when nonzero, then the controls.
pub fn system_fields(sys: &ControlAffineSystem) -> Vec<LabelledField> {
    let mut out = Vec::new();
    if sys.has_drift() {
        out.push(LabelledField { label: "f".into(), field: VectorField::new(sys.drift.clone()) });
    }
    for c in &sys.controls {
        out.push(LabelledField { label: c.name.clone(), field: VectorField::new(c.field.clone()) });
    }
    out
}

/// Bracket-generating check restricted to a leaf `{rho = c}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafControllability {
    pub point: Vec<f64>,
    pub rank: usize,
    pub leaf_dimension: usize,
    pub tangent: bool,
    pub controllable: bool,
}

/// Rank of the brackets at `p` on the leaf through `p` of `rho`, and whether
/// every bracket vector is tangent to it.
pub fn leaf_controllability(
    fields: &[LabelledField],
    coords: &[Symbol],
    rho: &[Expr],
    p: &Assignment,
    depth: usize,
) -> Result<LeafControllability, KernelError> {
    let leaf_dimension = coords.len() - rho.len();
    let (rank, vectors) = bracket_rank_to(fields, coords, p, depth, leaf_dimension)?;
    let grads: Vec<Vec<f64>> = rho
        .iter()
        .map(|r| coords.iter().map(|s| r.differentiate(s).and_then(|d| d.evaluate(p))).collect())
        .collect::<Result<_, _>>()?;
    let tangent = vectors.iter().all(|v| {
        let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
        grads.iter().all(|g| {
            let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
            g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs() <= TANGENCY_TOL * vn * gn
        })
    });
    Ok(LeafControllability { point: p.states.clone(), rank, leaf_dimension, tangent, controllable: rank >= leaf_dimension && tangent })
}

/// Type `(nu, rank)` of the distribution flag `D ⊂ D + [D, D] ⊂ ...` from
/// numeric ranks at random points.
pub fn distribution_type(fields: &[VectorField], coords: &[Symbol], domain: &Domain, seed: u64) -> Result<(usize, usize), KernelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Assignment> = (0..5).map(|_| domain.sample(&mut rng)).collect();
    let rank_of = |fs: &[VectorField]| -> Result<usize, KernelError> {
        let mut best = 0;
        for p in &pts {
            let rows: Vec<Vec<f64>> = fs.iter().map(|f| eval_field(f, p)).collect::<Result<_, _>>()?;
            best = best.max(numeric_rank(&rows, RANK_TOL));
        }
        Ok(best)
    };
    let basis_of = |fs: &[VectorField]| -> Result<Vec<VectorField>, KernelError> {
        let rows: Vec<Vec<f64>> = fs.iter().map(|f| eval_field(f, &pts[0])).collect::<Result<_, _>>()?;
        Ok(independent_rows(&rows, RANK_TOL).into_iter().map(|i| fs[i].clone()).collect())
    };
    let mut current: Vec<VectorField> = fields.iter().filter(|f| !f.is_zero()).cloned().collect();
    let mut rank = rank_of(&current)?;
    let mut nu = 0;
    loop {
        let basis = basis_of(&current)?;
        let mut next = basis.clone();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                next.push(lie_bracket(&basis[i], &basis[j], coords));
            }
        }
        let r = rank_of(&next)?;
        if r == rank {
            return Ok((nu, rank));
        }
        nu += 1;
        rank = r;
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_system;

    const EX3: &str = "states: x y z w\nparams: a > 0, b > 0\ncontrol g1: [a*cos(w), sin(w), b*cos(w), 0]\ncontrol g2: [0, 0, 0, 1]\nassume_nonzero: cos(w)\n";

    #[test]
    fn bracket_of_slanted_plane_fields() {
        let sys = parse_system(EX3).unwrap();
        let g = system_fields(&sys);
        let b = lie_bracket(&g[0].field, &g[1].field, &sys.symbols.states);
        let want: Vec<Expr> = ["a*sin(w)", "-cos(w)", "b*sin(w)", "0"].iter().map(|s| sys.parse_expr(s).unwrap()).collect();
        assert_eq!(b.0, want);
    }

    #[test]
    fn straight_line_motion() {
        let sys = parse_system(EX3).unwrap();
        let sched = ControlSchedule::constant(vec![1.0, 0.0], 1.0);
        let rho = sys.parse_expr("b*x - a*z").unwrap();
        let t = simulate(&sys, &[0.0; 4], &[1.0, 1.0], &sched, 1e-3, &[rho]).unwrap();
        assert_eq!(t.len(), 1001);
        let last = t.last();
        assert!((last[0] - 1.0).abs() < 1e-12 && (last[2] - 1.0).abs() < 1e-12);
        assert!(t.max_abs_monitor(0) < 1e-10);
        assert!(t.to_csv().starts_with("t,x1,x2,x3,x4,u1,u2,rho1\n"));
    }

    #[test]
    fn zero_horizon_has_one_sample() {
        let sys = parse_system(EX3).unwrap();
        let t = simulate(&sys, &[0.1, 0.0, 0.0, 0.0], &[1.0, 2.0], &ControlSchedule::default(), 1e-3, &[]).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn domain_exit_is_reported() {
        let sys = parse_system(EX3).unwrap();
        let sched = ControlSchedule::constant(vec![0.0, 1.0], 3.0);
        let e = simulate(&sys, &[0.0; 4], &[1.0, 1.0], &sched, 1e-2, &[]).unwrap_err();
        assert!(matches!(e, NumericError::DomainExit { .. }));
    }

    #[test]
    fn distribution_type_of_slanted_plane() {
        let sys = parse_system(EX3).unwrap();
        let fields: Vec<VectorField> = system_fields(&sys).into_iter().map(|f| f.field).collect();
        assert_eq!(distribution_type(&fields, &sys.symbols.states, &sys.domain(), 1).unwrap(), (1, 3));
    }
}
