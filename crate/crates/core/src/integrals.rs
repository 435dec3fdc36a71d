//! First integrals from the terminal integrable system, generalized first
//! integral candidates from torsion minors, and the membership test
//! `d rho ∈ (rho, theta)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flag::{PfaffianFlag, PfaffianSystem, TorsionMatrix, RANK_TOL};
use crate::forms::{Coords, DifferentialForm, FormsError, VectorField};
use crate::kernel::{factor_poly, gcd, Assignment, CompiledExpr, CompiledVector, Domain, Expr, Point, Poly, Symbol};
use crate::linalg::{determinant, numeric_rank, solve};

/// Residual below which a zero-locus point is accepted.
pub const LOCUS_RESIDUAL: f64 = 1e-10;
/// Damped Newton steps when projecting onto the zero locus.
pub const NEWTON_STEPS: usize = 20;
/// Threshold for the numeric membership fallback.
pub const NUMERIC_MEMBERSHIP_TOL: f64 = 1e-8;
/// Zero-locus points used by the numeric membership fallback.
pub const NUMERIC_MEMBERSHIP_POINTS: usize = 50;
/// Zero-locus points used by the non-degeneracy check.
pub const NONDEGENERACY_POINTS: usize = 20;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IntegralError {
    #[error("form is not closed: d(omega) = {0}")]
    NotClosed(String),
    #[error("minor `{minor}` has denominator `{denominator}` that is not certified nonzero")]
    NotPolynomial { minor: String, denominator: String },
    #[error(transparent)]
    Forms(#[from] FormsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Classification {
    FirstIntegral,
    GeneralizedFirstIntegral,
    Rejected,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    FromFlag,
    FromTorsionMinors,
    UserDeclared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureReason {
    NonDegeneracyFailure,
    NotInIdeal,
}

/// `d rho^mu = sum_l multipliers[mu][l] theta^l + sum_nu rho^nu quotients[mu][nu]`.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub multipliers: Vec<Vec<Expr>>,
    pub quotients: Vec<Vec<DifferentialForm>>,
}

#[derive(Clone, Debug)]
pub enum Evidence {
    /// `rho` is a potential of a closed combination of terminal generators.
    Potential { form: DifferentialForm },
    /// `d rho^mu` lies in the span of the generators.
    Exact { multipliers: Vec<Vec<Expr>> },
    Membership(Certificate),
    Failure {
        reason: FailureReason,
        component: usize,
        differential: Option<String>,
        coefficient: Option<Expr>,
        /// Sample where the failing quantity is visibly nonzero.
        witness: Option<Vec<f64>>,
    },
    /// Coefficients vanish numerically on the zero locus without a proof.
    Numeric { max_abs: f64, points: usize, coefficient: Expr },
    /// A terminal generator that no tried combination integrated.
    Defect { form: DifferentialForm, defect: DifferentialForm },
    /// The zero locus was not found in the sampling box.
    EmptyLocus,
}

#[derive(Clone, Debug)]
pub struct CandidateIntegral {
    pub rho: Vec<Expr>,
    pub classification: Classification,
    pub evidence: Evidence,
    pub provenance: Provenance,
}

// ---------------------------------------------------------------------------
// Antiderivatives

struct Antiderivative {
    x: Poly,
    s: Poly,
    c: Poly,
    memo: HashMap<(u32, u32, u32), Poly>,
}

impl Antiderivative {
    fn new(v: &Symbol) -> Self {
        Antiderivative {
            x: Poly::symbol(v.clone()),
            s: Poly::symbol(v.sin()),
            c: Poly::symbol(v.cos()),
            memo: HashMap::new(),
        }
    }

    fn q(a: i64, b: i64) -> num_rational::BigRational {
        num_rational::BigRational::new(a.into(), b.into())
    }

    /// `∫ x^k sin(x)^e cos(x)^j dx` for `e <= 1`.
    fn integral(&mut self, k: u32, e: u32, j: u32) -> Poly {
        if let Some(p) = self.memo.get(&(k, e, j)) {
            return p.clone();
        }
        let out = if e == 1 {
            // -x^k cos^(j+1)/(j+1) + k/(j+1) ∫ x^(k-1) cos^(j+1)
            let mut r = self.x.pow(k).mul(&self.c.pow(j + 1)).scale(&Self::q(-1, i64::from(j) + 1));
            if k > 0 {
                let inner = self.integral(k - 1, 0, j + 1);
                r = r.add(&inner.scale(&Self::q(i64::from(k), i64::from(j) + 1)));
            }
            r
        } else if j == 0 {
            self.x.pow(k + 1).scale(&Self::q(1, i64::from(k) + 1))
        } else {
            // j J(k,j) = x^k cos^(j-1) sin - k S(k-1, j-1) + (j-1) J(k, j-2)
            let mut r = self.x.pow(k).mul(&self.c.pow(j - 1)).mul(&self.s);
            if k > 0 {
                let inner = self.integral(k - 1, 1, j - 1);
                r = r.sub(&inner.scale(&Self::q(i64::from(k), 1)));
            }
            if j >= 2 {
                let inner = self.integral(k, 0, j - 2);
                r = r.add(&inner.scale(&Self::q(i64::from(j) - 1, 1)));
            }
            r.scale(&Self::q(1, i64::from(j)))
        };
        let out = out.reduce_trig();
        self.memo.insert((k, e, j), out.clone());
        out
    }
}

/// Antiderivative in the state `v`, when the denominator does not involve `v`.
pub fn antiderivative(e: &Expr, v: &Symbol) -> Option<Expr> {
    let (sin, cos) = (v.sin(), v.cos());
    let den = e.denom();
    if den.contains(v) || den.contains(&sin) || den.contains(&cos) {
        return None;
    }
    let mut ad = Antiderivative::new(v);
    let mut acc = Poly::zero();
    for (m, c) in e.numer().terms() {
        let (k, rest) = m.split(v);
        let (es, rest) = rest.split(&sin);
        let (j, rest) = rest.split(&cos);
        if es > 1 {
            return None;
        }
        let part = ad.integral(k, es, j);
        acc = acc.add(&part.mul_term(&rest, c));
    }
    Expr::from_parts(acc.reduce_trig(), den.clone()).ok()
}

/// Potential of a closed 1-form by successive partial integration, shifted
/// to vanish at the origin when it is defined there. `None` when some
/// antiderivative leaves the expression class.
pub fn poincare_integrate(omega: &DifferentialForm) -> Result<Option<Expr>, IntegralError> {
    let dw = omega.d();
    if !dw.is_zero() {
        return Err(IntegralError::NotClosed(dw.to_string()));
    }
    let coords = omega.coords().clone();
    let mut rho = Expr::zero();
    for (i, v) in coords.iter().enumerate() {
        let residual = omega.sub(&DifferentialForm::exact(coords.clone(), &rho));
        let c = residual.coefficient(&[i]);
        if c.is_zero() {
            continue;
        }
        let Some(f) = antiderivative(&c, v) else { return Ok(None) };
        rho = &rho + &f;
    }
    if !omega.sub(&DifferentialForm::exact(coords.clone(), &rho)).is_zero() {
        return Ok(None);
    }
    let mut base = Ok(rho.clone());
    for v in coords.iter() {
        base = base.and_then(|b: Expr| b.at_zero(v));
    }
    if let Ok(b) = base {
        rho = &rho - &b;
    }
    Ok(Some(rho))
}

// ---------------------------------------------------------------------------
// Zero-locus sampling

/// Sampler for points of `{rho = 0}` inside the working domain.
pub struct ZeroLocus {
    domain: Domain,
    values: Vec<CompiledExpr>,
    grads: Vec<CompiledVector>,
    /// `(state, a, b)` with `rho = a x_state + b` up to a nonvanishing
    /// denominator.
    linear: Option<(usize, CompiledExpr, CompiledExpr)>,
}

const LOCUS_BOX: f64 = 4.0;
const LOCUS_ATTEMPTS: usize = 400;

impl ZeroLocus {
    pub fn new(rho: &[Expr], domain: &Domain) -> Self {
        let states = &domain.states;
        let values = rho.iter().map(CompiledExpr::new).collect();
        let grads = rho
            .iter()
            .map(|r| {
                let g: Vec<Expr> = states.iter().map(|s| r.differentiate(s).expect("state")).collect();
                CompiledVector::new(&g)
            })
            .collect();
        let linear = if rho.len() == 1 { Self::linear_variable(&rho[0], states) } else { None };
        ZeroLocus { domain: domain.clone(), values, grads, linear }
    }

    fn linear_variable(r: &Expr, states: &[Symbol]) -> Option<(usize, CompiledExpr, CompiledExpr)> {
        let mut fallback = None;
        for (i, v) in states.iter().enumerate() {
            let num = r.numer();
            let den = r.denom();
            let trig = |p: &Poly| p.contains(&v.sin()) || p.contains(&v.cos());
            if num.degree_in(v) != 1 || trig(num) || den.contains(v) || trig(den) {
                continue;
            }
            let cs = num.coeffs_in(v);
            let b = Expr::from_poly(cs[0].clone());
            let a = Expr::from_poly(cs[1].clone());
            let entry = (i, CompiledExpr::new(&a), CompiledExpr::new(&b));
            if a.is_constant() || a.symbols().iter().all(|s| !s.is_state() && !s.is_trig()) {
                return Some(entry);
            }
            if fallback.is_none() {
                fallback = Some(entry);
            }
        }
        fallback
    }

    fn residual(&self, states: &[f64], params: &[f64]) -> Option<Vec<f64>> {
        let at = Point::new(states, params);
        self.values.iter().map(|v| v.eval_at(&at).ok()).collect()
    }

    fn accept(&self, states: Vec<f64>, params: &[f64]) -> Option<Assignment> {
        if states.iter().any(|v| !v.is_finite() || v.abs() > LOCUS_BOX) {
            return None;
        }
        let r = self.residual(&states, params)?;
        if r.iter().any(|v| v.abs() > LOCUS_RESIDUAL) {
            return None;
        }
        let p = Assignment::new(states, params.to_vec());
        self.domain.admits(&p).then_some(p)
    }

    fn newton(&self, mut x: Vec<f64>, params: &[f64]) -> Option<Vec<f64>> {
        let d = self.values.len();
        let n = x.len();
        for _ in 0..NEWTON_STEPS {
            let r = self.residual(&x, params)?;
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= LOCUS_RESIDUAL {
                return Some(x);
            }
            let at = Point::new(&x, params);
            let mut j = DMatrix::zeros(d, n);
            for (row, g) in self.grads.iter().enumerate() {
                let gv = g.eval_at(&at).ok()?;
                for (c, v) in gv.into_iter().enumerate() {
                    j[(row, c)] = v;
                }
            }
            let step = j.clone().pseudo_inverse(1e-12).ok()? * DVector::from_vec(r);
            let mut lambda = 1.0;
            let mut moved = false;
            for _ in 0..8 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
                if let Some(tr) = self.residual(&trial, params) {
                    if tr.iter().map(|v| v * v).sum::<f64>().sqrt() < norm {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !moved {
                return None;
            }
        }
        let r = self.residual(&x, params)?;
        r.iter().all(|v| v.abs() <= LOCUS_RESIDUAL).then_some(x)
    }

    /// One point of the zero locus for the given parameter values.
    pub fn sample_with<R: Rng>(&self, rng: &mut R, params: &[f64]) -> Option<Assignment> {
        for _ in 0..LOCUS_ATTEMPTS {
            let start = self.domain.sample_states(rng, params).states;
            let candidate = match &self.linear {
                Some((i, a, b)) => {
                    let at = Point::new(&start, params);
                    let (av, bv) = (a.eval_at(&at).ok()?, b.eval_at(&at).ok()?);
                    if av.abs() < 1e-9 {
                        continue;
                    }
                    let mut s = start.clone();
                    // `+ 0.0` turns a negative zero positive.
                    s[*i] = -bv / av + 0.0;
                    Some(s)
                }
                None => self.newton(start, params),
            };
            if let Some(p) = candidate.and_then(|s| self.accept(s, params)) {
                return Some(p);
            }
        }
        None
    }

    /// One point with freshly drawn parameters.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Option<Assignment> {
        let params = self.domain.sample_params(rng);
        self.sample_with(rng, &params)
    }

    pub fn samples(&self, count: usize, seed: u64) -> Vec<Assignment> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).filter_map(|_| self.sample(&mut rng)).collect()
    }

    /// Numeric rank of the gradients at `p`.
    pub fn gradient_rank(&self, p: &Assignment) -> Option<usize> {
        let at = Point::new(&p.states, &p.params);
        let rows: Option<Vec<Vec<f64>>> = self.grads.iter().map(|g| g.eval_at(&at).ok()).collect();
        rows.map(|r| numeric_rank(&r, RANK_TOL))
    }
}

/// Outcome of the non-degeneracy check on sampled zero-locus points.
enum Degeneracy {
    Ok,
    Fails(Vec<f64>),
    NoPoints,
}

fn nondegenerate(rho: &[Expr], domain: &Domain, seed: u64) -> Degeneracy {
    let locus = ZeroLocus::new(rho, domain);
    let pts = locus.samples(NONDEGENERACY_POINTS, seed);
    if pts.is_empty() {
        return Degeneracy::NoPoints;
    }
    for p in &pts {
        if locus.gradient_rank(p) != Some(rho.len()) {
            return Degeneracy::Fails(p.states.clone());
        }
    }
    Degeneracy::Ok
}

// ---------------------------------------------------------------------------
// Candidates from torsion minors

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Candidate systems found in the torsion minors.
#[derive(Clone, Debug, Default)]
pub struct CandidateSet {
    /// Non-degenerate candidates, each a system `rho^1..rho^d`.
    pub candidates: Vec<Vec<Expr>>,
    /// Factors discarded because `d rho` degenerates on their zero locus or
    /// the locus was not found.
    pub degenerate: Vec<Vec<Expr>>,
    /// Denominators cleared from the minors.
    pub cleared: Vec<Expr>,
}

fn normalize_factor(p: &Poly) -> Expr {
    Expr::from_poly(p.integer_primitive().1)
}

/// Default bound on the number of functions in a candidate system.
pub fn default_dmax(s: usize) -> usize {
    s.min(3)
}

/// Common non-degenerate factors of all nonzero minors of size `s - d + 1`,
/// for `d = 1..min(dmax, s)`.
pub fn gfi_candidates(t: &TorsionMatrix, s: usize, dmax: usize, domain: &Domain, seed: u64) -> Result<CandidateSet, IntegralError> {
    let mut out = CandidateSet::default();
    if t.is_zero() {
        return Ok(out);
    }
    let cols = t.columns.len();
    for d in 1..=dmax.min(s) {
        let k = s - d + 1;
        let mut g = Poly::zero();
        let mut any = false;
        for rows in subsets(s, k) {
            for cset in subsets(cols, k) {
                let block: Vec<Vec<Expr>> = rows.iter().map(|&r| cset.iter().map(|&c| t.entries[r][c].clone()).collect()).collect();
                let det = determinant(&block);
                if det.is_zero() {
                    continue;
                }
                if !det.is_polynomial() {
                    let den = Expr::from_poly(det.denom().clone());
                    if !domain.certified_nonzero(&den) {
                        return Err(IntegralError::NotPolynomial { minor: det.to_string(), denominator: den.to_string() });
                    }
                    if !out.cleared.contains(&den) {
                        out.cleared.push(den);
                    }
                }
                any = true;
                g = gcd(&g, det.numer());
            }
        }
        if !any || g.is_constant() {
            continue;
        }
        let Ok(fac) = factor_poly(&g) else { continue };
        let mut factors: Vec<Expr> = Vec::new();
        for (f, _) in &fac.factors {
            let e = normalize_factor(f);
            if !e.depends_on_state() || domain.certified_nonzero(&e) || factors.contains(&e) {
                continue;
            }
            factors.push(e);
        }
        for combo in subsets(factors.len(), d) {
            let sys: Vec<Expr> = combo.iter().map(|&i| factors[i].clone()).collect();
            match nondegenerate(&sys, domain, seed) {
                Degeneracy::Ok => out.candidates.push(sys),
                _ => out.degenerate.push(sys),
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Membership

fn multipliers(theta: &PfaffianSystem, drho: &DifferentialForm) -> Vec<Expr> {
    let m = theta.coefficient_matrix();
    let piv = theta.pivots();
    let bt: Vec<Vec<Expr>> = piv.iter().map(|&p| m.iter().map(|row| row[p].clone()).collect()).collect();
    let r: Vec<Expr> = piv.iter().map(|&p| drho.coefficient(&[p])).collect();
    solve(&bt, &r).expect("pivot block is nonsingular")
}

fn differential_name(coords: &Coords, i: usize) -> String {
    format!("d{}", coords[i].name())
}

/// Largest value of `|e|` over zero-locus points, and the number of points used.
fn locus_max(e: &Expr, locus: &ZeroLocus, seed: u64, count: usize) -> (f64, usize, Option<Vec<f64>>) {
    let c = CompiledExpr::new(e);
    let pts = locus.samples(count, seed);
    let mut worst = 0.0f64;
    let mut at = None;
    for p in &pts {
        let v = c.eval(&p.states, &p.params).map(f64::abs).unwrap_or(f64::INFINITY);
        if v > worst {
            worst = v;
            at = Some(p.states.clone());
        }
    }
    (worst, pts.len(), at)
}

/// Decide `d rho^mu ∈ (rho, theta)` for every `mu`.
pub fn check_membership(
    rho: &[Expr],
    theta: &PfaffianSystem,
    domain: &Domain,
    provenance: Provenance,
    seed: u64,
) -> Result<CandidateIntegral, IntegralError> {
    let make = |classification, evidence| CandidateIntegral { rho: rho.to_vec(), classification, evidence, provenance };
    match nondegenerate(rho, domain, seed) {
        Degeneracy::Ok => {}
        Degeneracy::Fails(w) => {
            return Ok(make(
                Classification::Rejected,
                Evidence::Failure {
                    reason: FailureReason::NonDegeneracyFailure,
                    component: 0,
                    differential: None,
                    coefficient: None,
                    witness: Some(w),
                },
            ))
        }
        Degeneracy::NoPoints => return Ok(make(Classification::Undetermined, Evidence::EmptyLocus)),
    }
    let coords = theta.coords().clone();
    let reducer = if theta.rank() > 0 { Some(theta.reducer(domain, seed)?) } else { None };
    let drho: Vec<DifferentialForm> = rho.iter().map(|r| DifferentialForm::exact(coords.clone(), r)).collect();
    let reduced: Vec<DifferentialForm> =
        drho.iter().map(|f| reducer.as_ref().map_or_else(|| f.clone(), |r| r.reduce(f))).collect();
    let mults: Vec<Vec<Expr>> = drho.iter().map(|f| if theta.rank() > 0 { multipliers(theta, f) } else { Vec::new() }).collect();
    if reduced.iter().all(DifferentialForm::is_zero) {
        return Ok(make(Classification::FirstIntegral, Evidence::Exact { multipliers: mults }));
    }
    let locus = ZeroLocus::new(rho, domain);
    let mut quotients: Vec<Vec<DifferentialForm>> = Vec::new();
    for (mu, red) in reduced.iter().enumerate() {
        let mut qs: Vec<DifferentialForm> = vec![DifferentialForm::zero(coords.clone(), 1); rho.len()];
        for (idx, c) in red.terms() {
            let i = idx[0];
            match divide_sequential(c, rho) {
                Some(parts) => {
                    for (nu, q) in parts.into_iter().enumerate() {
                        qs[nu] = qs[nu].add(&DifferentialForm::basis(coords.clone(), i).scale(&q));
                    }
                }
                None => {
                    let (max_abs, points, witness) = locus_max(c, &locus, seed, NUMERIC_MEMBERSHIP_POINTS);
                    if points > 0 && max_abs < NUMERIC_MEMBERSHIP_TOL {
                        return Ok(make(
                            Classification::Undetermined,
                            Evidence::Numeric { max_abs, points, coefficient: c.clone() },
                        ));
                    }
                    return Ok(make(
                        Classification::Rejected,
                        Evidence::Failure {
                            reason: FailureReason::NotInIdeal,
                            component: mu,
                            differential: Some(differential_name(&coords, i)),
                            coefficient: Some(c.clone()),
                            witness,
                        },
                    ));
                }
            }
        }
        quotients.push(qs);
    }
    Ok(make(Classification::GeneralizedFirstIntegral, Evidence::Membership(Certificate { multipliers: mults, quotients })))
}

/// Write `c = sum_nu rho^nu q_nu` by dividing successively by each `rho^nu`.
fn divide_sequential(c: &Expr, rho: &[Expr]) -> Option<Vec<Expr>> {
    if rho.len() == 1 {
        return c.divide_exact(&rho[0]).map(|q| vec![q]);
    }
    let mut rem = c.numer().clone();
    let mut out = Vec::new();
    for r in rho {
        let (q, rr) = rem.div_rem(r.numer());
        out.push(Expr::from_parts(q.mul(r.denom()), c.denom().clone()).ok()?);
        rem = rr;
    }
    rem.is_zero().then_some(out)
}

/// `X rho` for each field; all zero for a first integral.
pub fn annihilation(rho: &Expr, coords: &[Symbol], fields: &[Vec<Expr>]) -> Vec<Expr> {
    fields.iter().map(|f| VectorField::new(f.clone()).apply(coords, rho)).collect()
}

// ---------------------------------------------------------------------------
// First integrals from the flag

fn closed_variants(g: &DifferentialForm) -> Vec<DifferentialForm> {
    let mut out = vec![g.clone()];
    for (_, c) in g.terms() {
        if c.is_constant() {
            continue;
        }
        if let Ok(inv) = Expr::one().checked_div(c) {
            let v = g.scale(&inv);
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

const PAIR_LAMBDAS: [(i64, i64); 6] = [(1, 1), (-1, 1), (2, 1), (-2, 1), (1, 2), (-1, 2)];

/// Integrate closed terminal generators (and constant pairs of them).
pub fn first_integrals(flag: &PfaffianFlag, fields: &[Vec<Expr>], seed: u64) -> Vec<CandidateIntegral> {
    let term = flag.terminal();
    let q = term.rank();
    let gens = term.generators();
    let coords = term.coords().clone();
    let mut found: Vec<CandidateIntegral> = Vec::new();
    let mut used = vec![false; gens.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = flag.domain.sample(&mut rng);

    let try_form = |form: &DifferentialForm, found: &mut Vec<CandidateIntegral>| -> bool {
        if found.len() >= q || !form.d().is_zero() {
            return false;
        }
        let Ok(Some(rho)) = poincare_integrate(form) else { return false };
        if !rho.depends_on_state() || annihilation(&rho, &coords, fields).iter().any(|e| !e.is_zero()) {
            return false;
        }
        let mut grads: Vec<Vec<f64>> = found
            .iter()
            .chain(std::iter::once(&CandidateIntegral {
                rho: vec![rho.clone()],
                classification: Classification::FirstIntegral,
                evidence: Evidence::EmptyLocus,
                provenance: Provenance::FromFlag,
            }))
            .filter_map(|c| {
                coords.iter().map(|s| c.rho[0].differentiate(s).ok()?.evaluate(&probe).ok()).collect()
            })
            .collect();
        grads.dedup();
        if numeric_rank(&grads, RANK_TOL) < found.len() + 1 {
            return false;
        }
        found.push(CandidateIntegral {
            rho: vec![rho],
            classification: Classification::FirstIntegral,
            evidence: Evidence::Potential { form: form.clone() },
            provenance: Provenance::FromFlag,
        });
        true
    };

    for (i, g) in gens.iter().enumerate() {
        for v in closed_variants(g) {
            if try_form(&v, &mut found) {
                used[i] = true;
                break;
            }
        }
    }
    for i in 0..gens.len() {
        for j in 0..gens.len() {
            if i == j || used[i] || found.len() >= q {
                continue;
            }
            for (a, b) in PAIR_LAMBDAS {
                let lam = Expr::rational(num_rational::BigRational::new(a.into(), b.into()));
                let form = gens[i].add(&gens[j].scale(&lam));
                if try_form(&form, &mut found) {
                    used[i] = true;
                    break;
                }
            }
        }
    }
    for (i, g) in gens.iter().enumerate() {
        if !used[i] && found.iter().filter(|c| c.classification == Classification::FirstIntegral).count() < q {
            found.push(CandidateIntegral {
                rho: Vec::new(),
                classification: Classification::Undetermined,
                evidence: Evidence::Defect { form: g.clone(), defect: g.d() },
                provenance: Provenance::FromFlag,
            });
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expr, parse_system, SymbolTable};
    use crate::flag::derived_flag;
    use crate::kernel::Sign;

    fn table() -> SymbolTable {
        SymbolTable::new(&["x", "y", "z", "w"], &[("a", Sign::Positive), ("b", Sign::Positive)])
    }

    fn form(t: &SymbolTable, parts: &[&str]) -> DifferentialForm {
        let v: Vec<Expr> = parts.iter().map(|s| parse_expr(s, t).unwrap()).collect();
        DifferentialForm::one_form(t.states.clone().into(), &v)
    }

    #[test]
    fn integrates_closed_forms() {
        let t = table();
        let e = |s: &str| parse_expr(s, &t).unwrap();
        assert_eq!(poincare_integrate(&form(&t, &["b", "0", "-a", "0"])).unwrap(), Some(e("b*x - a*z")));
        assert_eq!(poincare_integrate(&form(&t, &["y", "x", "0", "0"])).unwrap(), Some(e("x*y")));
        assert_eq!(poincare_integrate(&form(&t, &["0", "0", "1", "0"])).unwrap(), Some(e("z")));
        assert!(poincare_integrate(&form(&t, &["y", "0", "0", "0"])).is_err());
    }

    #[test]
    fn trig_antiderivatives_round_trip() {
        let t = table();
        for src in ["x^2*cos(w)^3", "w^3*sin(w)*cos(w)^2", "w*cos(w)^4 + sin(w)", "w^2*cos(w)"] {
            let e = parse_expr(src, &t).unwrap();
            let w = &t.states[3];
            let f = antiderivative(&e, w).unwrap();
            assert_eq!(f.differentiate(w).unwrap(), e, "{src}");
        }
    }

    #[test]
    fn first_example_membership() {
        let sys = parse_system("states: x y z\ncontrol g1: [1, y, 0]\ncontrol g2: [0, 1, x*z]\n").unwrap();
        let flag = derived_flag(&sys, 42).unwrap();
        let dom = flag.domain.clone();
        let cs = gfi_candidates(&flag.levels[0].torsion, 1, 1, &dom, 42).unwrap();
        let z = sys.parse_expr("z").unwrap();
        let xp1 = sys.parse_expr("x + 1").unwrap();
        assert!(cs.candidates.contains(&vec![z.clone()]));
        assert!(cs.candidates.contains(&vec![xp1.clone()]));
        let c = check_membership(&[z], flag.base(), &dom, Provenance::FromTorsionMinors, 42).unwrap();
        assert_eq!(c.classification, Classification::GeneralizedFirstIntegral);
        let Evidence::Membership(cert) = &c.evidence else { panic!() };
        assert!(cert.multipliers[0][0].is_one());
        let coords: Coords = sys.symbols.states.clone().into();
        let want = DifferentialForm::one_form(coords, &["-x*y", "x", "0"].map(|s| sys.parse_expr(s).unwrap()));
        assert_eq!(cert.quotients[0][0], want);
        let r = check_membership(&[xp1], flag.base(), &dom, Provenance::FromTorsionMinors, 42).unwrap();
        assert_eq!(r.classification, Classification::Rejected);
    }

    #[test]
    fn slanted_plane_first_integral() {
        let sys = parse_system(
            "states: x y z w\nparams: a > 0, b > 0\ncontrol g1: [a*cos(w), sin(w), b*cos(w), 0]\ncontrol g2: [0, 0, 0, 1]\nassume_nonzero: cos(w)\n",
        )
        .unwrap();
        let flag = derived_flag(&sys, 42).unwrap();
        let fi = first_integrals(&flag, &sys.spanning_fields(), 42);
        assert_eq!(fi.len(), 1);
        assert_eq!(fi[0].classification, Classification::FirstIntegral);
        assert_eq!(fi[0].rho[0], sys.parse_expr("b*x - a*z").unwrap());
    }

    #[test]
    fn zero_locus_points_lie_on_the_locus() {
        let t = table();
        let rho = parse_expr("x^2 + y^2 - 1", &t).unwrap();
        let dom = Domain { states: t.states.clone(), params: t.params.clone(), nonzero: vec![] };
        let locus = ZeroLocus::new(std::slice::from_ref(&rho), &dom);
        let pts = locus.samples(10, 3);
        assert!(pts.len() >= 5);
        for p in pts {
            assert!(rho.evaluate(&p).unwrap().abs() <= LOCUS_RESIDUAL);
        }
    }
}
