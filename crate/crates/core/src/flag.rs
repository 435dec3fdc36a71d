//! Annihilating Pfaffian system, coframe completion, torsion and the derived
//! flag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::ControlAffineSystem;
use crate::forms::{Coords, DifferentialForm, FormsError, Reducer, VectorField};
use crate::kernel::{is_zero_on, Domain, Expr, ZeroVerdict};
use crate::linalg::{clear_denominators, determinant, left_null_space, numeric_rank, rref, LinalgError};

/// Singular-value threshold for numeric rank checks.
pub const RANK_TOL: f64 = 1e-8;
/// Points used by the numeric rank cross-check.
pub const CROSS_CHECK_POINTS: usize = 20;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlagError {
    #[error("rank of the spanning fields is not constant: {0}")]
    RankNotConstant(String),
    #[error("no coordinate completion of the coframe has a nonzero determinant")]
    NoValidCompletion,
    #[error(transparent)]
    SingularPivot(#[from] FormsError),
    #[error("cannot decide the rank of the torsion matrix: pivot `{0}`")]
    RankUndecidable(String),
}

/// Independent 1-forms together with the pivot coordinates used to solve
/// `theta = 0`.
#[derive(Clone, Debug)]
pub struct PfaffianSystem {
    coords: Coords,
    generators: Vec<DifferentialForm>,
    pivots: Vec<usize>,
    constraints: Vec<Expr>,
    assumptions: Vec<Expr>,
}

impl PfaffianSystem {
    /// Wrap independent generators and complete them to a coframe.
    pub fn new(coords: Coords, generators: Vec<DifferentialForm>, domain: &Domain, seed: u64) -> Result<Self, FlagError> {
        let mut sys = PfaffianSystem { coords, generators, pivots: Vec::new(), constraints: Vec::new(), assumptions: Vec::new() };
        let cf = complete_coframe(&sys, domain, seed)?;
        sys.pivots = cf.pivots;
        if let Some(c) = cf.constraint {
            sys.constraints.push(c);
        }
        Ok(sys)
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[DifferentialForm] {
        &self.generators
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Non-pivot coordinates; their differentials complete the coframe.
    pub fn free(&self) -> Vec<usize> {
        (0..self.n()).filter(|c| !self.pivots.contains(c)).collect()
    }

    /// Expressions required nonzero by the coframe completion.
    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    /// Elimination pivots that are nonzero only generically; the rank
    /// computed for this system holds off their zero sets.
    pub fn assumptions(&self) -> &[Expr] {
        &self.assumptions
    }

    pub fn coefficient_matrix(&self) -> Vec<Vec<Expr>> {
        self.generators.iter().map(DifferentialForm::one_form_coeffs).collect()
    }

    pub fn reducer(&self, domain: &Domain, seed: u64) -> Result<Reducer, FormsError> {
        Reducer::new(&self.generators, &self.pivots, domain, seed)
    }

    /// Whether the numeric rank of the generator matrix equals the symbolic
    /// rank at every one of `CROSS_CHECK_POINTS` random points.
    pub fn numeric_rank_consistent(&self, domain: &Domain, seed: u64) -> bool {
        let m = self.coefficient_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..CROSS_CHECK_POINTS).all(|_| {
            let p = domain.sample(&mut rng);
            let rows: Option<Vec<Vec<f64>>> =
                m.iter().map(|r| r.iter().map(|e| e.evaluate(&p).ok()).collect()).collect();
            rows.is_some_and(|rows| numeric_rank(&rows, RANK_TOL) == self.rank())
        })
    }
}

/// Coordinate completion of a coframe.
#[derive(Clone, Debug, PartialEq)]
pub struct Coframe {
    pub pivots: Vec<usize>,
    /// Coordinates whose differentials are the `omega`.
    pub omega: Vec<usize>,
    pub determinant: Expr,
    /// Set when the determinant is nonzero only generically.
    pub constraint: Option<Expr>,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Choose pivot coordinates so that `(theta, dx_free)` is a coframe.
/// Subsets are tried in lexicographic order; a determinant certified nonzero
/// on the domain wins, otherwise the first generically nonzero one is taken
/// and returned as a constraint.
pub fn complete_coframe(theta: &PfaffianSystem, domain: &Domain, seed: u64) -> Result<Coframe, FlagError> {
    let n = theta.n();
    let s = theta.rank();
    let m = theta.coefficient_matrix();
    let mut generic: Option<(Vec<usize>, Expr)> = None;
    for pivots in subsets(n, s) {
        let block: Vec<Vec<Expr>> = m.iter().map(|r| pivots.iter().map(|&p| r[p].clone()).collect()).collect();
        let det = determinant(&block);
        if det.is_zero() {
            continue;
        }
        let omega: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        if domain.certified_nonzero(&det) {
            return Ok(Coframe { pivots, omega, determinant: det, constraint: None });
        }
        if generic.is_none() && is_zero_on(&det, domain, seed).is_proven_nonzero() {
            generic = Some((pivots, det));
        }
    }
    let (pivots, det) = generic.ok_or(FlagError::NoValidCompletion)?;
    let omega = (0..n).filter(|c| !pivots.contains(c)).collect();
    Ok(Coframe { pivots, omega, constraint: Some(det.clone()), determinant: det })
}

/// Coefficients of `d theta^l` on `omega^j ∧ omega^k` modulo `(theta)`.
#[derive(Clone, Debug)]
pub struct TorsionMatrix {
    pub entries: Vec<Vec<Expr>>,
    /// Coordinate index pairs `(j, k)`, `j < k`, labelling the columns.
    pub columns: Vec<(usize, usize)>,
    pub omega: Vec<usize>,
}

impl TorsionMatrix {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(Expr::is_zero)
    }

    pub fn column_labels(&self, coords: &Coords) -> Vec<String> {
        self.columns
            .iter()
            .map(|&(j, k)| format!("d{}∧d{}", coords[j].name(), coords[k].name()))
            .collect()
    }
}

pub fn torsion(theta: &PfaffianSystem, domain: &Domain, seed: u64) -> Result<TorsionMatrix, FlagError> {
    let omega = theta.free();
    let mut columns = Vec::new();
    for (a, &j) in omega.iter().enumerate() {
        for &k in &omega[a + 1..] {
            columns.push((j, k));
        }
    }
    if theta.rank() == 0 {
        return Ok(TorsionMatrix { entries: Vec::new(), columns, omega });
    }
    let red = theta.reducer(domain, seed)?;
    let entries = theta
        .generators
        .iter()
        .map(|g| {
            let r = red.reduce(&g.d());
            columns.iter().map(|&(j, k)| r.coefficient(&[j, k])).collect()
        })
        .collect();
    Ok(TorsionMatrix { entries, columns, omega })
}

fn form_from_coeffs(coords: &Coords, v: Vec<Expr>) -> DifferentialForm {
    DifferentialForm::one_form(coords.clone(), &v)
}

/// Combinations `sum a_g theta^g` with `a` in the left null space of `T`.
pub fn derived_system(theta: &PfaffianSystem, t: &TorsionMatrix, domain: &Domain, seed: u64) -> Result<PfaffianSystem, FlagError> {
    let s = theta.rank();
    if s == 0 {
        return Ok(theta.clone());
    }
    if t.is_zero() {
        return Ok(theta.clone());
    }
    let (basis, ech) = left_null_space(&t.entries, s, domain, seed).map_err(|e| match e {
        LinalgError::Undecidable(m) => FlagError::RankUndecidable(m),
    })?;
    let m = theta.coefficient_matrix();
    let n = theta.n();
    let gens: Vec<DifferentialForm> = basis
        .iter()
        .map(|a| {
            let v: Vec<Expr> = (0..n).map(|c| a.iter().zip(&m).map(|(ag, row)| ag * &row[c]).sum()).collect();
            form_from_coeffs(&theta.coords, clear_denominators(&v))
        })
        .collect();
    let mut out = PfaffianSystem::new(theta.coords.clone(), gens, domain, seed)?;
    out.assumptions.extend(ech.assumptions);
    Ok(out)
}

/// 1-forms annihilating the drift (when nonzero) and every control field.
pub fn annihilator(sys: &ControlAffineSystem, seed: u64) -> Result<PfaffianSystem, FlagError> {
    let domain = sys.domain();
    let coords: Coords = sys.symbols.states.clone().into();
    let fields = sys.spanning_fields();
    let n = sys.n();
    let ech = rref(&fields, &domain, seed).map_err(|e| match e {
        LinalgError::Undecidable(m) => FlagError::RankNotConstant(format!("pivot candidate `{m}` has an undecided sign")),
    })?;
    let p = ech.rank();
    // Rank must agree numerically at random points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..CROSS_CHECK_POINTS {
        let pt = domain.sample(&mut rng);
        let rows: Result<Vec<Vec<f64>>, _> =
            fields.iter().map(|r| r.iter().map(|e| e.evaluate(&pt)).collect()).collect();
        let rows = rows.map_err(|e| FlagError::RankNotConstant(e.to_string()))?;
        let r = numeric_rank(&rows, RANK_TOL);
        if r != p {
            return Err(FlagError::RankNotConstant(format!(
                "symbolic rank {p} but numeric rank {r} at states {:?}",
                pt.states
            )));
        }
    }
    let mut gens = Vec::new();
    for free in (0..n).filter(|c| !ech.pivots.contains(c)) {
        let mut v = vec![Expr::zero(); n];
        v[free] = Expr::one();
        for (r, &pc) in ech.pivots.iter().enumerate() {
            v[pc] = -&ech.rows[r][free];
        }
        gens.push(form_from_coeffs(&coords, clear_denominators(&v)));
    }
    for g in &gens {
        for f in &fields {
            debug_assert!(g.contract(&VectorField::new(f.clone())).is_zero(), "annihilator");
        }
    }
    let mut out = PfaffianSystem::new(coords, gens, &domain, seed)?;
    out.assumptions.extend(ech.assumptions);
    Ok(out)
}

/// One level of the derived flag.
#[derive(Clone, Debug)]
pub struct FlagLevel {
    pub system: PfaffianSystem,
    pub torsion: TorsionMatrix,
    pub rank_consistent: bool,
}

#[derive(Clone, Debug)]
pub struct PfaffianFlag {
    pub levels: Vec<FlagLevel>,
    pub nu: usize,
    pub q: usize,
    /// The working domain extended by every recorded constraint.
    pub domain: Domain,
}

impl PfaffianFlag {
    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn terminal(&self) -> &PfaffianSystem {
        &self.levels[self.nu].system
    }

    pub fn base(&self) -> &PfaffianSystem {
        &self.levels[0].system
    }

    /// Type of the dual distribution flag.
    pub fn dual_type(&self) -> (usize, usize) {
        (self.nu, self.n() - self.q)
    }

    /// `d theta ≡ 0 mod (theta)` for every terminal generator.
    pub fn terminal_is_frobenius(&self) -> bool {
        self.levels[self.nu].torsion.is_zero()
    }

    pub fn constraints(&self) -> Vec<Expr> {
        self.collect(PfaffianSystem::constraints)
    }

    pub fn assumptions(&self) -> Vec<Expr> {
        self.collect(PfaffianSystem::assumptions)
    }

    fn collect(&self, which: fn(&PfaffianSystem) -> &[Expr]) -> Vec<Expr> {
        let mut out: Vec<Expr> = Vec::new();
        for l in &self.levels {
            for c in which(&l.system) {
                if !c.is_constant() && !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out
    }
}

/// Iterate derived systems until the rank stabilizes.
pub fn derived_flag(sys: &ControlAffineSystem, seed: u64) -> Result<PfaffianFlag, FlagError> {
    let base = annihilator(sys, seed)?;
    flag_from(base, sys.domain(), seed)
}

/// Derived flag starting from given generators.
pub fn flag_from(base: PfaffianSystem, mut domain: Domain, seed: u64) -> Result<PfaffianFlag, FlagError> {
    for c in base.constraints() {
        domain.add_constraint(c.clone());
    }
    let mut levels = Vec::new();
    let mut current = base;
    loop {
        let t = torsion(&current, &domain, seed)?;
        let rank_consistent = current.numeric_rank_consistent(&domain, seed.wrapping_add(levels.len() as u64));
        let next = derived_system(&current, &t, &domain, seed)?;
        for c in next.constraints() {
            domain.add_constraint(c.clone());
        }
        let stable = next.rank() == current.rank();
        assert!(next.rank() <= current.rank(), "derived system cannot grow");
        levels.push(FlagLevel { system: current, torsion: t, rank_consistent });
        if stable {
            break;
        }
        current = next;
    }
    let nu = levels.len() - 1;
    let q = levels[nu].system.rank();
    Ok(PfaffianFlag { levels, nu, q, domain })
}

/// Zero verdict helper exposing the sample that witnessed a nonzero value.
pub fn witness(e: &Expr, domain: &Domain, seed: u64) -> Option<Vec<f64>> {
    match is_zero_on(e, domain, seed) {
        ZeroVerdict::ProvenNonzero(p) => Some(p.states),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_system;

    const EX1: &str = "states: x y z\ncontrol g1: [1, y, 0]\ncontrol g2: [0, 1, x*z]\n";
    const EX3: &str = "states: x y z w\nparams: a > 0, b > 0\ncontrol g1: [a*cos(w), sin(w), b*cos(w), 0]\ncontrol g2: [0, 0, 0, 1]\nassume_nonzero: cos(w)\n";

    #[test]
    fn first_example_flag() {
        let sys = parse_system(EX1).unwrap();
        let flag = derived_flag(&sys, 42).unwrap();
        assert_eq!((flag.nu, flag.q), (1, 0));
        let base = flag.base();
        assert_eq!(base.pivots(), &[2]);
        let t = &flag.levels[0].torsion;
        assert_eq!(t.entries[0][0], sys.parse_expr("-z*(1+x)").unwrap());
        assert!(flag.levels.iter().all(|l| l.rank_consistent));
    }

    #[test]
    fn slanted_plane_flag() {
        let sys = parse_system(EX3).unwrap();
        let flag = derived_flag(&sys, 42).unwrap();
        assert_eq!((flag.nu, flag.q), (1, 1));
        assert_eq!(flag.base().pivots(), &[0, 1]);
        let term = flag.terminal().generators()[0].one_form_coeffs();
        let want = ["b", "0", "-a", "0"].map(|s| sys.parse_expr(s).unwrap());
        assert_eq!(term, want.to_vec());
        assert!(flag.terminal_is_frobenius());
        assert_eq!(flag.dual_type(), (1, 3));
    }

    #[test]
    fn integrable_plane_field() {
        let sys = parse_system("states: x y z\ncontrol g1: [1, 0, 0]\ncontrol g2: [0, 1, 0]\n").unwrap();
        let flag = derived_flag(&sys, 1).unwrap();
        assert_eq!((flag.nu, flag.q), (0, 1));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(2, 0), vec![Vec::<usize>::new()]);
    }
}
