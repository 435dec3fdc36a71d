//! The full analysis pipeline and its JSON/text report.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::ControlAffineSystem;
use crate::flag::{derived_flag, PfaffianFlag, PfaffianSystem, TorsionMatrix};
use crate::forms::{Coords, DifferentialForm, VectorField};
use crate::integrals::{
    annihilation, check_membership, default_dmax, first_integrals, gfi_candidates, CandidateIntegral, CandidateSet,
    Classification, Evidence, FailureReason, Provenance, ZeroLocus,
};
use crate::kernel::{Assignment, Expr};
use crate::numeric::{
    distribution_type, escape_test, invariance_test, leaf_controllability, system_fields, Escape, InvarianceVerdict,
    LeafControllability, TrialPlan, Verdict, DEFAULT_BRACKET_DEPTH,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Knobs of one analysis run.
#[derive(Clone, Copy, Debug)]
pub struct AnalyzeOptions {
    pub seed: u64,
    pub plan: TrialPlan,
    pub dmax: Option<usize>,
    pub depth: usize,
    /// Run trajectory simulations; bracket ranks are always computed.
    pub simulate: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { seed: 42, plan: TrialPlan::default(), dmax: Some(3), depth: DEFAULT_BRACKET_DEPTH, simulate: true }
    }
}

/// Failure of a pipeline stage.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{module}: {stage}: {message}")]
pub struct AnalysisError {
    pub module: &'static str,
    pub stage: &'static str,
    pub message: String,
}

impl AnalysisError {
    fn new(module: &'static str, stage: &'static str, e: impl ToString) -> Self {
        AnalysisError { module, stage, message: e.to_string() }
    }
}

// ---------------------------------------------------------------------------
// Serializable report types

#[derive(Clone, Debug, Serialize)]
pub struct SystemEcho {
    pub source: String,
    pub states: Vec<String>,
    pub params: Vec<String>,
    pub drift: Vec<String>,
    pub controls: Vec<ControlEcho>,
    pub assume_nonzero: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlEcho {
    pub name: String,
    pub field: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorsionReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub rank: usize,
    pub generators: Vec<String>,
    pub pivots: Vec<String>,
    pub coframe: Vec<String>,
    pub torsion: TorsionReport,
    pub constraints: Vec<String>,
    pub rank_assumptions: Vec<String>,
    pub numeric_rank_consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagReport {
    #[serde(rename = "type")]
    pub flag_type: [usize; 2],
    pub dual_type: [usize; 2],
    pub terminal_frobenius: bool,
    pub levels: Vec<LevelReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControllabilityReport {
    pub point: Vec<f64>,
    pub bracket_rank: usize,
    pub leaf_dimension: usize,
    pub tangent: bool,
    pub controllable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub rho: String,
    pub trials: usize,
    pub unstarted: usize,
    pub aborted: usize,
    pub max_abs_rho: f64,
    pub worst_ratio: f64,
    pub verdict: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub x0: Vec<f64>,
    pub params: Vec<f64>,
    pub control: Vec<f64>,
    pub time: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    /// `d rho = sum multipliers theta + rho * quotient`, one per component.
    pub identities: Vec<String>,
    pub multipliers: Vec<Vec<String>>,
    pub quotients: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralReport {
    pub rho: String,
    pub components: Vec<String>,
    pub classification: &'static str,
    pub provenance: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential_of: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaf_dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controllability: Option<ControllabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance: Option<InvarianceReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RejectedReport {
    pub rho: String,
    pub components: Vec<String>,
    pub provenance: &'static str,
    pub reason: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub differential: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UndeterminedReport {
    pub rho: String,
    pub components: Vec<String>,
    pub provenance: &'static str,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidatesReport {
    pub candidates: Vec<String>,
    pub degenerate: Vec<String>,
    pub cleared_denominators: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub pfaffian_type: [usize; 2],
    pub expected_distribution_type: [usize; 2],
    pub numeric_distribution_type: Option<[usize; 2]>,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub schema: u32,
    pub seed: u64,
    pub system: SystemEcho,
    pub flag: FlagReport,
    pub foliation: Vec<IntegralReport>,
    pub isolated: Vec<IntegralReport>,
    pub rejected: Vec<RejectedReport>,
    pub undetermined: Vec<UndeterminedReport>,
    pub candidates: CandidatesReport,
    pub domain_constraints: Vec<String>,
    pub rank_assumptions: Vec<String>,
    pub duality: DualityReport,
    pub summary: String,
}

// ---------------------------------------------------------------------------
// Conversions

fn strings(v: &[Expr]) -> Vec<String> {
    v.iter().map(Expr::to_string).collect()
}

pub fn system_echo(sys: &ControlAffineSystem) -> SystemEcho {
    SystemEcho {
        source: sys.to_source(),
        states: sys.symbols.states.iter().map(|s| s.name().to_string()).collect(),
        params: sys.symbols.params.iter().map(|(s, _)| s.name().to_string()).collect(),
        drift: strings(&sys.drift),
        controls: sys.controls.iter().map(|c| ControlEcho { name: c.name.clone(), field: strings(&c.field) }).collect(),
        assume_nonzero: strings(&sys.assume_nonzero),
    }
}

pub fn torsion_report(t: &TorsionMatrix, coords: &Coords) -> TorsionReport {
    TorsionReport { columns: t.column_labels(coords), rows: t.entries.iter().map(|r| strings(r)).collect() }
}

fn level_report(level: usize, sys: &PfaffianSystem, t: &TorsionMatrix, consistent: bool) -> LevelReport {
    let coords = sys.coords();
    LevelReport {
        level,
        rank: sys.rank(),
        generators: sys.generators().iter().map(DifferentialForm::to_string).collect(),
        pivots: sys.pivots().iter().map(|&i| coords[i].name().to_string()).collect(),
        coframe: sys.free().iter().map(|&i| format!("d{}", coords[i].name())).collect(),
        torsion: torsion_report(t, coords),
        constraints: strings(sys.constraints()),
        rank_assumptions: strings(sys.assumptions()),
        numeric_rank_consistent: consistent,
    }
}

pub fn flag_report(flag: &PfaffianFlag) -> FlagReport {
    let (nu, dq) = flag.dual_type();
    FlagReport {
        flag_type: [flag.nu, flag.q],
        dual_type: [nu, dq],
        terminal_frobenius: flag.terminal_is_frobenius(),
        levels: flag
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| level_report(i, &l.system, &l.torsion, l.rank_consistent))
            .collect(),
    }
}

pub fn candidates_report(c: &CandidateSet) -> CandidatesReport {
    CandidatesReport {
        candidates: c.candidates.iter().map(|s| join(s)).collect(),
        degenerate: c.degenerate.iter().map(|s| join(s)).collect(),
        cleared_denominators: strings(&c.cleared),
    }
}

fn join(rho: &[Expr]) -> String {
    strings(rho).join(", ")
}

fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::FirstIntegral => "first_integral",
        Classification::GeneralizedFirstIntegral => "generalized_first_integral",
        Classification::Rejected => "rejected",
        Classification::Undetermined => "undetermined",
    }
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::FromFlag => "from_flag",
        Provenance::FromTorsionMinors => "from_torsion_minors",
        Provenance::UserDeclared => "user_declared",
    }
}

fn theta_name(l: usize, s: usize) -> String {
    if s == 1 {
        "θ".into()
    } else {
        format!("θ{}", l + 1)
    }
}

/// Render `d rho^mu = sum lambda_l theta^l + sum rho^nu beta`.
fn identity(rho: &[Expr], mu: usize, multipliers: &[Expr], quotients: &[DifferentialForm]) -> String {
    let mut rhs: Vec<String> = Vec::new();
    let s = multipliers.len();
    for (l, m) in multipliers.iter().enumerate() {
        if m.is_zero() {
            continue;
        }
        let t = theta_name(l, s);
        rhs.push(if m.is_one() { t } else { format!("({m})·{t}") });
    }
    for (nu, q) in quotients.iter().enumerate() {
        if !q.is_zero() {
            rhs.push(format!("({})·({q})", rho[nu]));
        }
    }
    let lhs = if rho.len() == 1 { format!("d({})", rho[mu]) } else { format!("d({}) [component {}]", rho[mu], mu + 1) };
    format!("{lhs} = {}", if rhs.is_empty() { "0".into() } else { rhs.join(" + ") })
}

/// Certificate of a first or generalized first integral, if it has one.
pub fn certificate_report_for(c: &CandidateIntegral) -> Option<CertificateReport> {
    match &c.evidence {
        Evidence::Membership(cert) => Some(CertificateReport {
            identities: (0..c.rho.len()).map(|mu| identity(&c.rho, mu, &cert.multipliers[mu], &cert.quotients[mu])).collect(),
            multipliers: cert.multipliers.iter().map(|m| strings(m)).collect(),
            quotients: cert.quotients.iter().map(|q| q.iter().map(DifferentialForm::to_string).collect()).collect(),
        }),
        Evidence::Exact { multipliers } => Some(CertificateReport {
            identities: (0..c.rho.len()).map(|mu| identity(&c.rho, mu, &multipliers[mu], &[])).collect(),
            multipliers: multipliers.iter().map(|m| strings(m)).collect(),
            quotients: Vec::new(),
        }),
        _ => None,
    }
}

fn controllability_report(l: &LeafControllability) -> ControllabilityReport {
    ControllabilityReport {
        point: l.point.clone(),
        bracket_rank: l.rank,
        leaf_dimension: l.leaf_dimension,
        tangent: l.tangent,
        controllable: l.controllable,
    }
}

pub fn invariance_report(rho: &[Expr], v: &InvarianceVerdict) -> InvarianceReport {
    let worst_ratio = v.trials.iter().map(|t| t.max_abs_rho / t.tolerance).fold(0.0, f64::max);
    InvarianceReport {
        rho: join(rho),
        trials: v.trials.len(),
        unstarted: v.unstarted,
        aborted: v.aborted(),
        max_abs_rho: v.max_abs_rho,
        worst_ratio,
        verdict: match v.verdict {
            Verdict::Held => "held",
            Verdict::Violated => "violated",
        },
    }
}

pub fn escape_report(e: &Escape) -> EscapeReport {
    EscapeReport {
        x0: e.x0.clone(),
        params: e.params.clone(),
        control: e.schedule.pieces.first().map(|p| p.control.clone()).unwrap_or_default(),
        time: e.time,
        value: e.value,
    }
}

fn integral_report(c: &CandidateIntegral) -> IntegralReport {
    IntegralReport {
        rho: join(&c.rho),
        components: strings(&c.rho),
        classification: classification_name(c.classification),
        provenance: provenance_name(c.provenance),
        potential_of: match &c.evidence {
            Evidence::Potential { form } => Some(form.to_string()),
            _ => None,
        },
        certificate: certificate_report_for(c),
        leaf_dimension: None,
        controllability: None,
        invariance: None,
    }
}

pub fn rejected_report(c: &CandidateIntegral) -> RejectedReport {
    let (reason, differential, coefficient, witness) = match &c.evidence {
        Evidence::Failure { reason, differential, coefficient, witness, .. } => (
            match reason {
                FailureReason::NonDegeneracyFailure => "non_degeneracy_failure",
                FailureReason::NotInIdeal => "not_in_ideal",
            },
            differential.clone(),
            coefficient.as_ref().map(Expr::to_string),
            witness.clone(),
        ),
        _ => ("rejected", None, None, None),
    };
    RejectedReport {
        rho: join(&c.rho),
        components: strings(&c.rho),
        provenance: provenance_name(c.provenance),
        reason,
        differential,
        coefficient,
        witness,
        escape: None,
    }
}

pub fn undetermined_report(c: &CandidateIntegral) -> UndeterminedReport {
    let reason = match &c.evidence {
        Evidence::Numeric { max_abs, points, coefficient } => format!(
            "coefficient {coefficient} is not divisible symbolically but stays below {max_abs:e} on {points} zero-locus points"
        ),
        Evidence::Defect { form, defect } => format!("generator {form} is not closed: d = {defect}"),
        Evidence::EmptyLocus => "zero locus not found in the sampling box".into(),
        _ => "undetermined".into(),
    };
    UndeterminedReport { rho: join(&c.rho), components: strings(&c.rho), provenance: provenance_name(c.provenance), reason }
}

// ---------------------------------------------------------------------------
// Pipeline

/// Classify one candidate system against the base Pfaffian system.
pub fn classify(
    sys: &ControlAffineSystem,
    flag: &PfaffianFlag,
    rho: &[Expr],
    provenance: Provenance,
    seed: u64,
) -> Result<CandidateIntegral, AnalysisError> {
    check_membership(rho, flag.base(), &flag.domain, provenance, seed)
        .map_err(|e| AnalysisError::new("integral-finder", "check_membership", e))
        .map(|mut c| {
            // A first integral of the base system must annihilate every field.
            if c.classification == Classification::FirstIntegral {
                let coords = &sys.symbols.states;
                let ok = rho.iter().all(|r| annihilation(r, coords, &sys.spanning_fields()).iter().all(Expr::is_zero));
                if !ok {
                    c.classification = Classification::Undetermined;
                }
            }
            c
        })
}

fn on_leaf(
    sys: &ControlAffineSystem,
    rho: &[Expr],
    point: Option<Assignment>,
    depth: usize,
) -> Result<Option<ControllabilityReport>, AnalysisError> {
    let Some(p) = point else { return Ok(None) };
    let fields = system_fields(sys);
    leaf_controllability(&fields, &sys.symbols.states, rho, &p, depth)
        .map(|l| Some(controllability_report(&l)))
        .map_err(|e| AnalysisError::new("numeric-verifier", "bracket_rank", e))
}

/// Full pipeline: derived flag, first integrals, torsion-minor candidates,
/// membership, bracket ranks on leaves and numeric invariance.
pub fn analyze(sys: &ControlAffineSystem, opts: &AnalyzeOptions) -> Result<InvariantReport, AnalysisError> {
    let seed = opts.seed;
    let flag = derived_flag(sys, seed).map_err(|e| AnalysisError::new("flag-analyzer", "derived_flag", e))?;
    let coords = &sys.symbols.states;
    let n = sys.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Foliation from the terminal system.
    let mut foliation = Vec::new();
    let mut undetermined = Vec::new();
    for c in first_integrals(&flag, &sys.spanning_fields(), seed) {
        if c.classification != Classification::FirstIntegral {
            undetermined.push(undetermined_report(&c));
            continue;
        }
        let mut r = integral_report(&c);
        r.leaf_dimension = Some(n - flag.q);
        foliation.push((c, r));
    }
    if !foliation.is_empty() {
        let rhos: Vec<Expr> = foliation.iter().map(|(c, _)| c.rho[0].clone()).collect();
        let p = flag.domain.sample(&mut rng);
        let ctrl = on_leaf(sys, &rhos, Some(p), opts.depth)?;
        for (c, r) in &mut foliation {
            r.controllability = ctrl.clone();
            if opts.simulate {
                let level = Expr::rational(num_rational::BigRational::new(rng.gen_range(-32i64..=32).into(), 16.into()));
                let shifted = vec![&c.rho[0] - &level];
                let v = invariance_test(sys, &shifted, opts.plan, seed);
                r.invariance = Some(invariance_report(&shifted, &v));
            }
        }
    }

    // Candidates from torsion minors at level 0, then declared candidates.
    let base = flag.base();
    let t0 = &flag.levels[0].torsion;
    let dmax = opts.dmax.unwrap_or_else(|| default_dmax(base.rank()));
    let cands = gfi_candidates(t0, base.rank(), dmax, &flag.domain, seed)
        .map_err(|e| AnalysisError::new("integral-finder", "gfi_candidates", e))?;
    let mut todo: Vec<(Vec<Expr>, Provenance)> =
        cands.candidates.iter().map(|c| (c.clone(), Provenance::FromTorsionMinors)).collect();
    for d in &sys.candidates {
        // A declared candidate proportional to a torsion candidate is the same submanifold.
        let same = todo.iter().any(|(r, _)| {
            r.len() == 1 && r[0].checked_div(&d.rho).map_or(false, |q| q.is_constant() && !q.is_zero())
        });
        if !same {
            todo.push((vec![d.rho.clone()], Provenance::UserDeclared));
        }
    }

    let mut isolated = Vec::new();
    let mut rejected = Vec::new();
    for (rho, prov) in todo {
        let c = classify(sys, &flag, &rho, prov, seed)?;
        match c.classification {
            Classification::FirstIntegral | Classification::GeneralizedFirstIntegral => {
                let mut r = integral_report(&c);
                r.leaf_dimension = Some(n - rho.len());
                let locus = ZeroLocus::new(&rho, &flag.domain);
                r.controllability = on_leaf(sys, &rho, locus.sample(&mut rng), opts.depth)?;
                if opts.simulate {
                    let v = invariance_test(sys, &rho, opts.plan, seed);
                    r.invariance = Some(invariance_report(&rho, &v));
                }
                isolated.push(r);
            }
            Classification::Rejected => {
                let mut r = rejected_report(&c);
                if opts.simulate && rho.len() == 1 {
                    r.escape = escape_test(sys, &rho[0], seed).as_ref().map(escape_report);
                }
                rejected.push(r);
            }
            Classification::Undetermined => undetermined.push(undetermined_report(&c)),
        }
    }

    let fields: Vec<VectorField> = system_fields(sys).into_iter().map(|f| f.field).collect();
    let numeric = distribution_type(&fields, coords, &flag.domain, seed).ok().map(|(a, b)| [a, b]);
    let (nu, dq) = flag.dual_type();
    let duality = DualityReport {
        pfaffian_type: [flag.nu, flag.q],
        expected_distribution_type: [nu, dq],
        numeric_distribution_type: numeric,
        consistent: numeric == Some([nu, dq]),
    };

    let foliation: Vec<IntegralReport> = foliation.into_iter().map(|(_, r)| r).collect();
    let summary = summary(&isolated, &foliation);
    Ok(InvariantReport {
        schema: SCHEMA_VERSION,
        seed,
        system: system_echo(sys),
        flag: flag_report(&flag),
        foliation,
        isolated,
        rejected,
        undetermined,
        candidates: candidates_report(&cands),
        domain_constraints: strings(&{
            let mut all = sys.assume_nonzero.clone();
            for c in flag.constraints() {
                if !all.contains(&c) {
                    all.push(c);
                }
            }
            all
        }),
        rank_assumptions: strings(&flag.assumptions()),
        duality,
        summary,
    })
}

fn summary(isolated: &[IntegralReport], foliation: &[IntegralReport]) -> String {
    let mut parts = Vec::new();
    match isolated.len() {
        0 => {}
        1 => parts.push(format!("1 isolated invariant submanifold {{{} = 0}}", isolated[0].rho)),
        k => parts.push(format!("{k} isolated invariant submanifolds")),
    }
    if !foliation.is_empty() {
        let names: Vec<&str> = foliation.iter().map(|r| r.rho.as_str()).collect();
        let dim = foliation[0].leaf_dimension.unwrap_or(0);
        parts.push(format!("foliation by level sets of {} (leaf dimension {dim})", names.join(", ")));
    }
    if parts.is_empty() {
        "no invariant submanifolds".into()
    } else {
        parts.join("; ")
    }
}

impl InvariantReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable rendering of the same fields as the JSON.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "summary: {}", self.summary);
        let _ = writeln!(o, "seed: {} (schema {})", self.seed, self.schema);
        let _ = writeln!(o, "states: {}", self.system.states.join(" "));
        o.push_str(&flag_text(&self.flag));
        for r in &self.foliation {
            let _ = writeln!(o, "foliation: {} = const, leaf dimension {}", r.rho, r.leaf_dimension.unwrap_or(0));
            integral_text(&mut o, r);
        }
        for r in &self.isolated {
            let _ = writeln!(o, "isolated: {{{} = 0}} [{}, {}]", r.rho, r.classification, r.provenance);
            integral_text(&mut o, r);
        }
        for r in &self.rejected {
            let _ = write!(o, "rejected: {} [{}, {}]", r.rho, r.reason, r.provenance);
            if let (Some(d), Some(c)) = (&r.differential, &r.coefficient) {
                let _ = write!(o, " coefficient of {d} is {c}");
            }
            o.push('\n');
            if let Some(e) = &r.escape {
                let _ = writeln!(
                    o,
                    "  escape: from {:?} with u = {:?}, |rho| = {} at t = {}",
                    e.x0,
                    e.control,
                    e.value.abs(),
                    e.time
                );
            }
        }
        for r in &self.undetermined {
            let _ = writeln!(o, "undetermined: {} [{}] {}", r.rho, r.provenance, r.reason);
        }
        let c = &self.candidates;
        let _ = writeln!(o, "torsion candidates: [{}]", c.candidates.join("; "));
        if !c.degenerate.is_empty() {
            let _ = writeln!(o, "degenerate factors: [{}]", c.degenerate.join("; "));
        }
        if !c.cleared_denominators.is_empty() {
            let _ = writeln!(o, "cleared denominators: [{}]", c.cleared_denominators.join("; "));
        }
        let _ = writeln!(o, "domain constraints: [{}]", self.domain_constraints.join("; "));
        if !self.rank_assumptions.is_empty() {
            let _ = writeln!(o, "rank assumptions: [{}]", self.rank_assumptions.join("; "));
        }
        let d = &self.duality;
        let _ = writeln!(
            o,
            "duality: pfaffian {:?}, expected distribution {:?}, numeric {:?}, consistent {}",
            d.pfaffian_type, d.expected_distribution_type, d.numeric_distribution_type, d.consistent
        );
        o
    }
}

fn integral_text(o: &mut String, r: &IntegralReport) {
    if let Some(p) = &r.potential_of {
        let _ = writeln!(o, "  potential of {p}");
    }
    if let Some(c) = &r.certificate {
        for i in &c.identities {
            let _ = writeln!(o, "  certificate: {i}");
        }
    }
    if let Some(c) = &r.controllability {
        let _ = writeln!(
            o,
            "  bracket rank {} of leaf dimension {} at {:?}, tangent {}, controllable {}",
            c.bracket_rank, c.leaf_dimension, c.point, c.tangent, c.controllable
        );
    }
    if let Some(v) = &r.invariance {
        let _ = writeln!(
            o,
            "  invariance of {}: {} over {} trials ({} aborted, {} unstarted), max |rho| {:e}, worst ratio to tolerance {:e}",
            v.rho, v.verdict, v.trials, v.aborted, v.unstarted, v.max_abs_rho, v.worst_ratio
        );
    }
}

pub fn flag_text(f: &FlagReport) -> String {
    let mut o = String::new();
    let _ = writeln!(
        o,
        "flag type ({}, {}), dual distribution type ({}, {}), terminal frobenius {}",
        f.flag_type[0], f.flag_type[1], f.dual_type[0], f.dual_type[1], f.terminal_frobenius
    );
    for l in &f.levels {
        let _ = writeln!(o, "level {}: rank {}, pivots [{}], coframe [{}]", l.level, l.rank, l.pivots.join(" "), l.coframe.join(" "));
        for (i, g) in l.generators.iter().enumerate() {
            let _ = writeln!(o, "  θ{} = {g}", i + 1);
        }
        o.push_str(&torsion_text(&l.torsion));
    }
    o
}

pub fn torsion_text(t: &TorsionReport) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "  torsion columns [{}]", t.columns.join(", "));
    for r in &t.rows {
        let _ = writeln!(o, "    [{}]", r.join(", "));
    }
    o
}
