//! Command-line front end. `run` maps every outcome to an exit code:
//! 0 success, 1 analysis error, 2 usage error.

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsl::{parse_system, ControlAffineSystem, ControlSchedule, SchedulePiece};
use crate::flag::{derived_flag, torsion};
use crate::integrals::{default_dmax, gfi_candidates, Classification, Provenance};
use crate::kernel::{parse_rational, Assignment};
use crate::numeric::{
    bracket_table, escape_test, invariance_test, leaf_controllability, random_schedule, simulate, system_fields, TrialPlan,
};
use crate::report::{
    analyze, candidates_report, certificate_report_for, classify, escape_report, flag_report, flag_text, invariance_report,
    rejected_report, torsion_report, torsion_text, undetermined_report, AnalysisError, AnalyzeOptions, CandidatesReport,
    EscapeReport, FlagReport, InvarianceReport, RejectedReport, TorsionReport, UndeterminedReport, CertificateReport,
    SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "affine-invariants", about = "Invariant submanifolds of affine control systems", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, global = true, default_value_t = 5.0, value_parser = positive)]
    pub horizon: f64,
    #[arg(long, global = true, default_value_t = 1e-3, value_parser = positive)]
    pub step: f64,
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub dmax: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Pieces of each random control schedule.
    #[arg(long, global = true, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub pieces: u64,
    /// Bracket depth.
    #[arg(long, global = true, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: flag, integrals, candidates, brackets and simulations.
    Analyze { file: Option<PathBuf> },
    /// Derived flag only.
    Flag { file: Option<PathBuf> },
    /// Torsion matrix of the annihilating system.
    Torsion { file: Option<PathBuf> },
    /// Candidates from torsion minors, without verification.
    Candidates { file: Option<PathBuf> },
    /// Membership and numeric tests of a user candidate.
    Verify { rho: String, file: Option<PathBuf> },
    /// Trajectory as CSV.
    Simulate {
        file: Option<PathBuf>,
        /// Initial state, comma separated; defaults to the origin.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Parameter values `name=value`, comma separated; others are sampled.
        #[arg(long)]
        param: Option<String>,
        /// Schedule `duration:u1,u2;duration:u1,u2`; random when absent.
        #[arg(long, allow_hyphen_values = true)]
        schedule: Option<String>,
        /// Expressions to record alongside the state, semicolon separated.
        #[arg(long, allow_hyphen_values = true)]
        monitor: Option<String>,
    },
    /// Bracket table and ranks.
    Brackets { file: Option<PathBuf> },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Analysis(e.to_string())
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cfg) {
        Ok(out) => match &cfg.output {
            Some(p) => match std::fs::write(p, out) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: cli: output: cannot write {}: {e}", p.display());
                    2
                }
            },
            None => {
                print!("{out}");
                0
            }
        },
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn read_input(file: &Option<PathBuf>) -> Result<String, Failure> {
    match file {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)
            .map_err(|e| Failure::Usage(format!("cli: input: cannot read {}: {e}", p.display()))),
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Usage(format!("cli: input: cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn load(file: &Option<PathBuf>) -> Result<ControlAffineSystem, Failure> {
    let text = read_input(file)?;
    parse_system(&text).map_err(|e| Failure::Analysis(format!("system-dsl: parse_system: {e}")))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn plan(cfg: &RunConfig) -> TrialPlan {
    TrialPlan { trials: cfg.trials as usize, pieces: cfg.pieces as usize, horizon: cfg.horizon, h: cfg.step }
}

#[derive(Serialize)]
struct FlagOutput {
    schema: u32,
    seed: u64,
    flag: FlagReport,
}

#[derive(Serialize)]
struct TorsionOutput {
    schema: u32,
    seed: u64,
    generators: Vec<String>,
    pivots: Vec<String>,
    torsion: TorsionReport,
}

#[derive(Serialize)]
struct CandidatesOutput {
    schema: u32,
    seed: u64,
    dmax: usize,
    #[serde(flatten)]
    candidates: CandidatesReport,
}

#[derive(Serialize)]
struct VerifyOutput {
    schema: u32,
    seed: u64,
    rho: String,
    classification: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejected: Option<RejectedReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    undetermined: Option<UndeterminedReport>,
    invariance: InvarianceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    escape: Option<EscapeReport>,
}

#[derive(Serialize)]
struct BracketEntry {
    label: String,
    field: Vec<String>,
}

#[derive(Serialize)]
struct BracketsOutput {
    schema: u32,
    seed: u64,
    depth: usize,
    point: Vec<f64>,
    params: Vec<f64>,
    levels: Vec<Vec<BracketEntry>>,
    rank: usize,
}

fn execute(cfg: &RunConfig) -> Result<String, Failure> {
    let seed = cfg.seed;
    let text_mode = cfg.format == Format::Text;
    match &cfg.command {
        Command::Analyze { file } => {
            let sys = load(file)?;
            let opts = AnalyzeOptions {
                seed,
                plan: plan(cfg),
                dmax: Some(cfg.dmax as usize),
                depth: cfg.depth as usize,
                simulate: true,
            };
            let r = analyze(&sys, &opts)?;
            Ok(if text_mode { r.to_text() } else { r.to_json() })
        }
        Command::Flag { file } => {
            let sys = load(file)?;
            let flag = derived_flag(&sys, seed).map_err(|e| AnalysisError { module: "flag-analyzer", stage: "derived_flag", message: e.to_string() })?;
            let out = FlagOutput { schema: SCHEMA_VERSION, seed, flag: flag_report(&flag) };
            Ok(if text_mode { flag_text(&out.flag) } else { json(&out) })
        }
        Command::Torsion { file } => {
            let sys = load(file)?;
            let theta = crate::flag::annihilator(&sys, seed)
                .map_err(|e| AnalysisError { module: "flag-analyzer", stage: "annihilator", message: e.to_string() })?;
            let t = torsion(&theta, &sys.domain(), seed)
                .map_err(|e| AnalysisError { module: "flag-analyzer", stage: "torsion", message: e.to_string() })?;
            let coords = theta.coords();
            let out = TorsionOutput {
                schema: SCHEMA_VERSION,
                seed,
                generators: theta.generators().iter().map(|g| g.to_string()).collect(),
                pivots: theta.pivots().iter().map(|&i| coords[i].name().to_string()).collect(),
                torsion: torsion_report(&t, coords),
            };
            Ok(if text_mode { torsion_text(&out.torsion) } else { json(&out) })
        }
        Command::Candidates { file } => {
            let sys = load(file)?;
            let flag = derived_flag(&sys, seed).map_err(|e| AnalysisError { module: "flag-analyzer", stage: "derived_flag", message: e.to_string() })?;
            let s = flag.base().rank();
            let dmax = (cfg.dmax as usize).min(default_dmax(s).max(1));
            let c = gfi_candidates(&flag.levels[0].torsion, s, dmax, &flag.domain, seed)
                .map_err(|e| AnalysisError { module: "integral-finder", stage: "gfi_candidates", message: e.to_string() })?;
            let out = CandidatesOutput { schema: SCHEMA_VERSION, seed, dmax, candidates: candidates_report(&c) };
            Ok(if text_mode { format!("{}\n", out.candidates.candidates.join("\n")) } else { json(&out) })
        }
        Command::Verify { rho, file } => {
            let sys = load(file)?;
            let rhos: Vec<crate::kernel::Expr> = rho
                .split(',')
                .map(|r| sys.parse_expr(r.trim()))
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Usage(format!("system-dsl: candidate: {e}")))?;
            let flag = derived_flag(&sys, seed).map_err(|e| AnalysisError { module: "flag-analyzer", stage: "derived_flag", message: e.to_string() })?;
            let c = classify(&sys, &flag, &rhos, Provenance::UserDeclared, seed)?;
            let v = invariance_test(&sys, &rhos, plan(cfg), seed);
            let escape = if c.classification == Classification::Rejected && rhos.len() == 1 {
                escape_test(&sys, &rhos[0], seed).as_ref().map(escape_report)
            } else {
                None
            };
            let out = VerifyOutput {
                schema: SCHEMA_VERSION,
                seed,
                rho: rho.clone(),
                classification: match c.classification {
                    Classification::FirstIntegral => "first_integral",
                    Classification::GeneralizedFirstIntegral => "generalized_first_integral",
                    Classification::Rejected => "rejected",
                    Classification::Undetermined => "undetermined",
                },
                certificate: certificate_report_for(&c),
                rejected: (c.classification == Classification::Rejected).then(|| rejected_report(&c)),
                undetermined: (c.classification == Classification::Undetermined).then(|| undetermined_report(&c)),
                invariance: invariance_report(&rhos, &v),
                escape,
            };
            Ok(if text_mode { verify_text(&out) } else { json(&out) })
        }
        Command::Simulate { file, x0, param, schedule, monitor } => {
            let sys = load(file)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut params = sys.domain().sample_params(&mut rng);
            if let Some(ps) = param {
                for kv in ps.split(',').filter(|s| !s.trim().is_empty()) {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Failure::Usage(format!("cli: --param: expected name=value, got `{kv}`")))?;
                    let idx = sys
                        .symbols
                        .params
                        .iter()
                        .position(|(s, _)| s.name() == k.trim())
                        .ok_or_else(|| Failure::Usage(format!("cli: --param: unknown parameter `{}`", k.trim())))?;
                    params[idx] = number(v)?;
                }
            }
            let x0 = match x0 {
                Some(s) => numbers(s)?,
                None => vec![0.0; sys.n()],
            };
            let sched = match schedule {
                Some(s) => parse_schedule(s)?,
                None => random_schedule(&mut rng, sys.m(), cfg.pieces as usize, cfg.horizon),
            };
            let monitors: Vec<crate::kernel::Expr> = match monitor {
                Some(m) => m
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|r| sys.parse_expr(r.trim()))
                    .collect::<Result<_, _>>()
                    .map_err(|e| Failure::Usage(format!("system-dsl: monitor: {e}")))?,
                None => sys.candidates.iter().map(|c| c.rho.clone()).collect(),
            };
            let t = simulate(&sys, &x0, &params, &sched, cfg.step, &monitors)
                .map_err(|e| Failure::Analysis(format!("numeric-verifier: simulate: {e}")))?;
            Ok(t.to_csv())
        }
        Command::Brackets { file } => {
            let sys = load(file)?;
            let fields = system_fields(&sys);
            let depth = cfg.depth as usize;
            let table = bracket_table(&fields, &sys.symbols.states, depth);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Assignment = sys.domain().sample(&mut rng);
            let lc = leaf_controllability(&fields, &sys.symbols.states, &[], &p, depth)
                .map_err(|e| Failure::Analysis(format!("numeric-verifier: bracket_rank: {e}")))?;
            let out = BracketsOutput {
                schema: SCHEMA_VERSION,
                seed,
                depth,
                point: p.states.clone(),
                params: p.params.clone(),
                levels: table
                    .iter()
                    .map(|l| {
                        l.iter()
                            .map(|f| BracketEntry { label: f.label.clone(), field: f.field.0.iter().map(|e| e.to_string()).collect() })
                            .collect()
                    })
                    .collect(),
                rank: lc.rank,
            };
            Ok(if text_mode { brackets_text(&out) } else { json(&out) })
        }
    }
}

fn number(s: &str) -> Result<f64, Failure> {
    let t = s.trim();
    if let Some(q) = parse_rational(t) {
        use num_traits::ToPrimitive;
        return q.to_f64().ok_or_else(|| Failure::Usage(format!("cli: number out of range `{t}`")));
    }
    t.parse::<f64>().map_err(|_| Failure::Usage(format!("cli: expected a number, got `{t}`")))
}

fn numbers(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(number).collect()
}

fn parse_schedule(s: &str) -> Result<ControlSchedule, Failure> {
    let mut pieces = Vec::new();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (d, u) = part
            .split_once(':')
            .ok_or_else(|| Failure::Usage(format!("cli: --schedule: expected duration:u1,u2, got `{part}`")))?;
        let duration = number(d)?;
        if !(duration > 0.0) {
            return Err(Failure::Usage(format!("cli: --schedule: duration must be positive, got `{d}`")));
        }
        pieces.push(SchedulePiece { duration, control: numbers(u)? });
    }
    Ok(ControlSchedule::new(pieces))
}

fn verify_text(v: &VerifyOutput) -> String {
    let mut o = format!("{}: {}\n", v.rho, v.classification);
    if let Some(c) = &v.certificate {
        for i in &c.identities {
            o.push_str(&format!("  certificate: {i}\n"));
        }
    }
    if let Some(r) = &v.rejected {
        o.push_str(&format!("  reason: {}", r.reason));
        if let (Some(d), Some(c)) = (&r.differential, &r.coefficient) {
            o.push_str(&format!(", coefficient of {d} is {c}"));
        }
        o.push('\n');
    }
    if let Some(u) = &v.undetermined {
        o.push_str(&format!("  {}\n", u.reason));
    }
    let i = &v.invariance;
    o.push_str(&format!(
        "  invariance: {} over {} trials ({} aborted, {} unstarted), max |rho| {:e}\n",
        i.verdict, i.trials, i.aborted, i.unstarted, i.max_abs_rho
    ));
    if let Some(e) = &v.escape {
        o.push_str(&format!("  escape: from {:?} with u = {:?}, |rho| = {} at t = {}\n", e.x0, e.control, e.value.abs(), e.time));
    }
    o
}

fn brackets_text(b: &BracketsOutput) -> String {
    let mut o = String::new();
    for (k, l) in b.levels.iter().enumerate() {
        for f in l {
            o.push_str(&format!("depth {}: {} = [{}]\n", k + 1, f.label, f.field.join(", ")));
        }
    }
    o.push_str(&format!("rank {} at {:?}\n", b.rank, b.point));
    o
}
