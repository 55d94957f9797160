//! The four subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pmqkd::decoy::{decoy_entropy_bound, read_gains_csv, DecoyBounds, DecoySettings, ObservedGains};
use pmqkd::keyrate::{asymptotic_rate, bernstein_abort, optimize_keyrate, write_keyrate_csv, KeyRateRow, SolverBudget};
use pmqkd::protocol::{honest_model, source_replacement, SpecDocument, StatisticsVector};
use pmqkd::simrun::{empirical_completeness, CompletenessReport, EcMode, RunConfig, SimError};
use pmqkd::tradeoff::{maximize_dual, LambdaSearch, ObjectiveKind, SolveReport, Solver, TradeoffFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::Cache;
use crate::config::{EpsConfig, ProtocolSource, SweepConfig};
use crate::error::{config_error, CliError, CliResult, ConfigContext, RuntimeContext};

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Global {
    pub seed: u64,
    /// Iteration cap for each convex solve.
    pub budget: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

pub fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).runtime(&format!("cannot write {}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).runtime("cannot write to stdout"),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- bound

pub struct BoundArgs {
    pub source: ProtocolSource,
    pub gamma: f64,
    pub p: f64,
    pub stats: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub gap_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundOutcome {
    pub tradeoff: TradeoffFunction,
    pub report: SolveReport,
    pub target: StatisticsVector,
    pub value_at_target: f64,
}

#[derive(Serialize)]
struct BoundKey<'a> {
    spec: &'a SpecDocument,
    target: &'a [f64],
    max_evals: usize,
    solve_max_iter: usize,
    seed: u64,
}

fn read_stats(path: &Path, labels: &[String]) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).config(&format!("cannot read statistics file {}", path.display()))?;
    let stats: StatisticsVector = serde_json::from_str(&text).config("statistics file")?;
    labels
        .iter()
        .map(|l| stats.get(l).ok_or_else(|| config_error(format!("statistics file lacks symbol '{l}'"))))
        .collect()
}

pub fn cmd_bound(args: &BoundArgs, global: &Global) -> CliResult<BoundOutcome> {
    let spec = args.source.load(args.gamma)?;
    let probs = match &args.stats {
        Some(path) => read_stats(path, &spec.c_labels)?,
        None => honest_model(&spec, args.p).config("honest statistics")?.0.probs,
    };
    let target = StatisticsVector { labels: spec.c_labels.clone(), probs };
    let mut search = LambdaSearch { kind: ObjectiveKind::Full, seed: global.seed, ..Default::default() };
    if let Some(cap) = global.budget {
        search.solve_max_iter = cap;
    }
    let doc = SpecDocument::from_spec(&spec);
    let key = Cache::key(
        "bound",
        &BoundKey {
            spec: &doc,
            target: &target.probs,
            max_evals: search.max_evals,
            solve_max_iter: search.solve_max_iter,
            seed: global.seed,
        },
    );
    let cache = global.cache_dir.as_deref().map(Cache::new);
    let cached = cache.as_ref().and_then(|c| c.load::<BoundOutcome>("bound", &key));
    let outcome = match cached {
        Some(hit) => {
            eprintln!("cache hit {key}");
            hit
        }
        None => {
            let ops = source_replacement(&spec).config("protocol")?;
            let solver = Solver::new(&ops);
            let choice = maximize_dual(&solver, &target.probs, &search).runtime("slope search")?;
            let (c, _, report) = solver
                .certified_c(ObjectiveKind::Full, &choice.lambda, 1e-7, search.solve_max_iter.max(10_000))
                .runtime("certified offset")?;
            let tradeoff =
                TradeoffFunction::affine(spec.c_labels.clone(), choice.lambda, c).runtime("tradeoff function")?;
            let value_at_target = tradeoff.evaluate(&target.probs);
            let outcome = BoundOutcome { tradeoff, report, target, value_at_target };
            if let Some(c) = &cache {
                c.store("bound", &key, &outcome);
            }
            outcome
        }
    };
    let mut tf_text = outcome.tradeoff.to_json();
    tf_text.push('\n');
    write_output(args.out.as_deref(), &tf_text)?;
    let report_text = to_json(&outcome.report);
    match (&args.report, &args.out) {
        (Some(path), _) => write_output(Some(path), &report_text)?,
        (None, Some(out)) => write_output(Some(&sidecar(out)), &report_text)?,
        (None, None) => eprint!("{report_text}"),
    }
    if !(outcome.report.gap <= args.gap_tol) {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "solver gap {:e} exceeds tolerance {:e}",
            outcome.report.gap,
            args.gap_tol
        )));
    }
    Ok(outcome)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".report.json");
    out.with_file_name(name)
}

// ---------------------------------------------------------------- keyrate

#[derive(Clone, Debug)]
enum Job {
    Asymptotic { p: f64 },
    Finite { p: f64, n: u64, s: u64 },
}

pub fn cmd_keyrate(sweep: &SweepConfig, global: &Global) -> CliResult<Vec<KeyRateRow>> {
    sweep.validate()?;
    let spec = sweep.source()?.load(0.5)?;
    let budget: SolverBudget = sweep.budget.to_budget(global.budget);
    // parameters are checked up front so that bad budgets fail as config errors
    for &n in &sweep.n {
        for &s in &sweep.s {
            sweep.params.to_params(n, s)?;
        }
    }
    let mut jobs = Vec::new();
    for &p in &sweep.p {
        if sweep.asymptotic {
            jobs.push(Job::Asymptotic { p });
        }
        for &n in &sweep.n {
            for &s in &sweep.s {
                jobs.push(Job::Finite { p, n, s });
            }
        }
    }
    let rows: Vec<KeyRateRow> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Asymptotic { p } => match asymptotic_rate(&spec, p, &budget) {
                Ok(r) => KeyRateRow::asymptotic(&r),
                Err(e) => {
                    eprintln!("asymptotic point p = {p} failed: {e}");
                    let mut row = KeyRateRow::failed(p, 0, 0);
                    row.n = "asymptotic".into();
                    row.s = String::new();
                    row
                }
            },
            Job::Finite { p, n, s } => {
                let params = sweep.params.to_params(n, s).expect("checked above");
                match optimize_keyrate(&spec, p, &params, &budget) {
                    Ok(r) => KeyRateRow::from_result(&r),
                    Err(e) => {
                        eprintln!("point p = {p}, n = {n}, s = {s} failed: {e}");
                        KeyRateRow::failed(p, n, s)
                    }
                }
            }
        })
        .collect();
    let mut buf = Vec::new();
    write_keyrate_csv(&mut buf, &rows).runtime("CSV encoding")?;
    write_output(sweep.output.as_deref(), &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    Ok(rows)
}

// ---------------------------------------------------------------- simulate

pub struct SimulateArgs {
    pub source: ProtocolSource,
    pub p: f64,
    pub n: u64,
    pub trials: u64,
    pub key_length: Option<u64>,
    pub flip_rate: Option<f64>,
    pub params: EpsConfig,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub p: f64,
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub gamma: f64,
    pub k_ca: f64,
    pub delta: f64,
    pub lambda_ec: u64,
    pub key_length: u64,
    pub kv_hash_len: usize,
    pub flip_rate: Option<f64>,
    /// Analytic bound on the statistical-check abort probability.
    pub bernstein_bound: f64,
    pub result: CompletenessReport,
}

pub fn cmd_simulate(args: &SimulateArgs, global: &Global) -> CliResult<SimulationSummary> {
    if args.trials == 0 {
        return Err(config_error("--trials must be at least 1"));
    }
    if !(0.0..=1.0).contains(&args.p) {
        return Err(config_error(format!("p = {} outside [0, 1]", args.p)));
    }
    let spec = args.source.load(0.5)?;
    let params = args.params.to_params(args.n, 1)?;
    let budget = crate::config::BudgetConfig::default().to_budget(global.budget);
    let result = optimize_keyrate(&spec, args.p, &params, &budget).runtime("key-rate plan")?;
    let mut cfg = RunConfig::from_keyrate(&spec, &result, &params, global.seed).config("run configuration")?;
    if let Some(l) = args.key_length {
        cfg.key_length = l;
    }
    if let Some(r) = args.flip_rate {
        cfg.ec = EcMode::Faulty { flip_rate: r };
    }
    let report = match empirical_completeness(&cfg, args.trials) {
        Ok(r) => r,
        Err(e @ (SimError::Rounds(_) | SimError::Config(_))) => return Err(CliError::Config(e.into())),
        Err(e) => return Err(CliError::Runtime(e.into())),
    };
    let summary = SimulationSummary {
        p: args.p,
        n: args.n,
        trials: args.trials,
        seed: global.seed,
        gamma: result.gamma,
        k_ca: cfg.plan.k_ca,
        delta: cfg.plan.delta,
        lambda_ec: cfg.plan.lambda_ec,
        key_length: cfg.key_length,
        kv_hash_len: cfg.kv_hash_len(),
        flip_rate: args.flip_rate,
        bernstein_bound: bernstein_abort(cfg.plan.delta, cfg.n, &cfg.tradeoff),
        result: report,
    };
    write_output(args.out.as_deref(), &to_json(&summary))?;
    Ok(summary)
}

// ---------------------------------------------------------------- decoy

pub struct DecoyArgs {
    pub gains: PathBuf,
    pub settings: Option<PathBuf>,
    pub mu: Option<Vec<f64>>,
    pub p_mu: Option<Vec<f64>>,
    pub q_x: f64,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyReport {
    pub settings: DecoySettings,
    pub gains: ObservedGains,
    pub tau0: f64,
    pub tau1: f64,
    /// X-basis vacuum yield lower bound before clamping.
    pub t0: f64,
    /// X-basis single-photon yield lower bound before clamping.
    pub t1: f64,
    /// Z-basis single-photon error upper bound before clamping.
    pub f1: f64,
    pub clamped: DecoyBounds,
    pub entropy_bound: f64,
}

fn triple(name: &str, v: &[f64]) -> CliResult<[f64; 3]> {
    v.try_into().map_err(|_| config_error(format!("{name} needs exactly three values, got {}", v.len())))
}

pub fn cmd_decoy(args: &DecoyArgs) -> CliResult<DecoyReport> {
    let settings = match (&args.settings, &args.mu, &args.p_mu) {
        (Some(path), None, None) => {
            let text = fs::read_to_string(path).config(&format!("cannot read {}", path.display()))?;
            let s: DecoySettings = serde_json::from_str(&text).config("decoy settings")?;
            s.validate().config("decoy settings")?;
            s
        }
        (None, Some(mu), Some(p_mu)) => {
            DecoySettings::new(triple("--mu", mu)?, triple("--p-mu", p_mu)?, args.q_x).config("decoy settings")?
        }
        _ => return Err(config_error("give either --settings or both --mu and --p-mu")),
    };
    let file = fs::File::open(&args.gains).config(&format!("cannot open {}", args.gains.display()))?;
    let gains = read_gains_csv(file, &settings).config("gains file")?;
    let raw = DecoyBounds::raw(&gains, &settings);
    let report = DecoyReport {
        tau0: raw.tau0,
        tau1: raw.tau1,
        t0: raw.t0,
        t1: raw.t1,
        f1: raw.f1,
        clamped: raw.clamped(),
        entropy_bound: decoy_entropy_bound(&gains, &settings),
        settings,
        gains,
    };
    write_output(args.out.as_deref(), &to_json(&report))?;
    Ok(report)
}
