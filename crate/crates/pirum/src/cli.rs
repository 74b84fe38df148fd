//! The `pirum` command line.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pirum_core::battery::{PairId, ANDERSEN_BLOCKS};
use pirum_core::choice::pair_index_gap;
use pirum_core::estimation::{
    block_bootstrap_with, fit_with, postprocess_consistent, EstimationSpec, FitResult, OptimizerSettings, Scheme,
};
use pirum_core::lottery::parse_pair;
use pirum_core::ordering::ce_gap;
use pirum_core::{
    andersen_battery, build_premium_curve, classify_pair, simulate_dataset, Battery, ChoiceDataset, ChoiceModelSpec,
    GridSpec, Lottery, ModelKind, ModelParams, QuestionSet, UtilityFamily,
};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::io::{self, CurveRow, SummaryRow, VerdictRow};
use crate::parallel::Rayon;
use crate::spec::ModelSpecString;

#[derive(Debug, Parser)]
#[command(name = "pirum", version, about = "Risk-preference elicitation from binary lottery choices")]
pub struct Cli {
    /// `key = value` file with defaults for any flag (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orderedness verdict for one pair or for every battery pair.
    OrderCheck(OrderCheckArgs),
    /// Premium curve of a pair as `theta,premium` CSV.
    PremiumCurve(PremiumCurveArgs),
    /// The battery with its indifference thresholds.
    Battery(BatteryArgs),
    /// Synthetic choices drawn from a model.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of a model to a choice file.
    Estimate(EstimateArgs),
    /// Point estimates plus block-bootstrap standard errors.
    Bootstrap(BootstrapArgs),
    /// Fits several models and counts which explains each subject best.
    ModelCompare(ModelCompareArgs),
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    /// First risk parameter of the grid [default: -20].
    #[arg(long, allow_negative_numbers = true)]
    pub grid_start: Option<f64>,
    /// Last risk parameter of the grid [default: 20].
    #[arg(long, allow_negative_numbers = true)]
    pub grid_stop: Option<f64>,
    /// Grid spacing [default: 0.01].
    #[arg(long)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OrderCheckArgs {
    /// Pair written `<X>|<Y>`, each lottery as `x1:p1,x2:p2,...`.
    #[arg(long, conflicts_with = "battery_pairs")]
    pub pair: Option<String>,
    /// Check all battery pairs instead of a single one.
    #[arg(long)]
    pub battery_pairs: bool,
    /// Label for the pair in the output [default: pair].
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub family: Option<UtilityFamily>,
    /// Monotonicity slack in money units [default: 1e-9 times the outcome span].
    #[arg(long)]
    pub slack: Option<f64>,
    /// Battery CSV to use instead of the built-in one.
    #[arg(long)]
    pub battery: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct PremiumCurveArgs {
    #[arg(long, conflicts_with = "battery_pair")]
    pub pair: Option<String>,
    /// Battery pair id such as `b4q5`.
    #[arg(long)]
    pub battery_pair: Option<String>,
    #[arg(long)]
    pub family: Option<UtilityFamily>,
    /// Add a `ce_diff` column, `CE(Y) - CE(X)`.
    #[arg(long)]
    pub with_ce: bool,
    /// Add a `coneu_diff` column, the contextual index of `Y` minus that of `X`.
    #[arg(long)]
    pub with_coneu: bool,
    #[arg(long)]
    pub battery: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct BatteryArgs {
    /// Family of the indifference thresholds [default: crra].
    #[arg(long)]
    pub family: Option<UtilityFamily>,
    /// Battery CSV to validate and re-emit instead of the built-in one.
    #[arg(long)]
    pub battery: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model spec `model=..;family=..;theta=..;lambda=..;kappa=..`.
    #[arg(long)]
    pub model: Option<ModelSpecString>,
    #[arg(long)]
    pub n_subjects: Option<usize>,
    /// Draw each subject's risk parameter uniformly from `lo,hi` instead of
    /// using `theta` from the model spec.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_range: Option<String>,
    /// `full`, `a`, `b`, or `mixed` (cycling through the three) [default: full].
    #[arg(long)]
    pub question_set: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub battery: Option<String>,
    /// Also write the true parameters of every subject here.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct OptimizerArgs {
    /// Population of the global stage [default: 50].
    #[arg(long)]
    pub population: Option<usize>,
    /// Generations of the global stage [default: 100].
    #[arg(long)]
    pub generations: Option<usize>,
    /// Population of the outer homoskedastic search [default: 20].
    #[arg(long)]
    pub outer_population: Option<usize>,
    /// Generations of the outer homoskedastic search [default: 25].
    #[arg(long)]
    pub outer_generations: Option<usize>,
    /// Gradient-norm tolerance of the local stage [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of the local stage [default: 200].
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Choice CSV with header `subject_id,block,question,response`.
    #[arg(long)]
    pub choices: Option<String>,
    #[arg(long)]
    pub battery: Option<String>,
    /// Model name or spec string; only `model` and `family` are used.
    #[arg(long)]
    pub model: Option<ModelSpecString>,
    #[arg(long)]
    pub family: Option<UtilityFamily>,
    /// `pooled`, `homo` or `hetero`.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Solve premia exactly instead of interpolating precomputed curves.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Replace estimates of error-free subjects by the midpoint of their
    /// consistent range (individual fits only).
    #[arg(long)]
    pub consistent: bool,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Number of bootstrap replicates [default: 200].
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
    /// Append the summary row to `--out`, writing the header only for a new file.
    #[arg(long)]
    pub append: bool,
}

#[derive(Debug, Args)]
pub struct ModelCompareArgs {
    #[arg(long)]
    pub choices: Option<String>,
    #[arg(long)]
    pub battery: Option<String>,
    #[arg(long)]
    pub family: Option<UtilityFamily>,
    /// Comma-separated models [default: eu,ce,pi,rpm,coneu].
    #[arg(long)]
    pub models: Option<String>,
    /// `hetero` or `homo` [default: hetero].
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Per-subject log-likelihoods of every model.
    #[arg(long)]
    pub out: Option<String>,
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 2 for usage errors, 1 otherwise.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else {
                let _ = write!(stdout, "{}", e.render());
                0
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Error {
    Error::Usage(e.to_string())
}

pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let job = plan(cli.command, &cfg)?;
    cfg.check_unused()?;
    cfg.echo(stderr)?;
    job.run(stdout, stderr)
}

fn grid(cfg: &Config, g: &GridArgs) -> Result<GridSpec> {
    let d = GridSpec::default();
    let spec = GridSpec {
        start: cfg.resolve("grid_start", g.grid_start, d.start)?,
        stop: cfg.resolve("grid_stop", g.grid_stop, d.stop)?,
        step: cfg.resolve("grid_step", g.grid_step, d.step)?,
    };
    spec.validate().map_err(usage)?;
    Ok(spec)
}

fn optimizer(cfg: &Config, o: &OptimizerArgs) -> Result<OptimizerSettings> {
    let d = OptimizerSettings::default();
    let s = OptimizerSettings {
        population: cfg.resolve("population", o.population, d.population)?,
        generations: cfg.resolve("generations", o.generations, d.generations)?,
        outer_population: cfg.resolve("outer_population", o.outer_population, d.outer_population)?,
        outer_generations: cfg.resolve("outer_generations", o.outer_generations, d.outer_generations)?,
        local_tolerance: cfg.resolve("tol", o.tol, d.local_tolerance)?,
        max_local_iterations: cfg.resolve("max_iter", o.max_iter, d.max_local_iterations)?,
        seed: cfg.resolve("seed", o.seed, d.seed)?,
    };
    if s.population < 2 || s.outer_population < 2 {
        return Err(usage("populations must be at least 2"));
    }
    if !(s.local_tolerance > 0.0) {
        return Err(usage("`--tol` must be positive"));
    }
    Ok(s)
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

fn existing(cfg: &Config, key: &str, flag: Option<String>) -> Result<Option<PathBuf>> {
    match cfg.resolve_opt(key, flag)? {
        Some(p) => {
            let p = PathBuf::from(p);
            if !p.is_file() {
                return Err(usage(format!("`--{}` file {} does not exist", key.replace('_', "-"), p.display())));
            }
            Ok(Some(p))
        }
        None => Ok(None),
    }
}

fn output(cfg: &Config, flag: Option<String>) -> Result<Option<PathBuf>> {
    Ok(cfg.resolve_opt("out", flag)?.map(PathBuf::from))
}

/// Battery source: a CSV file or the built-in payoffs, with thresholds for
/// `family` on `scan`.
#[derive(Debug, Clone)]
struct BatterySource {
    path: Option<PathBuf>,
    family: UtilityFamily,
    scan: GridSpec,
}

impl BatterySource {
    fn load(&self) -> Result<Battery> {
        match &self.path {
            Some(p) => io::load_battery(p, self.family, &self.scan),
            None if self.family == UtilityFamily::Crra && self.scan == GridSpec::default() => Ok(andersen_battery()),
            None => Ok(Battery::from_blocks(&ANDERSEN_BLOCKS, self.family, &self.scan)?),
        }
    }
}

fn parse_pair_arg(s: &str) -> Result<(Lottery, Lottery)> {
    parse_pair(s).map_err(|e| usage(format!("--pair: {e}")))
}

#[derive(Debug)]
enum Job {
    OrderCheck { pairs: PairSource, family: UtilityFamily, slack: Option<f64>, grid: GridSpec, out: Option<PathBuf> },
    PremiumCurve {
        pair: PairSource,
        family: UtilityFamily,
        grid: GridSpec,
        with_ce: bool,
        with_coneu: bool,
        out: Option<PathBuf>,
    },
    Battery { source: BatterySource, out: Option<PathBuf> },
    Simulate {
        spec: ModelSpecString,
        n: usize,
        theta_range: Option<(f64, f64)>,
        sets: Vec<QuestionSet>,
        seed: u64,
        battery: BatterySource,
        truth: Option<PathBuf>,
        out: Option<PathBuf>,
    },
    Estimate { fit: FitPlan, consistent: bool, out: Option<PathBuf> },
    Bootstrap { fit: FitPlan, reps: usize, out: Option<PathBuf>, append: bool },
    ModelCompare { fits: Vec<FitPlan>, out: Option<PathBuf> },
}

#[derive(Debug, Clone)]
enum PairSource {
    Given { id: String, x: Lottery, y: Lottery },
    BatteryPair { id: PairId, battery: BatterySource },
    AllBattery(BatterySource),
}

impl PairSource {
    fn pairs(&self) -> Result<Vec<(String, Lottery, Lottery)>> {
        Ok(match self {
            PairSource::Given { id, x, y } => vec![(id.clone(), x.clone(), y.clone())],
            PairSource::BatteryPair { id, battery } => {
                let b = battery.load()?;
                let j = b.index_of(*id).ok_or_else(|| Error::Invalid(format!("pair {id} is not in the battery")))?;
                let p = &b.pairs()[j];
                vec![(id.to_string(), p.x.clone(), p.y.clone())]
            }
            PairSource::AllBattery(battery) => {
                battery.load()?.pairs().iter().map(|p| (p.id.to_string(), p.x.clone(), p.y.clone())).collect()
            }
        })
    }
}

#[derive(Debug, Clone)]
struct FitPlan {
    spec: EstimationSpec,
    choices: PathBuf,
    battery: BatterySource,
}

impl FitPlan {
    fn resolve(cfg: &Config, a: &FitArgs, default_scheme: Scheme) -> Result<Self> {
        let choices = existing(cfg, "choices", a.choices.clone())?.ok_or_else(|| usage("`--choices` is required"))?;
        let model: ModelSpecString = cfg.require("model", a.model)?;
        let family = cfg.resolve("family", a.family.or(model.family), UtilityFamily::Crra)?;
        let scheme = cfg.resolve("scheme", a.scheme, default_scheme)?;
        let mut spec = EstimationSpec::new(model.kind, family, scheme);
        spec.optimizer = optimizer(cfg, &a.optimizer)?;
        spec.grid = grid(cfg, &a.grid)?;
        spec.exact = cfg.resolve("exact", flag(a.exact), false)?;
        let battery = BatterySource { path: existing(cfg, "battery", a.battery.clone())?, family: UtilityFamily::Crra, scan: GridSpec::default() };
        Ok(FitPlan { spec, choices, battery })
    }

    fn data(&self) -> Result<ChoiceDataset> {
        io::load_choices(&self.choices, &self.battery.load()?)
    }

    fn fit(&self, data: &ChoiceDataset) -> Result<FitResult> {
        let ev = self.spec.evaluator(data.battery())?;
        Ok(fit_with(&self.spec, data, &ev, &Rayon)?)
    }
}

fn plan(cmd: Command, cfg: &Config) -> Result<Job> {
    Ok(match cmd {
        Command::OrderCheck(a) => {
            let family = cfg.resolve("family", a.family, UtilityFamily::Crra)?;
            let grid = grid(cfg, &a.grid)?;
            let slack = cfg.resolve_opt("slack", a.slack)?;
            if slack.is_some_and(|s| !(s >= 0.0)) {
                return Err(usage("`--slack` must be non-negative"));
            }
            let battery = BatterySource { path: existing(cfg, "battery", a.battery)?, family: UtilityFamily::Crra, scan: GridSpec::default() };
            let pairs = match (cfg.resolve_opt("pair", a.pair)?, a.battery_pairs) {
                (Some(p), false) => {
                    let (x, y) = parse_pair_arg(&p)?;
                    PairSource::Given { id: cfg.resolve("id", a.id, "pair".to_string())?, x, y }
                }
                (None, true) => PairSource::AllBattery(battery),
                _ => return Err(usage("give exactly one of `--pair` and `--battery-pairs`")),
            };
            Job::OrderCheck { pairs, family, slack, grid, out: output(cfg, a.out)? }
        }
        Command::PremiumCurve(a) => {
            let family = cfg.resolve("family", a.family, UtilityFamily::Crra)?;
            let grid = grid(cfg, &a.grid)?;
            let battery = BatterySource { path: existing(cfg, "battery", a.battery)?, family: UtilityFamily::Crra, scan: GridSpec::default() };
            let pair = match (cfg.resolve_opt("pair", a.pair)?, cfg.resolve_opt("battery_pair", a.battery_pair)?) {
                (Some(p), None) => {
                    let (x, y) = parse_pair_arg(&p)?;
                    PairSource::Given { id: "pair".into(), x, y }
                }
                (None, Some(id)) => PairSource::BatteryPair { id: id.parse().map_err(usage)?, battery },
                _ => return Err(usage("give exactly one of `--pair` and `--battery-pair`")),
            };
            Job::PremiumCurve {
                pair,
                family,
                grid,
                with_ce: cfg.resolve("with_ce", flag(a.with_ce), false)?,
                with_coneu: cfg.resolve("with_coneu", flag(a.with_coneu), false)?,
                out: output(cfg, a.out)?,
            }
        }
        Command::Battery(a) => {
            let family = cfg.resolve("family", a.family, UtilityFamily::Crra)?;
            let scan = grid(cfg, &a.grid)?;
            let source = BatterySource { path: existing(cfg, "battery", a.battery)?, family, scan };
            Job::Battery { source, out: output(cfg, a.out)? }
        }
        Command::Simulate(a) => {
            let spec: ModelSpecString = cfg.require("model", a.model)?;
            let n: usize = cfg.require("n_subjects", a.n_subjects)?;
            if n == 0 {
                return Err(usage("`--n-subjects` must be positive"));
            }
            let theta_range = match cfg.resolve_opt("theta_range", a.theta_range)? {
                Some(r) => {
                    let (lo, hi) = r.split_once(',').ok_or_else(|| usage("`--theta-range` is written `lo,hi`"))?;
                    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("`{s}` is not a number")));
                    let (lo, hi) = (num(lo)?, num(hi)?);
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(usage("`--theta-range` needs finite `lo <= hi`"));
                    }
                    Some((lo, hi))
                }
                None => None,
            };
            // validate the rest of the spec now
            let probe = ModelSpecString { theta: spec.theta.or(theta_range.map(|r| r.0)), ..spec };
            probe.complete()?;
            let sets = match cfg.resolve("question_set", a.question_set, "full".to_string())?.as_str() {
                "mixed" => QuestionSet::ALL.to_vec(),
                s => vec![s.parse::<QuestionSet>().map_err(usage)?],
            };
            let family = spec.family.unwrap_or(UtilityFamily::Crra);
            Job::Simulate {
                spec,
                n,
                theta_range,
                sets,
                seed: cfg.resolve("seed", a.seed, 0)?,
                battery: BatterySource { path: existing(cfg, "battery", a.battery)?, family: if family == UtilityFamily::Crra { family } else { UtilityFamily::Crra }, scan: GridSpec::default() },
                truth: cfg.resolve_opt("truth", a.truth)?.map(PathBuf::from),
                out: output(cfg, a.out)?,
            }
        }
        Command::Estimate(a) => {
            let fit = FitPlan::resolve(cfg, &a.fit, Scheme::Pooled)?;
            let consistent = cfg.resolve("consistent", flag(a.consistent), false)?;
            if consistent && fit.spec.scheme != Scheme::Heteroskedastic {
                return Err(usage("`--consistent` needs `--scheme hetero`"));
            }
            Job::Estimate { fit, consistent, out: output(cfg, a.out)? }
        }
        Command::Bootstrap(a) => {
            let fit = FitPlan::resolve(cfg, &a.fit, Scheme::Pooled)?;
            if fit.spec.scheme == Scheme::Heteroskedastic {
                return Err(usage("the bootstrap needs `--scheme pooled` or `--scheme homo`"));
            }
            let reps = cfg.resolve("reps", a.reps, 200)?;
            if reps < 2 {
                return Err(usage("`--reps` must be at least 2"));
            }
            let out = output(cfg, a.out)?;
            let append = cfg.resolve("append", flag(a.append), false)?;
            if append && out.is_none() {
                return Err(usage("`--append` needs `--out`"));
            }
            Job::Bootstrap { fit, reps, out, append }
        }
        Command::ModelCompare(a) => {
            let models = cfg.resolve("models", a.models, "eu,ce,pi,rpm,coneu".to_string())?;
            let kinds = models
                .split(',')
                .map(|m| m.parse::<ModelKind>().map_err(usage))
                .collect::<Result<Vec<_>>>()?;
            if kinds.is_empty() {
                return Err(usage("`--models` is empty"));
            }
            let base = FitArgs {
                choices: a.choices,
                battery: a.battery,
                model: Some(ModelSpecString { kind: kinds[0], family: None, theta: None, lambda: None, kappa: None }),
                family: a.family,
                scheme: a.scheme,
                exact: a.exact,
                optimizer: a.optimizer,
                grid: a.grid,
            };
            let first = FitPlan::resolve(cfg, &base, Scheme::Heteroskedastic)?;
            if first.spec.scheme == Scheme::Pooled {
                return Err(usage("model comparison needs individual risk parameters (`homo` or `hetero`)"));
            }
            let fits = kinds
                .into_iter()
                .map(|k| FitPlan { spec: EstimationSpec { model: k, ..first.spec }, ..first.clone() })
                .collect();
            Job::ModelCompare { fits, out: output(cfg, a.out)? }
        }
    })
}

/// Writes to `path`, or to `stdout` when absent.
fn emit(path: &Option<PathBuf>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(io::create(p)?);
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn curve_rows(id: &str, family: UtilityFamily, x: &Lottery, y: &Lottery, grid: &GridSpec, with_ce: bool, with_coneu: bool) -> Result<Vec<CurveRow>> {
    let ctx = |e: pirum_core::Error| Error::Invalid(format!("pair {id}: {e}"));
    let curve = build_premium_curve(family, x, y, grid).map_err(ctx)?;
    curve
        .thetas()
        .iter()
        .zip(curve.values())
        .map(|(&theta, &premium)| {
            Ok(CurveRow {
                theta,
                premium,
                ce_diff: with_ce.then(|| ce_gap(family, theta, x, y)),
                coneu_diff: if with_coneu {
                    Some(-pair_index_gap(ModelKind::ConEu, family, theta, x, y).map_err(ctx)?)
                } else {
                    None
                },
            })
        })
        .collect()
}

impl Job {
    fn run(self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
        match self {
            Job::OrderCheck { pairs, family, slack, grid, out } => {
                let rows = pairs
                    .pairs()?
                    .into_iter()
                    .map(|(id, x, y)| {
                        let v = classify_pair(family, &x, &y, &grid, slack)
                            .map_err(|e| Error::Invalid(format!("pair {id}: {e}")))?;
                        Ok(VerdictRow::new(id, &v))
                    })
                    .collect::<Result<Vec<_>>>()?;
                emit(&out, stdout, |w| io::write_verdicts(w, &rows))
            }
            Job::PremiumCurve { pair, family, grid, with_ce, with_coneu, out } => {
                let (id, x, y) = pair.pairs()?.remove(0);
                let rows = curve_rows(&id, family, &x, &y, &grid, with_ce, with_coneu)?;
                emit(&out, stdout, |w| io::write_curve(w, &rows))
            }
            Job::Battery { source, out } => {
                let b = source.load()?;
                let t: Vec<f64> = b.thresholds(QuestionSet::Full40);
                let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, z), v| (a.min(*v), z.max(*v)));
                writeln!(stderr, "# {} pairs, {} finite thresholds, min {lo:.4}, max {hi:.4}", b.len(), t.len())?;
                emit(&out, stdout, |w| io::write_battery(w, &b))
            }
            Job::Simulate { spec, n, theta_range, sets, seed, battery, truth, out } => {
                let battery = battery.load()?;
                // risk parameters come from their own stream, apart from the response streams
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX);
                let specs: Vec<ChoiceModelSpec> = (0..n)
                    .map(|_| {
                        let theta = match theta_range {
                            Some((lo, hi)) if hi > lo => rng.gen_range(lo..hi),
                            Some((lo, _)) => lo,
                            None => spec.theta.unwrap(),
                        };
                        ModelSpecString { theta: Some(theta), ..spec }.complete()
                    })
                    .collect::<Result<_>>()?;
                let per_subject: Vec<QuestionSet> = (0..n).map(|i| sets[i % sets.len()]).collect();
                let data = simulate_dataset(&specs, &battery, &per_subject, seed)?;
                if let Some(path) = &truth {
                    let rows: Vec<(String, ModelParams)> =
                        data.subjects().iter().zip(&specs).map(|(s, sp)| (s.id.clone(), sp.params)).collect();
                    emit(&Some(path.clone()), stdout, |w| io::write_truth(w, &rows))?;
                }
                emit(&out, stdout, |w| io::write_choices(w, &data))
            }
            Job::Estimate { fit, consistent, out } => {
                let data = fit.data()?;
                let mut result = fit.fit(&data)?;
                if consistent {
                    result = postprocess_consistent(&result, &data)?;
                }
                report(stderr, &result)?;
                emit(&out, stdout, |w| io::write_fit(w, &result.estimates))
            }
            Job::Bootstrap { fit, reps, out, append } => {
                let data = fit.data()?;
                let ev = fit.spec.evaluator(data.battery())?;
                let point = fit_with(&fit.spec, &data, &ev, &Rayon)?;
                report(stderr, &point)?;
                let boot = block_bootstrap_with(&fit.spec, &data, reps, fit.spec.optimizer.seed, &ev, &Rayon)?;
                writeln!(stderr, "# bootstrap: {} replicates, {} failed", boot.reps, boot.failed)?;
                let p = point.estimates[0].params;
                let row = SummaryRow {
                    model: fit.spec.model.name().to_string(),
                    gamma: (fit.spec.scheme == Scheme::Pooled).then_some(p.theta),
                    se_gamma: boot.se_theta,
                    lambda: p.lambda,
                    se_lambda: Some(boot.se_lambda),
                    kappa: p.kappa,
                    se_kappa: Some(boot.se_kappa),
                };
                match (&out, append) {
                    (Some(path), true) => {
                        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
                        let file = OpenOptions::new()
                            .create(true)
                            .append(true)
                            .open(path)
                            .map_err(|source| Error::File { path: path.clone(), source })?;
                        io::write_summary(file, &[row], fresh)
                    }
                    _ => emit(&out, stdout, |w| io::write_summary(w, &[row], true)),
                }
            }
            Job::ModelCompare { fits, out } => {
                let data = fits[0].data()?;
                let mut columns: Vec<(ModelKind, Vec<f64>)> = Vec::new();
                for plan in &fits {
                    let r = plan.fit(&data)?;
                    writeln!(stderr, "# {}: total log-likelihood {}", plan.spec.model, r.log_likelihood)?;
                    columns.push((plan.spec.model, r.estimates.iter().map(|e| e.log_likelihood).collect()));
                }
                let (counts, ties, best) = best_counts(&columns, data.len());
                writeln!(stdout, "model,best_count")?;
                for ((k, _), c) in columns.iter().zip(&counts) {
                    writeln!(stdout, "{k},{c}")?;
                }
                writeln!(stdout, "tie,{ties}")?;
                if let Some(path) = &out {
                    let mut w = csv::WriterBuilder::new().from_writer(io::create(path)?);
                    let mut header = vec!["subject_id".to_string()];
                    header.extend(columns.iter().map(|(k, _)| k.to_string()));
                    header.push("best".into());
                    w.write_record(&header)?;
                    for (i, s) in data.subjects().iter().enumerate() {
                        let mut rec = vec![s.id.clone()];
                        rec.extend(columns.iter().map(|(_, v)| v[i].to_string()));
                        rec.push(best[i].map_or("tie".to_string(), |k| k.to_string()));
                        w.write_record(&rec)?;
                    }
                    w.flush()?;
                }
                Ok(())
            }
        }
    }
}

/// Log-likelihoods closer than this count as a tie between models.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Per-model counts of subjects each model explains best, the number of
/// subjects where the best value is shared, and the winner per subject.
pub fn best_counts(columns: &[(ModelKind, Vec<f64>)], subjects: usize) -> (Vec<usize>, usize, Vec<Option<ModelKind>>) {
    let mut counts = vec![0; columns.len()];
    let mut ties = 0;
    let mut best = Vec::with_capacity(subjects);
    for i in 0..subjects {
        let top = columns.iter().map(|(_, v)| v[i]).fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..columns.len()).filter(|&m| columns[m].1[i] >= top - TIE_TOLERANCE).collect();
        if winners.len() == 1 {
            counts[winners[0]] += 1;
            best.push(Some(columns[winners[0]].0));
        } else {
            ties += 1;
            best.push(None);
        }
    }
    (counts, ties, best)
}

fn report(stderr: &mut dyn Write, r: &FitResult) -> Result<()> {
    let d = &r.diagnostics;
    writeln!(
        stderr,
        "# {} {} {}: log-likelihood {}, converged {}, gradient norm {:.3e}, {} evaluations",
        r.model, r.family, r.scheme, r.log_likelihood, d.converged, d.gradient_norm, d.evaluations
    )?;
    Ok(())
}

/// Convenience for callers holding a path.
pub fn read_dataset(path: &Path) -> Result<ChoiceDataset> {
    io::load_choices(path, &andersen_battery())
}
