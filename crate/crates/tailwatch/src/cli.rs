//! The `tailwatch` command line.
//!
//! Exit codes: 0 success (or alarm raised), 1 stream ended without alarm,
//! 2 usage or parameter error, 3 data error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tailwatch_core::benchmarks::{quanttree_build, Itmcd, ItmcdParams, NnOnline, NnOnlineParams, NpCusum, Odit, SlidingChiSquared};
use tailwatch_core::gem::{partition_nominal, DEFAULT_K};
use tailwatch_core::simulation::{DataSource, GridModel, GridSource, MeanShift, PoolSource};
use tailwatch_core::theory::{self, trial_rng};
use tailwatch_core::{
    DetectorConfig, GemBaseline, NominalBaseline, PcaBaseline, PointSet, ProjectedGemBaseline, RankRule,
    SequentialDetector, TailCusum,
};

use crate::csv_io::{fmt_f64, open_points, read_points_file, CsvOut};
use crate::error::Error;
use crate::harness::{self, TrialOptions, DEFAULT_ROC_WINDOW, DEFAULT_TRIALS};
use crate::model::{Model, ModelFile, Provenance};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NO_ALARM: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(Error::io("<output>", e))
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parameter validation errors map to the usage exit code.
fn param<T>(r: tailwatch_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn same_dim(expected: usize, got: usize) -> CliResult<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Failure::Data(tailwatch_core::Error::DimensionMismatch { expected, got }.into()))
    }
}

fn data<T>(r: tailwatch_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure::Data(e.into()))
}

#[derive(Debug, Parser)]
#[command(name = "tailwatch", version, about = "Nonparametric sequential anomaly detection")]
struct Cli {
    /// Worker threads for Monte Carlo commands.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a nominal baseline from a CSV sample.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Run the detector over a CSV stream.
    Detect(DetectArgs),
    /// False-alarm bounds and approximations.
    Theory(TheoryArgs),
    /// Generate synthetic streams.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Monte Carlo evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Debug, Subcommand)]
enum BaselineCmd {
    /// kNN distance-sum baseline.
    Gem(GemArgs),
    /// Principal-subspace residual baseline.
    Pca(PcaArgs),
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Size of the reference partition; defaults to half the sample.
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long, env = "TAILWATCH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GemArgs {
    #[command(flatten)]
    #[serde(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
}

#[derive(Debug, Args, Serialize)]
struct PcaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    split: SplitArgs,
    /// Minimum retained variance fraction.
    #[arg(long, default_value_t = 0.99, conflicts_with = "r")]
    gamma: f64,
    /// Explicit subspace dimension.
    #[arg(long)]
    r: Option<usize>,
    /// Also build a kNN baseline inside the principal subspace.
    #[arg(long)]
    gem: bool,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Write the full eigenvalue spectrum to this CSV.
    #[arg(long)]
    eigenvalues: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = tailwatch_core::detector::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    h: f64,
    /// Per-step trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Keep zero p-values instead of flooring them at 1/N2.
    #[arg(long)]
    no_floor: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
struct TheoryArgs {
    #[arg(long, default_value_t = tailwatch_core::detector::DEFAULT_ALPHA)]
    alpha: f64,
    /// Thresholds, comma separated.
    #[arg(long, value_delimiter = ',', required_unless_present = "target_afp")]
    h: Vec<f64>,
    /// Report thresholds reaching this false-alarm period instead.
    #[arg(long)]
    target_afp: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum SimulateCmd {
    /// Linearized grid measurements with injected attacks.
    Grid(GridArgs),
    /// Resample rows of two CSV pools around a change point.
    Pool(PoolArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
struct GridModelArgs {
    /// Number of measurements.
    #[arg(long, default_value_t = 80)]
    p: usize,
    /// Number of states.
    #[arg(long, default_value_t = 57)]
    states: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma2: f64,
    /// Seed of the measurement matrix and state.
    #[arg(long, default_value_t = 1)]
    model_seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct GridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridModelArgs,
    #[arg(long, default_value_t = 0.14)]
    attack_mag: f64,
    /// Change point; omit for a nominal stream.
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    steps: u64,
    #[arg(long, env = "TAILWATCH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PoolArgs {
    #[arg(long)]
    pre: PathBuf,
    #[arg(long)]
    post: PathBuf,
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    steps: u64,
    #[arg(long, env = "TAILWATCH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    /// Average detection delay against average false-alarm period.
    Tradeoff(EvalArgs),
    /// True positive rate against false alarm rate.
    Roc(RocArgs),
    /// Average false-alarm period only.
    Afp(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DetectorKind {
    Gem,
    Pca,
    PcaGem,
    Npcusum,
    Odit,
    Itmcd,
    NnOnline,
    Quanttree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Scenario {
    Grid,
    Pool,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long, value_enum, default_value_t = DetectorKind::Gem)]
    detector: DetectorKind,
    #[arg(long, value_enum, default_value_t = Scenario::Grid)]
    scenario: Scenario,
    #[arg(long, value_delimiter = ',', required = true)]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    /// Step cap per trial; defaults to max(100 x approximate AFP, 10^6).
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = tailwatch_core::detector::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, env = "TAILWATCH_SEED", default_value_t = 0)]
    seed: u64,
    /// Use a saved baseline instead of fitting one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Nominal training sample size (grid scenario).
    #[arg(long, default_value_t = 4000)]
    n_train: usize,
    /// Reference partition size; defaults to half the training sample.
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long)]
    r: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridModelArgs,
    #[arg(long, default_value_t = 0.14)]
    attack_mag: f64,
    /// Constant shift added to every coordinate after the change.
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    /// Nominal pool (pool scenario); also the training sample.
    #[arg(long)]
    nominal: Option<PathBuf>,
    /// Anomalous pool (pool scenario).
    #[arg(long)]
    anomalous: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RocArgs {
    #[command(flatten)]
    #[serde(flatten)]
    eval: EvalArgs,
    /// Steps after the change point that still count as detection.
    #[arg(long, default_value_t = DEFAULT_ROC_WINDOW)]
    window: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Baseline(BaselineCmd::Gem(a)) => cmd_baseline_gem(&a),
        Command::Baseline(BaselineCmd::Pca(a)) => cmd_baseline_pca(&a),
        Command::Detect(a) => cmd_detect(&a),
        Command::Theory(a) => cmd_theory(&a),
        Command::Simulate(SimulateCmd::Grid(a)) => cmd_simulate_grid(&a),
        Command::Simulate(SimulateCmd::Pool(a)) => cmd_simulate_pool(&a),
        Command::Eval(EvalCmd::Tradeoff(a)) => cmd_eval(&a, EvalKind::Tradeoff, cli.jobs),
        Command::Eval(EvalCmd::Afp(a)) => cmd_eval(&a, EvalKind::Afp, cli.jobs),
        Command::Eval(EvalCmd::Roc(a)) => cmd_eval(&a.eval, EvalKind::Roc(a.window), cli.jobs),
    }
}

/// Every parameter as `key=value` pairs, for output headers and provenance.
fn echo<T: Serialize>(command: &str, args: &T) -> Vec<(String, String)> {
    let mut out = vec![("command".to_string(), command.to_string())];
    out.push(("tool".into(), concat!("tailwatch ", env!("CARGO_PKG_VERSION")).into()));
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            let s = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            out.push((k, s));
        }
    }
    out
}

fn parameters<T: Serialize>(args: &T) -> BTreeMap<String, serde_json::Value> {
    match serde_json::to_value(args) {
        Ok(serde_json::Value::Object(map)) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_out<'a>(path: Option<&Path>, params: &[(String, String)], columns: &[&str]) -> CliResult<CsvOut<Box<dyn Write + 'a>>> {
    let refs: Vec<(&str, String)> = params.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    Ok(CsvOut::new(output(path)?, &refs, columns)?)
}

fn default_n1(n: usize, n1: Option<usize>) -> usize {
    n1.unwrap_or(n / 2)
}

fn cmd_baseline_gem(a: &GemArgs) -> CliResult<u8> {
    let (data, bytes) = read_points_file(&a.split.input)?;
    let n1 = default_n1(data.len(), a.split.n1);
    let gem = param(GemBaseline::build(&data, n1, a.k, a.split.seed))?;
    println!("kind=gem dim={} N1={} N2={} k={}", gem.dim(), gem.n1(), gem.n2(), gem.k());
    let file = ModelFile { model: Model::Gem(gem), provenance: Provenance::new(&bytes, a.split.seed, parameters(a)) };
    file.save(&a.split.out)?;
    Ok(EXIT_OK)
}

fn cmd_baseline_pca(a: &PcaArgs) -> CliResult<u8> {
    let (data, bytes) = read_points_file(&a.split.input)?;
    let n1 = default_n1(data.len(), a.split.n1);
    let (s1, s2) = param(partition_nominal(&data, n1, a.split.seed))?;
    let rule = match a.r {
        Some(r) => RankRule::Fixed(r),
        None => RankRule::MinVariance(a.gamma),
    };
    let model = if a.gem {
        Model::PcaGem(param(ProjectedGemBaseline::fit(&s1, &s2, rule, a.k, a.split.seed))?)
    } else {
        Model::Pca(param(PcaBaseline::fit(&s1, &s2, rule))?)
    };
    let pca = model.pca().expect("PCA model");
    println!(
        "kind={} dim={} N1={} N2={} r={} gamma={}",
        model.kind(),
        pca.dim(),
        s1.len(),
        s2.len(),
        pca.rank(),
        fmt_f64(pca.gamma_achieved())
    );
    if let Some(path) = &a.eigenvalues {
        let params = echo("baseline pca", a);
        let mut out = csv_out(Some(path), &params, &["index", "eigenvalue", "cumulative_fraction"])?;
        let total: f64 = pca.eigenvalues().iter().sum();
        let mut acc = 0.0;
        for (i, l) in pca.eigenvalues().iter().enumerate() {
            acc += l;
            let frac = if total > 0.0 { acc / total } else { 1.0 };
            out.row([(i + 1).to_string(), fmt_f64(*l), fmt_f64(frac)])?;
        }
        out.flush()?;
    }
    let file = ModelFile { model, provenance: Provenance::new(&bytes, a.split.seed, parameters(a)) };
    file.save(&a.split.out)?;
    Ok(EXIT_OK)
}

fn cmd_detect(a: &DetectArgs) -> CliResult<u8> {
    let mut config = param(DetectorConfig::new(a.alpha, a.h))?;
    config.floor_zero_pvalue = !a.no_floor;
    let file = ModelFile::load(&a.model)?;
    let mut det = data(TailCusum::new(&file.model, config))?;
    let mut trace = match &a.trace {
        Some(p) => Some(csv_out(Some(p), &echo("detect", a), &["t", "score", "p_hat", "s_hat", "g", "alarm"])?),
        None => None,
    };
    let mut alarm = None;
    let mut steps = 0u64;
    for row in open_points(&a.input)? {
        let rec = data(det.step(&row?))?;
        steps = rec.t;
        if let Some(tr) = trace.as_mut() {
            tr.row([
                rec.t.to_string(),
                fmt_f64(rec.score),
                fmt_f64(rec.p_hat),
                fmt_f64(rec.s_hat),
                fmt_f64(rec.g),
                u8::from(rec.alarm).to_string(),
            ])?;
        }
        if rec.alarm {
            alarm = Some(rec.t);
            break;
        }
    }
    if let Some(tr) = trace.as_mut() {
        tr.flush()?;
    }
    match alarm {
        Some(t) => {
            println!("alarm t={t} g={}", fmt_f64(det.state().g));
            Ok(EXIT_OK)
        }
        None => {
            println!("no alarm after {steps} observations g={}", fmt_f64(det.state().g));
            Ok(EXIT_NO_ALARM)
        }
    }
}

#[derive(Debug, Serialize)]
struct TheoryRow {
    alpha: f64,
    h: f64,
    theta: f64,
    lower_bound: f64,
    approximation: f64,
    approximation_interpolated: bool,
    wald: f64,
}

fn theory_row(alpha: f64, h: f64) -> CliResult<TheoryRow> {
    let approx = param(theory::afp_approximation(alpha, h))?;
    Ok(TheoryRow {
        alpha,
        h,
        theta: param(theory::theta_of_alpha(alpha))?,
        lower_bound: param(theory::afp_lower_bound(alpha, h))?,
        approximation: approx.value,
        approximation_interpolated: approx.interpolated,
        wald: param(theory::wald_approximation(alpha, h))?,
    })
}

fn cmd_theory(a: &TheoryArgs) -> CliResult<u8> {
    if !(a.alpha > 0.0 && a.alpha < theory::INV_E) {
        return Err(Failure::Usage(format!(
            "alpha = {} violates the condition alpha < 1/e under which the false-alarm bounds hold",
            a.alpha
        )));
    }
    if let Some(target) = a.target_afp {
        let bound_h = param(theory::threshold_for_bound(a.alpha, target))?;
        let approx_h = param(theory::threshold_for_afp(a.alpha, target))?.value;
        println!(
            "{}",
            serde_json::json!({"alpha": a.alpha, "target_afp": target, "h_lower_bound": bound_h, "h_approximation": approx_h})
        );
        if a.h.is_empty() {
            return Ok(EXIT_OK);
        }
    }
    let rows = a.h.iter().map(|&h| theory_row(a.alpha, h)).collect::<CliResult<Vec<_>>>()?;
    match a.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&rows).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("{text}");
        }
        Format::Csv => {
            let mut out = csv_out(
                None,
                &echo("theory", a),
                &["alpha", "h", "theta", "lower_bound", "approximation", "approximation_interpolated", "wald"],
            )?;
            for r in rows {
                out.row([
                    fmt_f64(r.alpha),
                    fmt_f64(r.h),
                    fmt_f64(r.theta),
                    fmt_f64(r.lower_bound),
                    fmt_f64(r.approximation),
                    r.approximation_interpolated.to_string(),
                    fmt_f64(r.wald),
                ])?;
            }
            out.flush()?;
        }
    }
    Ok(EXIT_OK)
}

fn grid_model(g: &GridModelArgs) -> CliResult<Arc<GridModel>> {
    Ok(Arc::new(param(GridModel::synthetic(g.p, g.states, g.sigma2, g.model_seed))?))
}

fn write_stream(
    path: Option<&Path>,
    params: &[(String, String)],
    dim: usize,
    steps: u64,
    mut next: impl FnMut(u64, &mut Vec<f64>),
) -> CliResult<()> {
    let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut out = csv_out(path, params, &cols)?;
    let mut buf = Vec::with_capacity(dim);
    for t in 1..=steps {
        next(t, &mut buf);
        out.row(buf.iter().map(|v| fmt_f64(*v)))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_simulate_grid(a: &GridArgs) -> CliResult<u8> {
    if a.tau == Some(0) {
        return Err(Failure::Usage("tau must be >= 1".into()));
    }
    let model = grid_model(&a.grid)?;
    let pre = GridSource::nominal(model.clone());
    let post = param(GridSource::new(model.clone(), a.attack_mag))?;
    let mut rng = trial_rng(a.seed, 0);
    write_stream(a.out.as_deref(), &echo("simulate grid", a), model.measurements(), a.steps, |t, buf| {
        if a.tau.is_some_and(|tau| t >= tau) {
            post.sample_into(&mut rng, buf)
        } else {
            pre.sample_into(&mut rng, buf)
        }
    })?;
    Ok(EXIT_OK)
}

fn cmd_simulate_pool(a: &PoolArgs) -> CliResult<u8> {
    if a.tau == Some(0) {
        return Err(Failure::Usage("tau must be >= 1".into()));
    }
    let (pre, _) = read_points_file(&a.pre)?;
    let (post, _) = read_points_file(&a.post)?;
    let pre = data(PoolSource::new(Arc::new(pre)))?;
    let post = data(PoolSource::new(Arc::new(post)))?;
    same_dim(pre.dim(), post.dim())?;
    let mut rng = trial_rng(a.seed, 0);
    write_stream(a.out.as_deref(), &echo("simulate pool", a), pre.dim(), a.steps, |t, buf| {
        if a.tau.is_some_and(|tau| t >= tau) {
            post.sample_into(&mut rng, buf)
        } else {
            pre.sample_into(&mut rng, buf)
        }
    })?;
    Ok(EXIT_OK)
}

enum EvalKind {
    Tradeoff,
    Afp,
    Roc(u64),
}

/// Everything a detector factory needs, shared across trials.
struct Fitted {
    kind: DetectorKind,
    alpha: f64,
    baseline: Option<Arc<Model>>,
    training: Arc<PointSet>,
    seed: u64,
}

impl Fitted {
    fn make(&self, trial: u64) -> tailwatch_core::Result<Box<dyn SequentialDetector + '_>> {
        let dim = self.training.dim();
        let baseline = || self.baseline.clone().expect("baseline fitted for this detector");
        Ok(match self.kind {
            DetectorKind::Gem | DetectorKind::Pca | DetectorKind::PcaGem => {
                Box::new(TailCusum::new(baseline(), DetectorConfig::new(self.alpha, 0.0)?)?)
            }
            DetectorKind::Npcusum => Box::new(NpCusum::new(baseline())?),
            DetectorKind::Odit => Box::new(Odit::new(baseline(), self.alpha)?),
            DetectorKind::Itmcd => Box::new(Itmcd::new(dim, ItmcdParams::default())?),
            DetectorKind::NnOnline => {
                Box::new(NnOnline::new(dim, NnOnlineParams::default(), self.seed.wrapping_add(trial))?)
            }
            DetectorKind::Quanttree => {
                let part = quanttree_build(&self.training, 16, self.seed)?;
                Box::new(SlidingChiSquared::new(part, 256)?)
            }
        })
    }
}

fn fit_baseline(a: &EvalArgs, training: &PointSet) -> CliResult<Option<Arc<Model>>> {
    if let Some(path) = &a.model {
        let m = ModelFile::load(path)?.model;
        same_dim(training.dim(), m.dim())?;
        return Ok(Some(Arc::new(m)));
    }
    let n1 = default_n1(training.len(), a.n1);
    let rule = match a.r {
        Some(r) => RankRule::Fixed(r),
        None => RankRule::MinVariance(a.gamma),
    };
    let model = match a.detector {
        DetectorKind::Itmcd | DetectorKind::NnOnline | DetectorKind::Quanttree => return Ok(None),
        DetectorKind::Pca => {
            let (s1, s2) = param(partition_nominal(training, n1, a.seed))?;
            Model::Pca(param(PcaBaseline::fit(&s1, &s2, rule))?)
        }
        DetectorKind::PcaGem => {
            let (s1, s2) = param(partition_nominal(training, n1, a.seed))?;
            Model::PcaGem(param(ProjectedGemBaseline::fit(&s1, &s2, rule, a.k, a.seed))?)
        }
        _ => Model::Gem(param(GemBaseline::build(training, n1, a.k, a.seed))?),
    };
    Ok(Some(Arc::new(model)))
}

fn cmd_eval(a: &EvalArgs, kind: EvalKind, jobs: Option<usize>) -> CliResult<u8> {
    if a.thresholds.iter().any(|h| h.is_nan()) {
        return Err(Failure::Usage("threshold is NaN".into()));
    }
    let (nominal, anomalous, training): (Box<dyn DataSource + Sync>, Box<dyn DataSource + Sync>, PointSet) =
        match a.scenario {
            Scenario::Grid => {
                let model = grid_model(&a.grid)?;
                let nominal = GridSource::nominal(model.clone());
                let attacked = param(GridSource::new(model.clone(), a.attack_mag))?;
                let mut rng = trial_rng(a.seed, u64::MAX);
                let mut training = PointSet::with_capacity(model.measurements(), a.n_train);
                for _ in 0..a.n_train {
                    data(training.push(&nominal.sample(&mut rng)))?;
                }
                (Box::new(nominal), Box::new(MeanShift::uniform(attacked, a.shift)), training)
            }
            Scenario::Pool => {
                let (Some(np), Some(ap)) = (&a.nominal, &a.anomalous) else {
                    return Err(Failure::Usage("pool scenario needs --nominal and --anomalous".into()));
                };
                let (nom, _) = read_points_file(np)?;
                let (anom, _) = read_points_file(ap)?;
                same_dim(nom.dim(), anom.dim())?;
                let nom = Arc::new(nom);
                let training = (*nom).clone();
                let anom = data(PoolSource::new(Arc::new(anom)))?;
                (Box::new(data(PoolSource::new(nom))?), Box::new(MeanShift::uniform(anom, a.shift)), training)
            }
        };
    let fitted = Fitted {
        kind: a.detector,
        alpha: a.alpha,
        baseline: fit_baseline(a, &training)?,
        training: Arc::new(training),
        seed: a.seed,
    };
    let h_max = a.thresholds.iter().copied().fold(0.0, f64::max);
    let horizon = a.horizon.unwrap_or_else(|| harness::default_horizon(a.alpha, h_max));
    let opts = TrialOptions { trials: a.trials, seed: a.seed, horizon, jobs };
    let make = |trial| fitted.make(trial);
    let mut params = echo("eval", a);
    params.push(("horizon_used".into(), horizon.to_string()));
    let out_path = a.out.as_deref();

    match kind {
        EvalKind::Tradeoff => {
            let pts = harness::tradeoff_curve(&make, nominal.as_ref(), anomalous.as_ref(), &a.thresholds, &opts)?;
            let mut out = csv_out(
                out_path,
                &params,
                &["h", "add", "add_se", "afp", "afp_se", "censored_frac", "add_censored_frac"],
            )?;
            for p in pts {
                out.row([p.h, p.add, p.add_se, p.afp, p.afp_se, p.censored_frac, p.add_censored_frac].map(fmt_f64))?;
            }
            out.flush()?;
        }
        EvalKind::Afp => {
            let mut out = csv_out(out_path, &params, &["h", "afp", "afp_se", "censored_frac", "trials"])?;
            let times =
                harness::stopping_times(&make, nominal.as_ref(), nominal.as_ref(), None, &a.thresholds, &opts)?;
            for (i, &h) in a.thresholds.iter().enumerate() {
                let est = harness::mean_estimate(times.iter().map(|t| t[i].unwrap_or(horizon) as f64));
                let censored = times.iter().filter(|t| t[i].is_none()).count() as f64 / times.len() as f64;
                out.row([fmt_f64(h), fmt_f64(est.mean), fmt_f64(est.std_error), fmt_f64(censored), est.n.to_string()])?;
            }
            out.flush()?;
        }
        EvalKind::Roc(window) => {
            params.push(("window".into(), window.to_string()));
            let pts = harness::roc_curve(&make, nominal.as_ref(), anomalous.as_ref(), &a.thresholds, &opts, window)?;
            let mut out = csv_out(out_path, &params, &["h", "tpr", "far"])?;
            for p in pts {
                out.row([p.h, p.tpr, p.far].map(fmt_f64))?;
            }
            out.flush()?;
        }
    }
    Ok(EXIT_OK)
}
