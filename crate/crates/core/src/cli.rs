//! Command-line front end. [`run`] maps argv to output bytes so every
//! command can be tested without spawning a process.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::exposure::{run_exposure, trace_document, verify_rank_event_equivalence, ExposureError};
use crate::measures::{
    cl_measure, corank_distribution, fw_probability, fw_probability_exact, uniform_reference, MeasureError,
    ReferenceDistribution,
};
use crate::modarith::{IntMatrix, ModArithError, PrecisionPolicy, RingSpec};
use crate::partitions::{count_ssyt, ModuleClass, Partition, PartitionError};
use crate::sampler::{min_entropy, sample_matrix, EntryDistribution, SamplerError};
use crate::spectral::{fourier, psi, spec_set, swap_distribution, FiniteMeasure, SpectralError, SWAP_GAMMA};
use crate::stats::{compare, decay_fit, simulate, ComparisonReport, DecayFit, StatsError, Z95};

pub const THREADS_ENV: &str = "COKERNEL_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precision ceiling: {0}")]
    Precision(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Clap(#[from] clap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Precision(_) => 4,
            CliError::Io(_) => 1,
            CliError::Clap(e) => e.exit_code(),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<ModArithError> for CliError {
    fn from(e: ModArithError) -> Self {
        match e {
            ModArithError::PrecisionCeiling { .. } => CliError::Precision(e.to_string()),
            _ => usage(e),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::DegenerateDistribution { .. } => CliError::Degenerate(e.to_string()),
            SamplerError::Ring(r) => r.into(),
            _ => usage(e),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Ring(r) => r.into(),
            _ => usage(e),
        }
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        usage(e)
    }
}

impl From<ExposureError> for CliError {
    fn from(e: ExposureError) -> Self {
        match e {
            ExposureError::Ring(r) => r.into(),
            _ => usage(e),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Sampler(s) => s.into(),
            SpectralError::Ring(r) => r.into(),
            _ => usage(e),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Sampler(s) => s.into(),
            StatsError::Simulation { index, source } => match source {
                ModArithError::PrecisionCeiling { .. } => CliError::Precision(format!("trial {index}: {source}")),
                other => usage(format!("trial {index}: {other}")),
            },
            _ => usage(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "cokernel-lab", version, about = "Cokernels of random integral matrices: exact laws and Monte Carlo")]
pub struct Cli {
    /// Worker threads (falls back to COKERNEL_LAB_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default values; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact reference probabilities.
    Exact {
        #[command(subcommand)]
        which: ExactCommand,
    },
    /// Sample matrices and tally cokernel classes.
    Simulate(RunArgs),
    /// Simulate and compare against the exact reference law.
    Compare(CompareArgs),
    /// Column exposure trace of one matrix.
    Trace(TraceArgs),
    /// Fourier diagnostics of an entry distribution on Z/MZ.
    Spectral(SpectralArgs),
    /// Number of semi-standard tableaux of a shape with letters 1..n.
    CountTableaux {
        #[arg(long)]
        partition: String,
        #[arg(long)]
        n: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExactCommand {
    /// Cohen–Lenstra mass of a class.
    Cl {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        class: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Cokernel law of Haar n×n matrices over Z_p.
    Fw {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        class: String,
        /// Also print the exact rational value.
        #[arg(long)]
        exact: bool,
    },
    /// Limiting probability of corank k over F_p.
    Rank {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Cokernel law of uniform n×n matrices over Z/NZ.
    Uniform {
        #[arg(long)]
        modulus: u64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        class: String,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Work over Z_p.
    #[arg(long, conflicts_with = "modulus")]
    pub p: Option<u64>,
    /// Work over Z/NZ.
    #[arg(long)]
    pub modulus: Option<u64>,
    /// Matrix size, or a comma-separated list of sizes.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Entry distribution, e.g. bernoulli:0.3 or custom:0=0.5,1=0.5.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// List reference classes whose diagrams have at most this many boxes.
    #[arg(long)]
    pub max_size: Option<u32>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// z-value of the per-class Wilson intervals.
    #[arg(long)]
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub p: Option<u64>,
    /// Matrix file (.json or .csv); otherwise a matrix is sampled.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial index of the sampled matrix.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    #[arg(long)]
    pub jmax: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectralArgs {
    #[arg(long)]
    pub dist: Option<String>,
    /// Group order M of Z/MZ.
    #[arg(long = "mod")]
    pub modulus: u64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = SWAP_GAMMA)]
    pub gamma: f64,
}

/// Defaults read from `--config`; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub p: Option<u64>,
    pub modulus: Option<u64>,
    pub n: Option<NList>,
    pub trials: Option<u64>,
    pub dist: Option<String>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_size: Option<u32>,
    pub z: Option<f64>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub jmax: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NList {
    One(usize),
    Many(Vec<usize>),
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

const DEFAULT_TRIALS: u64 = 10_000;
const DEFAULT_SEED: u64 = 0;
const DEFAULT_TOL: f64 = 1e-12;

/// Settings of a simulate/compare run after merging flags over the config file.
struct Experiment {
    ring: RingSpec,
    ns: Vec<usize>,
    trials: u64,
    dist: EntryDistribution,
    seed: u64,
}

fn parse_ns(s: &str) -> Result<Vec<usize>, CliError> {
    let ns = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| usage(format!("bad --n value {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(usage("matrix sizes must be positive"));
    }
    Ok(ns)
}

fn experiment(args: &RunArgs, cfg: &ConfigFile) -> Result<Experiment, CliError> {
    let ring = match (args.p, args.modulus) {
        (Some(p), _) => RingSpec::padic(p)?,
        (None, Some(m)) => RingSpec::modular(m)?,
        (None, None) => match (cfg.p, cfg.modulus) {
            (Some(p), None) => RingSpec::padic(p)?,
            (None, Some(m)) => RingSpec::modular(m)?,
            _ => return Err(usage("give exactly one of --p or --modulus")),
        },
    };
    let ns = match (&args.n, &cfg.n) {
        (Some(s), _) => parse_ns(s)?,
        (None, Some(NList::One(n))) => parse_ns(&n.to_string())?,
        (None, Some(NList::Many(v))) => parse_ns(&v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","))?,
        (None, None) => return Err(usage("--n is required")),
    };
    let trials = args.trials.or(cfg.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let dist = args.dist.clone().or(cfg.dist.clone()).ok_or_else(|| usage("--dist is required"))?;
    let dist: EntryDistribution = dist.parse()?;
    min_entropy(&dist, &ring.primes())?;
    Ok(Experiment { ring, ns, trials, dist, seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED) })
}

/// A full class string, or a bare partition taken as the `p`-part.
fn parse_class(s: &str, p: u64) -> Result<Partition, CliError> {
    if !s.contains(':') {
        return Ok(s.parse()?);
    }
    let class: ModuleClass = s.parse()?;
    if class.components().any(|(q, _)| q != p) {
        return Err(usage(format!("class {s} has components away from p = {p}")));
    }
    Ok(class.component(p).clone())
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serialises");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ExactReport {
    quantity: &'static str,
    ring: Value,
    class: Option<String>,
    k: Option<u32>,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<String>,
}

fn exact_csv(r: &ExactReport) -> String {
    format!(
        "quantity,class,k,value\n{},{},{},{}\n",
        r.quantity,
        r.class.clone().unwrap_or_default(),
        r.k.map(|k| k.to_string()).unwrap_or_default(),
        r.value
    )
}

fn cmd_exact(which: &ExactCommand, cfg: &ConfigFile, format: Format) -> Result<String, CliError> {
    let tol_or = |t: Option<f64>| t.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    let report = match which {
        ExactCommand::Cl { p, class, tol } => {
            let lambda = parse_class(class, *p)?;
            ExactReport {
                quantity: "cl",
                ring: json!({ "p": p }),
                class: Some(ModuleClass::single(*p, lambda.clone()).to_string()),
                k: None,
                value: cl_measure(*p, &lambda, tol_or(*tol))?,
                exact: None,
            }
        }
        ExactCommand::Fw { p, n, class, exact } => {
            let lambda = parse_class(class, *p)?;
            let value = crate::measures::fw_probability_or_zero(*p, *n, &lambda)?;
            let exact = if *exact {
                Some(match fw_probability(*p, *n, &lambda) {
                    Ok(_) => fw_probability_exact(*p, *n, &lambda)?.to_string(),
                    Err(_) => "0".into(),
                })
            } else {
                None
            };
            ExactReport {
                quantity: "fw",
                ring: json!({ "p": p, "n": n }),
                class: Some(ModuleClass::single(*p, lambda).to_string()),
                k: None,
                value,
                exact,
            }
        }
        ExactCommand::Rank { p, k, tol } => ExactReport {
            quantity: "rank",
            ring: json!({ "p": p }),
            class: None,
            k: Some(*k),
            value: corank_distribution(*p, *k, tol_or(*tol))?,
            exact: None,
        },
        ExactCommand::Uniform { modulus, n, class, tol } => {
            let class: ModuleClass = class.parse()?;
            ExactReport {
                quantity: "uniform",
                ring: json!({ "modulus": modulus, "n": n }),
                class: Some(class.to_string()),
                k: None,
                value: uniform_reference(*modulus, &class, *n, tol_or(*tol))?,
                exact: None,
            }
        }
    };
    Ok(match format {
        Format::Json => pretty(&report),
        Format::Csv => exact_csv(&report),
    })
}

fn cmd_simulate(args: &RunArgs, cfg: &ConfigFile, format: Format) -> Result<String, CliError> {
    let ex = experiment(args, cfg)?;
    let policy = PrecisionPolicy::default();
    let mut runs = Vec::with_capacity(ex.ns.len());
    for &n in &ex.ns {
        runs.push((n, simulate(&ex.dist, &ex.ring, n, ex.trials, ex.seed, policy)?));
    }
    Ok(match format {
        Format::Json if runs.len() == 1 => pretty(&runs[0].1.document()),
        Format::Json => pretty(&runs.iter().map(|(_, e)| e.document()).collect::<Vec<_>>()),
        Format::Csv => {
            let mut out = String::from("n,class,count,prob\n");
            for (n, emp) in &runs {
                for line in emp.to_csv().lines().skip(1) {
                    out.push_str(&format!("{n},{line}\n"));
                }
            }
            out
        }
    })
}

#[derive(Serialize)]
struct CompareOutput {
    runs: Vec<ComparisonReport>,
    decay: Option<DecayFit>,
}

fn reference_for(ring: &RingSpec, n: usize, max_size: u32, tol: f64) -> Result<ReferenceDistribution, CliError> {
    Ok(match ring {
        RingSpec::Padic { p } => ReferenceDistribution::friedman_washington(*p, n as u32, max_size)?,
        RingSpec::Modular { .. } => {
            ReferenceDistribution::uniform(ring.modulus().expect("modular"), n as u32, max_size, tol)?
        }
    })
}

fn cmd_compare(args: &CompareArgs, cfg: &ConfigFile, format: Format) -> Result<String, CliError> {
    let ex = experiment(&args.run, cfg)?;
    let max_size = args.max_size.or(cfg.max_size).unwrap_or(4);
    let tol = args.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    let z = args.z.or(cfg.z).unwrap_or(Z95);
    let policy = PrecisionPolicy::default();
    let mut runs = Vec::with_capacity(ex.ns.len());
    for &n in &ex.ns {
        let emp = simulate(&ex.dist, &ex.ring, n, ex.trials, ex.seed, policy)?;
        let reference = reference_for(&ex.ring, n, max_size, tol)?;
        runs.push(compare(&emp, &reference, z)?);
    }
    let decay = if runs.len() >= 3 {
        let points: Vec<(f64, f64)> = ex.ns.iter().zip(&runs).map(|(&n, r)| (n as f64, r.tv_distance)).collect();
        decay_fit(&points).ok()
    } else {
        None
    };
    Ok(match format {
        Format::Json => pretty(&CompareOutput { runs, decay }),
        Format::Csv => {
            let mut out = format!("n,{}\n", ComparisonReport::CSV_HEADER);
            for (n, r) in ex.ns.iter().zip(&runs) {
                for line in r.csv_rows() {
                    out.push_str(&format!("{n},{line}\n"));
                }
            }
            out
        }
    })
}

fn read_matrix(path: &Path) -> Result<IntMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    Ok(if is_json { IntMatrix::from_json(&text)? } else { IntMatrix::from_csv(&text)? })
}

fn cmd_trace(args: &TraceArgs, cfg: &ConfigFile) -> Result<String, CliError> {
    let p = args.p.or(cfg.p).ok_or_else(|| usage("--p is required"))?;
    let a = match &args.matrix {
        Some(path) => read_matrix(path)?,
        None => {
            let n = match (args.n, &cfg.n) {
                (Some(n), _) => n,
                (None, Some(NList::One(n))) => *n,
                _ => return Err(usage("give --matrix or --n with --dist")),
            };
            let dist = args.dist.clone().or(cfg.dist.clone()).ok_or_else(|| usage("--dist is required"))?;
            let dist: EntryDistribution = dist.parse()?;
            sample_matrix(&dist, n, args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED), args.index)
        }
    };
    let trace = run_exposure(&a, p, PrecisionPolicy::default())?;
    let jmax = args.jmax.or(cfg.jmax).unwrap_or_else(|| trace.default_jmax());
    let mut doc = trace_document(&trace, jmax)?;
    doc.equivalence = Some(verify_rank_event_equivalence(&trace, jmax)?);
    Ok(pretty(&doc))
}

#[derive(Serialize)]
struct FourierRow {
    t: usize,
    re: f64,
    im: f64,
    abs: f64,
    psi: f64,
}

#[derive(Serialize)]
struct SpectralOutput {
    modulus: u64,
    dist: String,
    min_entropy: f64,
    fourier: Vec<FourierRow>,
    spec: crate::spectral::SpectrumSet,
    swap_gamma: f64,
    swap_masses: Vec<f64>,
    swap_min_entropy: f64,
}

fn cmd_spectral(args: &SpectralArgs, cfg: &ConfigFile, format: Format) -> Result<String, CliError> {
    let dist = args.dist.clone().or(cfg.dist.clone()).ok_or_else(|| usage("--dist is required"))?;
    let xi: EntryDistribution = dist.parse()?;
    if args.modulus < 2 || args.modulus > 1 << 16 {
        return Err(usage("--mod must lie in 2..=65536"));
    }
    let mu = FiniteMeasure::from_distribution(&xi, args.modulus as usize)?;
    let rows: Vec<FourierRow> = fourier(&mu)
        .into_iter()
        .enumerate()
        .map(|(t, c)| FourierRow { t, re: c.re, im: c.im, abs: c.norm(), psi: psi(&mu, t) })
        .collect();
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("t,re,im,abs,psi\n");
            for r in rows {
                out.push_str(&format!("{},{},{},{},{}\n", r.t, r.re, r.im, r.abs, r.psi));
            }
            out
        }
        Format::Json => {
            let nu = swap_distribution(&mu, args.gamma)?;
            pretty(&SpectralOutput {
                modulus: args.modulus,
                dist: xi.name().to_string(),
                min_entropy: mu.min_entropy()?,
                fourier: rows,
                spec: spec_set(&mu, args.epsilon)?,
                swap_gamma: args.gamma,
                swap_masses: nu.masses().to_vec(),
                swap_min_entropy: nu.min_entropy()?,
            })
        }
    })
}

fn cmd_count_tableaux(partition: &str, n: u32, format: Format) -> Result<String, CliError> {
    let lambda: Partition = partition.parse()?;
    let count = count_ssyt(&lambda, n);
    Ok(match format {
        Format::Csv => format!("partition,n,count\n\"{lambda}\",{n},{count}\n"),
        Format::Json => {
            let value: Value = match u64::try_from(&count) {
                Ok(c) => json!(c),
                Err(_) => json!(count.to_string()),
            };
            pretty(&json!({ "partition": lambda.to_string(), "n": n, "count": value }))
        }
    })
}

fn thread_count(cli: Option<usize>, cfg: Option<usize>) -> Result<Option<usize>, CliError> {
    let env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| usage(format!("{THREADS_ENV}={v:?} is not a count")))?),
        Err(_) => None,
    };
    let threads = cli.or(cfg).or(env);
    if threads == Some(0) {
        return Err(usage("thread count must be positive"));
    }
    Ok(threads)
}

/// Runs one command and returns what it would print.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    let format = cli.format.or(cfg.format).unwrap_or(Format::Json);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_count(cli.threads, cfg.threads)? {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Exact { which } => cmd_exact(which, &cfg, format),
        Command::Simulate(a) => cmd_simulate(a, &cfg, format),
        Command::Compare(a) => cmd_compare(a, &cfg, format),
        Command::Trace(a) => cmd_trace(a, &cfg),
        Command::Spectral(a) => cmd_spectral(a, &cfg, format),
        Command::CountTableaux { partition, n } => cmd_count_tableaux(partition, *n, format),
    })
}

/// Parses `argv`, runs the command and writes to `--output` when given.
/// Returns the text destined for stdout.
pub fn run<I, T>(argv: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let out = execute(&cli)?;
    match &cli.output {
        Some(path) => {
            fs::write(path, &out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(args: &[&str]) -> String {
        let argv = std::iter::once("cokernel-lab").chain(args.iter().copied());
        run(argv).unwrap_or_else(|e| panic!("{args:?}: {e}"))
    }

    fn err(args: &[&str]) -> CliError {
        let argv = std::iter::once("cokernel-lab").chain(args.iter().copied());
        run(argv).expect_err("should fail")
    }

    fn value(args: &[&str]) -> Value {
        serde_json::from_str(&ok(args)).unwrap()
    }

    #[test]
    fn exact_examples() {
        let v = value(&["exact", "cl", "--p", "2", "--class", "2:0"]);
        assert!((v["value"].as_f64().unwrap() - 0.288788095087).abs() < 1e-11);
        let v = value(&["exact", "fw", "--p", "2", "--n", "2", "--class", "2:0", "--exact"]);
        assert_eq!(v["value"], 0.375);
        assert_eq!(v["exact"], "3/8");
        let v = value(&["exact", "fw", "--p", "3", "--n", "3", "--class", "2,1"]);
        assert_eq!(v["class"], "3:2,1");
        let v = value(&["exact", "rank", "--p", "2", "--k", "1"]);
        assert!((v["value"].as_f64().unwrap() - 0.577576).abs() < 1e-6);
        let v = value(&["exact", "uniform", "--modulus", "6", "--n", "1", "--class", "0"]);
        assert!((v["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn count_tableaux_examples() {
        assert_eq!(value(&["count-tableaux", "--partition", "2,1", "--n", "3"])["count"], 8);
        assert_eq!(value(&["count-tableaux", "--partition", "1", "--n", "7"])["count"], 7);
    }

    #[test]
    fn spectral_example() {
        let v = value(&["spectral", "--dist", "bernoulli:0.3", "--mod", "2"]);
        assert!((v["fourier"][1]["psi"].as_f64().unwrap() - 0.84).abs() < 1e-12);
        let csv = ok(&["spectral", "--dist", "bernoulli:0.3", "--mod", "2", "--format", "csv"]);
        assert!(csv.starts_with("t,re,im,abs,psi\n0,1,0,1,0\n"));
    }

    #[test]
    fn trace_of_example_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        fs::write(&path, "2,4\n6,8\n").unwrap();
        let v = value(&["trace", "--p", "2", "--matrix", path.to_str().unwrap()]);
        assert_eq!(v["chain"].as_array().unwrap().last().unwrap(), "2,1");
        assert_eq!(v["equivalence"]["violations"], json!([]));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(err(&["simulate", "--p", "2", "--n", "3", "--dist", "custom:0=1"]).exit_code(), 3);
        assert_eq!(err(&["simulate", "--p", "4", "--n", "3", "--dist", "bernoulli:0.5"]).exit_code(), 2);
        assert_eq!(err(&["simulate", "--p", "2", "--n", "3", "--dist", "poisson:2"]).exit_code(), 2);
        assert_eq!(err(&["bogus"]).exit_code(), 2);
        assert_eq!(err(&["exact", "fw", "--p", "2", "--n", "2", "--class", "3:1"]).exit_code(), 2);
    }

    #[test]
    fn precision_ceiling_maps_to_exit_4() {
        let e = CliError::from(StatsError::Simulation {
            index: 3,
            source: ModArithError::PrecisionCeiling { p: 2, precision: 4096 },
        });
        assert_eq!(e.exit_code(), 4);
        assert!(e.to_string().contains("trial 3"));
    }

    #[test]
    fn simulate_is_deterministic_across_threads() {
        let args = ["simulate", "--p", "2", "--n", "6", "--dist", "bernoulli:0.5", "--trials", "500", "--seed", "42"];
        let a = ok(&[&args[..], &["--threads", "1"]].concat());
        let b = ok(&[&args[..], &["--threads", "3"]].concat());
        assert_eq!(a, b);
    }

    #[test]
    fn config_file_supplies_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"modulus": 4, "n": [2, 3], "trials": 200, "dist": "uniform_mod:4", "seed": 7}"#).unwrap();
        let v = value(&["simulate", "--config", path.to_str().unwrap()]);
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert_eq!(v[0]["trials"], 200);
        // flags override the file
        let v = value(&["simulate", "--config", path.to_str().unwrap(), "--n", "2", "--trials", "50"]);
        assert_eq!(v["trials"], 50);
        fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        assert_eq!(err(&["simulate", "--config", path.to_str().unwrap()]).exit_code(), 2);
    }
}
