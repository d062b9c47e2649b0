//! Command-line front end.
//!
//! `parse_args` turns argv (plus an optional JSON config file whose values
//! flags override) into a validated [`RunManifest`]; `execute` runs it and
//! returns the one-line summary. Exit codes: 0 success, 1 usage, 2 I/O,
//! 3 internal contract violation.

use crate::channel::NoiseProfile;
use crate::sim::{
    run_monte_carlo, sweep_error_vs_queries, trial_rng, write_summaries, MonteCarloSummary,
    OutputFormat, SearchConfig, SearchState, SimError, Stopping, Target, MAX_LEVELS, VL_STEP_CAP,
};
use crate::strategies::StrategyKind;
use crate::theory::{
    frontier_intercepts, rate_reliability_frontier, tau_upper_bound, write_frontier_csv,
    BoundReport, FloorCheck, FrontierClass, KsVariant, TheoryError,
};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_NOISE: &str = "affine:0.1:0.5";
pub const DEFAULT_TRIALS: u64 = 1000;
pub const DEFAULT_ALPHA: f64 = 1.0 / 32.0;

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Info(_) => 0,
            Self::Usage(_) => 1,
            Self::Io(_) => 2,
            Self::Contract(_) => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Usage(m),
            other => CliError::Contract(other.to_string()),
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        CliError::Contract(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "pmsearch", version, about = "Noisy target search with size-dependent noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo run of one strategy.
    Simulate(Flags),
    /// Fixed-length error curve over a range of query counts.
    Sweep(Flags),
    /// Expected search-time upper bounds.
    Bounds(Flags),
    /// Rate-reliability frontier segments.
    Frontier(Flags),
}

/// Flags shared by every subcommand; the config file uses the same keys.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Flags {
    /// median | sort | dya | hie (bounds accepts a comma list)
    #[arg(long)]
    strategy: Option<String>,
    /// Resolution exponent, 1/δ = 2^L
    #[arg(long = "L", value_name = "L")]
    #[serde(rename = "L")]
    levels: Option<u32>,
    /// affine:A:B | constant:P | noiseless
    #[arg(long)]
    noise: Option<String>,
    /// Fixed-length stopping after N queries
    #[arg(long, value_name = "N", conflicts_with = "vl")]
    fl: Option<u64>,
    /// Variable-length stopping at reliability EPS
    #[arg(long, value_name = "EPS")]
    vl: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs
    #[arg(long, env = "NS_WORKERS")]
    #[serde(skip)]
    workers: Option<usize>,
    /// Output file (standard output when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Query-size fraction α of the bound (bounds only)
    #[arg(long)]
    alpha: Option<f64>,
    /// Second-branch coefficient of K_s: eighth (default) or quarter
    #[arg(long, value_name = "VARIANT")]
    ks_variant: Option<String>,
    /// JSON file with default values for these flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Query counts for sweep: START:END:STEP or a comma list
    #[arg(long = "n", value_name = "RANGE")]
    n: Option<String>,
    /// Write the final partition of trial 0 as CSV (simulate only)
    #[arg(long, value_name = "PATH")]
    dump_partition: Option<PathBuf>,
}

impl Flags {
    /// `self` wins wherever both are set.
    fn over(self, base: Flags) -> Flags {
        Flags {
            strategy: self.strategy.or(base.strategy),
            levels: self.levels.or(base.levels),
            noise: self.noise.or(base.noise),
            // A stopping flag on the command line replaces either kind in the file.
            fl: if self.vl.is_some() { self.fl } else { self.fl.or(base.fl) },
            vl: if self.fl.is_some() { self.vl } else { self.vl.or(base.vl) },
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            workers: self.workers.or(base.workers),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            alpha: self.alpha.or(base.alpha),
            ks_variant: self.ks_variant.or(base.ks_variant),
            config: self.config,
            n: self.n.or(base.n),
            dump_partition: self.dump_partition.or(base.dump_partition),
        }
    }

    fn set_names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut push = |set: bool, name| {
            if set {
                v.push(name)
            }
        };
        push(self.strategy.is_some(), "--strategy");
        push(self.levels.is_some(), "--L");
        push(self.fl.is_some(), "--fl");
        push(self.vl.is_some(), "--vl");
        push(self.trials.is_some(), "--trials");
        push(self.seed.is_some(), "--seed");
        push(self.alpha.is_some(), "--alpha");
        push(self.ks_variant.is_some(), "--ks-variant");
        push(self.n.is_some(), "--n");
        push(self.dump_partition.is_some(), "--dump-partition");
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubcommandKind {
    Simulate,
    Sweep,
    Bounds,
    Frontier,
}

impl SubcommandKind {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Sweep => "sweep",
            Self::Bounds => "bounds",
            Self::Frontier => "frontier",
        }
    }

    fn allowed(&self) -> &'static [&'static str] {
        match self {
            Self::Simulate => &["--strategy", "--L", "--fl", "--vl", "--trials", "--seed", "--dump-partition"],
            Self::Sweep => &["--strategy", "--L", "--trials", "--seed", "--n"],
            Self::Bounds => &["--strategy", "--L", "--vl", "--alpha", "--ks-variant"],
            Self::Frontier => &[],
        }
    }
}

/// A validated invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: SubcommandKind,
    /// One strategy for simulate and sweep, any subset of sort/dya/hie for
    /// bounds, none for frontier.
    pub strategies: Vec<StrategyKind>,
    #[serde(rename = "L")]
    pub levels: Option<u32>,
    pub profile: NoiseProfile,
    pub stopping: Option<Stopping>,
    pub n_values: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub alpha: f64,
    pub ks_variant: KsVariant,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub config: Option<PathBuf>,
    pub dump_partition: Option<PathBuf>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| usage(format!("malformed manifest: {e}")))
    }

    fn search_config(&self, strategy: StrategyKind, stopping: Stopping) -> SearchConfig {
        SearchConfig {
            levels: self.levels.unwrap_or(0),
            strategy,
            profile: self.profile,
            stopping,
            seed: self.seed,
            target: Target::Random,
            record_trace: false,
        }
    }
}

/// Parses `affine:A:B`, `constant:P` or `noiseless`.
pub fn parse_noise(text: &str) -> Result<NoiseProfile, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("malformed number '{s}' in --noise"));
    let profile = match parts.as_slice() {
        ["affine", a, b] => NoiseProfile::affine(num(a)?, num(b)?),
        ["constant", p] => NoiseProfile::constant(num(p)?),
        ["noiseless"] => Ok(NoiseProfile::Noiseless),
        _ => {
            return Err(format!(
                "bad --noise '{text}' (expected affine:A:B, constant:P or noiseless)"
            ))
        }
    };
    profile.map_err(|e| e.to_string())
}

/// Parses `START:END:STEP` (inclusive) or a comma-separated list.
pub fn parse_n_values(text: &str) -> Result<Vec<u64>, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| format!("malformed count '{s}' in --n"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(format!("bad --n range '{text}' (expected START:END:STEP)"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0 || a > b {
            return Err(format!("empty --n range '{text}'"));
        }
        (a..=b).step_by(step as usize).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(format!("--n values must be positive ('{text}')"));
    }
    Ok(values)
}

fn read_config(path: &Path) -> Result<Flags, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("malformed config {}: {e}", path.display())))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Parses and validates an argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<RunManifest, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    })?;
    let (kind, flags) = match cli.command {
        Command::Simulate(f) => (SubcommandKind::Simulate, f),
        Command::Sweep(f) => (SubcommandKind::Sweep, f),
        Command::Bounds(f) => (SubcommandKind::Bounds, f),
        Command::Frontier(f) => (SubcommandKind::Frontier, f),
    };
    let flags = match &flags.config {
        Some(path) => {
            let file = read_config(path)?;
            if file.fl.is_some() && file.vl.is_some() {
                return Err(usage(format!("config {} sets both fl and vl", path.display())));
            }
            flags.over(file)
        }
        None => flags,
    };
    build_manifest(kind, flags)
}

fn build_manifest(kind: SubcommandKind, f: Flags) -> Result<RunManifest, CliError> {
    let sub = kind.name();
    for name in f.set_names() {
        if !kind.allowed().contains(&name) {
            return Err(usage(format!("{name} is not used by {sub}")));
        }
    }
    let strategies = match (&f.strategy, kind) {
        (None, SubcommandKind::Bounds) => StrategyKind::PROPOSED.to_vec(),
        (None, SubcommandKind::Frontier) => Vec::new(),
        (None, _) => return Err(usage(format!("{sub} requires --strategy"))),
        (Some(s), SubcommandKind::Bounds) => {
            let list = s
                .split(',')
                .map(|x| x.trim().parse::<StrategyKind>().map_err(|e| usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            if list.contains(&StrategyKind::Median) {
                return Err(usage("bounds supports sort, dya and hie"));
            }
            list
        }
        (Some(s), _) => vec![s.parse::<StrategyKind>().map_err(|e| usage(e.to_string()))?],
    };

    let levels = f.levels;
    if let Some(l) = levels {
        if !(1..=MAX_LEVELS).contains(&l) {
            return Err(usage(format!("--L {l} outside [1, {MAX_LEVELS}]")));
        }
    } else if kind != SubcommandKind::Frontier {
        return Err(usage(format!("{sub} requires --L")));
    }

    if let Some(eps) = f.vl {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(usage(format!("--vl {eps} outside (0, 1)")));
        }
    }
    if f.fl == Some(0) {
        return Err(usage("--fl must be at least 1"));
    }
    let stopping = match (f.fl, f.vl) {
        (Some(n), None) => Some(Stopping::FixedLength(n)),
        (None, Some(eps)) => Some(Stopping::VariableLength(eps)),
        (None, None) => None,
        (Some(_), Some(_)) => return Err(usage("--fl and --vl are mutually exclusive")),
    };
    match (kind, stopping) {
        (SubcommandKind::Simulate, None) => return Err(usage("simulate requires --fl N or --vl EPS")),
        (SubcommandKind::Bounds, None) => return Err(usage("bounds requires --vl EPS")),
        _ => {}
    }

    let n_values = match (&f.n, kind) {
        (Some(text), _) => parse_n_values(text).map_err(usage)?,
        (None, SubcommandKind::Sweep) => return Err(usage("sweep requires --n")),
        (None, _) => Vec::new(),
    };

    let profile = parse_noise(f.noise.as_deref().unwrap_or(DEFAULT_NOISE)).map_err(usage)?;
    let trials = f.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let workers = f.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let alpha = f.alpha.unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(usage(format!("--alpha {alpha} outside (0, 1/2]")));
    }
    let ks_variant = match f.ks_variant.as_deref() {
        None | Some("eighth") => KsVariant::Eighth,
        Some("quarter") => KsVariant::Quarter,
        Some(other) => return Err(usage(format!("unknown --ks-variant '{other}' (eighth or quarter)"))),
    };
    let format = match f.format.as_deref() {
        None | Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => return Err(usage(format!("unknown --format '{other}' (csv or json)"))),
    };
    if f.dump_partition.is_some() && !strategies[0].is_connected() {
        return Err(usage("--dump-partition needs a connected strategy (median, dya or hie)"));
    }

    Ok(RunManifest {
        subcommand: kind,
        strategies,
        levels,
        profile,
        stopping,
        n_values,
        trials,
        seed: f.seed.unwrap_or(0),
        workers,
        alpha,
        ks_variant,
        out: f.out,
        format,
        config: f.config,
        dump_partition: f.dump_partition,
    })
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("cannot write {}: {e}", path.display()))
}

fn emit(manifest: &RunManifest, bytes: &[u8]) -> Result<(), CliError> {
    match &manifest.out {
        Some(path) => fs::write(path, bytes).map_err(|e| io_err(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("cannot write standard output: {e}"))),
    }
}

fn summary_line(s: &MonteCarloSummary) -> String {
    format!(
        "{} L={} {}={} trials={}: error {:.6} [{:.6}, {:.6}], mean tau {:.4}",
        s.strategy, s.levels, s.stopping, s.param, s.trials, s.error_rate, s.error_lo, s.error_hi, s.mean_tau
    )
}

/// Runs a manifest and returns its one-line summary.
pub fn execute(manifest: &RunManifest) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let summary = match manifest.subcommand {
        SubcommandKind::Simulate => {
            let stopping = manifest.stopping.expect("validated");
            let cfg = manifest.search_config(manifest.strategies[0], stopping);
            let s = run_monte_carlo(&cfg, manifest.trials, manifest.workers)?;
            write_summaries(&mut buf, std::slice::from_ref(&s), manifest.format)
                .map_err(|e| CliError::Io(e.to_string()))?;
            if let Some(path) = &manifest.dump_partition {
                dump_partition(&cfg, path)?;
            }
            summary_line(&s)
        }
        SubcommandKind::Sweep => {
            let cfg = manifest.search_config(manifest.strategies[0], Stopping::FixedLength(1));
            let points =
                sweep_error_vs_queries(&cfg, &manifest.n_values, manifest.trials, manifest.workers)?;
            let rows: Vec<MonteCarloSummary> = points.into_iter().map(|(_, s)| s).collect();
            write_summaries(&mut buf, &rows, manifest.format).map_err(|e| CliError::Io(e.to_string()))?;
            let (first, last) = (&rows[0], &rows[rows.len() - 1]);
            format!(
                "sweep {} L={} trials={}: error {:.6} at n={} to {:.6} [{:.6}, {:.6}] at n={}",
                first.strategy, first.levels, first.trials, first.error_rate, first.param,
                last.error_rate, last.error_lo, last.error_hi, last.param
            )
        }
        SubcommandKind::Bounds => {
            let levels = manifest.levels.expect("validated");
            let Some(Stopping::VariableLength(eps)) = manifest.stopping else {
                unreachable!("validated")
            };
            let delta = 0.5f64.powi(levels as i32);
            let mut reports = Vec::new();
            for &kind in &manifest.strategies {
                let rep = tau_upper_bound(
                    kind, &manifest.profile, delta, eps, manifest.alpha, manifest.ks_variant, FloorCheck::Report,
                )?;
                if !rep.floor_satisfied {
                    eprintln!(
                        "warning: {kind}: alpha={} is below the admissible floor {:.6}",
                        rep.alpha, rep.alpha_floor
                    );
                }
                reports.push(rep);
            }
            write_bounds(&mut buf, &reports, manifest.format)?;
            let parts: Vec<String> =
                reports.iter().map(|r| format!("{}={:.4}", r.strategy, r.tau_upper)).collect();
            format!("bounds L={levels} vl={eps} alpha={}: tau_upper {}", manifest.alpha, parts.join(" "))
        }
        SubcommandKind::Frontier => {
            match manifest.format {
                OutputFormat::Csv => write_frontier_csv(&mut buf, &manifest.profile, &FrontierClass::ALL)
                    .map_err(|e| CliError::Io(e.to_string()))?,
                OutputFormat::Json => {
                    let rows: Vec<serde_json::Value> = FrontierClass::ALL
                        .iter()
                        .flat_map(|&c| {
                            rate_reliability_frontier(&manifest.profile, c).into_iter().map(move |p| {
                                serde_json::json!({ "class": c, "R": p.rate, "E": p.reliability })
                            })
                        })
                        .collect();
                    serde_json::to_writer_pretty(&mut buf, &rows).map_err(|e| CliError::Io(e.to_string()))?;
                    buf.push(b'\n');
                }
            }
            let (r, e) = frontier_intercepts(&manifest.profile, FrontierClass::Optimal);
            format!("frontier: optimal R_max={r:.6} E_max={e:.6}")
        }
    };
    emit(manifest, &buf)?;
    Ok(summary)
}

fn write_bounds(buf: &mut Vec<u8>, reports: &[BoundReport], format: OutputFormat) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match format {
        OutputFormat::Csv => {
            writeln!(buf, "{}", BoundReport::CSV_HEADER).map_err(io)?;
            for r in reports {
                writeln!(buf, "{}", r.csv_row()).map_err(io)?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *buf, reports).map_err(|e| CliError::Io(e.to_string()))?;
            buf.push(b'\n');
        }
    }
    Ok(())
}

fn dump_partition(cfg: &SearchConfig, path: &Path) -> Result<(), CliError> {
    // Replays trial 0 with the same draws as the Monte Carlo run.
    let mut rng = trial_rng(cfg.seed, 0);
    let truth = match cfg.target {
        Target::Fixed(i) => i,
        Target::Random => rng.random_range(1..=cfg.n_bins()),
    };
    let mut state = SearchState::new(cfg.strategy, cfg.profile, cfg.levels, truth)?;
    loop {
        let done = match cfg.stopping {
            Stopping::FixedLength(n) => state.t() >= n,
            Stopping::VariableLength(eps) => state.argmax().1 > 1.0 - eps,
        };
        if done {
            break;
        }
        if state.t() >= VL_STEP_CAP {
            return Err(SimError::CapExceeded { steps: VL_STEP_CAP }.into());
        }
        state.step(&mut rng)?;
    }
    let part = state
        .partition()
        .ok_or_else(|| CliError::Contract("strategy keeps no partition".into()))?;
    let mut buf = Vec::new();
    part.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Entry point used by the binary; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|m| {
        let line = execute(&m)?;
        if m.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Info(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("pmsearch".to_string()).chain(s.split_whitespace().map(str::to_owned)).collect()
    }

    #[test]
    fn simulate_happy_path() {
        let m = parse_args(args(
            "simulate --strategy hie --L 15 --noise affine:0.1:0.5 --vl 0.001 --trials 1000 --seed 42 --out r.csv",
        ))
        .unwrap();
        assert_eq!(m.subcommand, SubcommandKind::Simulate);
        assert_eq!(m.strategies, vec![StrategyKind::Hie]);
        assert_eq!(m.levels, Some(15));
        assert_eq!(m.stopping, Some(Stopping::VariableLength(0.001)));
        assert_eq!((m.trials, m.seed), (1000, 42));
        assert_eq!(m.out.as_deref(), Some(Path::new("r.csv")));
    }

    #[test]
    fn sweep_range_expansion() {
        let m = parse_args(args("sweep --strategy sort --L 15 --n 10:60:5")).unwrap();
        assert_eq!(m.n_values, (10..=60).step_by(5).collect::<Vec<u64>>());
        assert_eq!(parse_n_values("5,7,9").unwrap(), vec![5, 7, 9]);
        assert!(parse_n_values("9:5:1").is_err());
        assert!(parse_n_values("1:5:0").is_err());
    }

    #[test]
    fn rejected_inputs_are_usage_errors() {
        for bad in [
            "simulate --strategy maxejs --L 10 --vl 0.1",
            "simulate --strategy sort --L 0 --vl 0.1",
            "simulate --strategy sort --L 31 --vl 0.1",
            "simulate --strategy sort --L 10 --vl 1.0",
            "simulate --strategy sort --L 10 --vl 0",
            "simulate --strategy sort --L ten --vl 0.1",
            "simulate --strategy sort --L 10",
            "simulate --L 10 --vl 0.1",
            "simulate --strategy sort --L 10 --fl 5 --vl 0.1",
            "simulate --strategy sort --L 10 --vl 0.1 --bogus 1",
            "simulate --strategy sort --L 10 --vl 0.1 --noise linear:1",
            "sweep --strategy sort --L 10",
            "sweep --strategy sort --L 10 --n 10:20:5 --vl 0.1",
            "bounds --L 10",
            "frontier --trials 10",
        ] {
            let err = parse_args(args(bad)).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}: {err}");
        }
        let err = parse_args(args("simulate --strategy maxejs --L 10 --vl 0.1")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("median") && msg.contains("sort") && msg.contains("dya") && msg.contains("hie"));
    }

    #[test]
    fn noise_grammar() {
        assert_eq!(parse_noise("affine:0.1:0.5").unwrap(), NoiseProfile::affine(0.1, 0.5).unwrap());
        assert_eq!(parse_noise("constant:0.3").unwrap(), NoiseProfile::constant(0.3).unwrap());
        assert_eq!(parse_noise("noiseless").unwrap(), NoiseProfile::Noiseless);
        assert!(parse_noise("affine:0.1").is_err());
        assert!(parse_noise("constant:x").is_err());
        assert!(parse_noise("affine:0.1:-1").is_err());
    }

    #[test]
    fn manifest_json_round_trip() {
        for line in [
            "simulate --strategy dya --L 12 --noise constant:0.2 --fl 40 --trials 7 --seed 3 --format json",
            "sweep --strategy hie --L 9 --n 10:30:10 --workers 3",
            "bounds --L 15 --vl 0.001 --alpha 0.015625 --strategy sort,hie --ks-variant quarter",
            "frontier --noise affine:0.05:0.7 --out f.csv",
        ] {
            let m = parse_args(args(line)).unwrap();
            assert_eq!(RunManifest::from_json(&m.to_json()).unwrap(), m, "{line}");
        }
    }

    #[test]
    fn config_file_merges_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(&cfg, r#"{"strategy":"median","L":8,"vl":0.01,"trials":50,"seed":9,"noise":"constant:0.2"}"#)
            .unwrap();
        let m = parse_args(args(&format!("simulate --config {} --L 10 --fl 30", cfg.display()))).unwrap();
        assert_eq!(m.strategies, vec![StrategyKind::Median]);
        assert_eq!(m.levels, Some(10));
        assert_eq!(m.stopping, Some(Stopping::FixedLength(30)));
        assert_eq!((m.trials, m.seed), (50, 9));
        assert_eq!(m.profile, NoiseProfile::constant(0.2).unwrap());

        fs::write(&cfg, r#"{"strategy":"median","Level":8}"#).unwrap();
        let err = parse_args(args(&format!("simulate --config {}", cfg.display()))).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let missing = dir.path().join("absent.json");
        let err = parse_args(args(&format!("simulate --config {}", missing.display()))).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn noiseless_median_summary() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        let m = parse_args(args(&format!(
            "simulate --strategy median --L 10 --noise noiseless --vl 0.01 --trials 50 --out {}",
            out.display()
        )))
        .unwrap();
        let line = execute(&m).unwrap();
        assert!(line.contains("mean tau 10.0000"), "{line}");
        let text = fs::read_to_string(out).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(&row[..8], ["median", "10", "0", "0", "vl", "0.01", "50", "0"]);
        assert_eq!((row[10], row[11]), ("10", "1"));
    }

    #[test]
    fn bounds_and_frontier_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("b.csv");
        let m = parse_args(args(&format!("bounds --L 15 --vl 0.001 --out {}", out.display()))).unwrap();
        execute(&m).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], BoundReport::CSV_HEADER);

        let m = parse_args(args(&format!("frontier --out {}", out.display()))).unwrap();
        execute(&m).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let row = text.lines().find(|l| l.starts_with("optimal,") && l.ends_with(",0")).unwrap();
        let r: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((r - 0.531).abs() < 1e-3);
    }

    #[test]
    fn partition_dump() {
        let dir = tempfile::tempdir().unwrap();
        let dump = dir.path().join("p.csv");
        let out = dir.path().join("r.csv");
        let m = parse_args(args(&format!(
            "simulate --strategy dya --L 8 --vl 0.01 --trials 3 --out {} --dump-partition {}",
            out.display(),
            dump.display()
        )))
        .unwrap();
        execute(&m).unwrap();
        let text = fs::read_to_string(dump).unwrap();
        assert!(text.starts_with("lo,hi,mass\n1,"));
        let err = parse_args(args("simulate --strategy sort --L 8 --vl 0.01 --dump-partition x.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unwritable_output_is_io_error() {
        let m = parse_args(args("frontier --out /nonexistent-dir/f.csv")).unwrap();
        assert_eq!(execute(&m).unwrap_err().exit_code(), 2);
    }
}
