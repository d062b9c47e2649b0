use super::{run_episode, run_with_checkpoints, SearchConfig, SimError, Stopping};
use crate::strategies::StrategyKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub const SUMMARY_CSV_HEADER: &str = "strategy,L,noise_a,noise_b,stopping,param,trials,error_rate,error_lo,error_hi,mean_tau,empirical_rate,empirical_reliability,seed";

/// Random stream of trial `trial`: stream `trial` of the ChaCha8 key derived
/// from `seed`. Streams never overlap, whatever order trials run in.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub strategy: StrategyKind,
    #[serde(rename = "L")]
    pub levels: u32,
    pub noise_a: f64,
    pub noise_b: f64,
    pub stopping: String,
    pub param: f64,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    pub error_lo: f64,
    pub error_hi: f64,
    pub mean_tau: f64,
    /// `L / mean τ` in bits per query.
    pub empirical_rate: f64,
    /// `log2(1/error_rate) / mean τ`, absent without errors.
    pub empirical_reliability: Option<f64>,
    pub seed: u64,
    /// Mean of `1 − max π(τ)`.
    pub mean_posterior_error: f64,
    /// Mean operation count per query.
    pub mean_work_per_query: f64,
}

impl MonteCarloSummary {
    /// Wilson half-width at `z = 1`.
    pub fn wilson_standard_error(&self) -> f64 {
        let (lo, hi) = wilson_interval(self.errors, self.trials, 1.0);
        (hi - lo) / 2.0
    }

    pub fn csv_row(&self) -> String {
        let rel = self.empirical_reliability.map(|r| r.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.levels,
            self.noise_a,
            self.noise_b,
            self.stopping,
            self.param,
            self.trials,
            self.error_rate,
            self.error_lo,
            self.error_hi,
            self.mean_tau,
            self.empirical_rate,
            rel,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    tau: u64,
    correct: bool,
    posterior_error: f64,
    work: u64,
}

fn summarize(config: &SearchConfig, stopping: Stopping, outcomes: &[Outcome]) -> MonteCarloSummary {
    let trials = outcomes.len() as u64;
    let errors = outcomes.iter().filter(|o| !o.correct).count() as u64;
    // Sequential sums in trial order keep results independent of threading.
    let tau_sum: u64 = outcomes.iter().map(|o| o.tau).sum();
    let work_sum: u64 = outcomes.iter().map(|o| o.work).sum();
    let post_err: f64 = outcomes.iter().map(|o| o.posterior_error).sum();
    let n = trials.max(1) as f64;
    let error_rate = errors as f64 / n;
    let mean_tau = tau_sum as f64 / n;
    let (error_lo, error_hi) = wilson_interval(errors, trials, Z95);
    let (noise_a, noise_b) = config.profile.table_coefficients();
    MonteCarloSummary {
        strategy: config.strategy,
        levels: config.levels,
        noise_a,
        noise_b,
        stopping: stopping.label().to_owned(),
        param: stopping.param(),
        trials,
        errors,
        error_rate,
        error_lo,
        error_hi,
        mean_tau,
        empirical_rate: if mean_tau > 0.0 { config.levels as f64 / mean_tau } else { 0.0 },
        empirical_reliability: (errors > 0 && mean_tau > 0.0)
            .then(|| (1.0 / error_rate).log2() / mean_tau),
        seed: config.seed,
        mean_posterior_error: post_err / n,
        mean_work_per_query: if tau_sum > 0 { work_sum as f64 / tau_sum as f64 } else { 0.0 },
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, SimError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::ThreadPool(e.to_string()))
}

/// Runs `trials` independent episodes on `workers` threads. Trial `i` uses
/// [`trial_rng`]`(seed, i)`; the reduction runs in trial order.
pub fn run_monte_carlo(
    config: &SearchConfig,
    trials: u64,
    workers: usize,
) -> Result<MonteCarloSummary, SimError> {
    config.validate()?;
    if trials == 0 {
        return Err(SimError::Config("trials must be >= 1".into()));
    }
    let outcomes: Vec<Outcome> = pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let rec = run_episode(config, &mut trial_rng(config.seed, i))?;
                Ok(Outcome {
                    tau: rec.tau,
                    correct: rec.correct,
                    posterior_error: rec.posterior_error,
                    work: rec.work,
                })
            })
            .collect::<Result<_, SimError>>()
    })?;
    Ok(summarize(config, config.stopping, &outcomes))
}

/// Fixed-length error curve over `n_values` (sorted and deduplicated in the
/// output). Trial `i` shares stream `i` across every `n`, so each point
/// equals the fixed-length Monte Carlo run at that `n`.
pub fn sweep_error_vs_queries(
    config: &SearchConfig,
    n_values: &[u64],
    trials: u64,
    workers: usize,
) -> Result<Vec<(u64, MonteCarloSummary)>, SimError> {
    let mut marks = n_values.to_vec();
    marks.sort_unstable();
    marks.dedup();
    if marks.is_empty() {
        return Err(SimError::Config("sweep needs at least one n".into()));
    }
    if marks[0] == 0 {
        return Err(SimError::Config("fixed length needs n >= 1".into()));
    }
    if trials == 0 {
        return Err(SimError::Config("trials must be >= 1".into()));
    }
    let per_trial: Vec<Vec<Outcome>> = pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let cps = run_with_checkpoints(config, &marks, &mut trial_rng(config.seed, i))?;
                Ok(cps
                    .into_iter()
                    .map(|c| Outcome {
                        tau: c.n,
                        correct: c.correct,
                        posterior_error: c.posterior_error,
                        work: 0,
                    })
                    .collect())
            })
            .collect::<Result<_, SimError>>()
    })?;
    Ok(marks
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let column: Vec<Outcome> = per_trial.iter().map(|row| row[j]).collect();
            let mut cfg = config.clone();
            cfg.stopping = Stopping::FixedLength(n);
            (n, summarize(&cfg, cfg.stopping, &column))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Writes summaries as CSV rows or a JSON array.
pub fn write_summaries<W: Write>(
    mut out: W,
    summaries: &[MonteCarloSummary],
    format: OutputFormat,
) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{SUMMARY_CSV_HEADER}")?;
            for s in summaries {
                writeln!(out, "{}", s.csv_row())?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, summaries)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
