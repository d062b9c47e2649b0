//! Search episodes and Monte Carlo experiments.
//!
//! An episode draws the target, starts from the uniform prior over `2^L`
//! bins and repeats select → observe → update until its stopping rule
//! fires. `τ` counts channel uses. sortPM keeps a dense posterior; the
//! connected strategies keep the interval partition, whose size is checked
//! against `2t + 1` after every update.

mod monte_carlo;

pub use monte_carlo::{
    run_monte_carlo, sweep_error_vs_queries, trial_rng, wilson_interval, write_summaries,
    MonteCarloSummary, OutputFormat, SUMMARY_CSV_HEADER, Z95,
};

use crate::channel::{sample_observation, ChannelError, NoiseProfile};
use crate::posterior::{Posterior, PosteriorDense, PosteriorError, PosteriorPartition, QuerySet};
use crate::strategies::{
    select_dya_pm, select_hie_pm, select_median_pm, OpCounter, SortPmTracker, StrategyError,
    StrategyKind,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard limit on variable-length episodes.
pub const VL_STEP_CAP: u64 = 1_000_000;
/// Largest supported resolution exponent.
pub const MAX_LEVELS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("variable-length episode exceeded {steps} steps")]
    CapExceeded { steps: u64 },
    #[error("partition holds {intervals} intervals after {t} updates (limit {})", 2 * t + 1)]
    PartitionBound { t: u64, intervals: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stopping {
    /// Stop after exactly `n` queries.
    #[serde(rename = "fl")]
    FixedLength(u64),
    /// Stop once some bin holds more than `1 − ε`.
    #[serde(rename = "vl")]
    VariableLength(f64),
}

impl Stopping {
    pub fn label(&self) -> &'static str {
        match self {
            Self::FixedLength(_) => "fl",
            Self::VariableLength(_) => "vl",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Self::FixedLength(n) => n as f64,
            Self::VariableLength(eps) => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Random,
    /// A fixed 1-based bin.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Resolution exponent `L`, with `1/δ = 2^L`.
    #[serde(rename = "L")]
    pub levels: u32,
    pub strategy: StrategyKind,
    pub profile: NoiseProfile,
    pub stopping: Stopping,
    pub seed: u64,
    #[serde(default)]
    pub target: Target,
    /// Keep `max_i π_i` after every step.
    #[serde(default)]
    pub record_trace: bool,
}

impl SearchConfig {
    pub fn new(levels: u32, strategy: StrategyKind, profile: NoiseProfile, stopping: Stopping) -> Self {
        Self { levels, strategy, profile, stopping, seed: 0, target: Target::Random, record_trace: false }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_bins(&self) -> usize {
        1usize << self.levels
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.levels > MAX_LEVELS {
            return Err(SimError::Config(format!("L={} exceeds {MAX_LEVELS}", self.levels)));
        }
        match self.stopping {
            Stopping::FixedLength(0) => {
                return Err(SimError::Config("fixed length needs n >= 1".into()))
            }
            Stopping::VariableLength(eps) if !(eps > 0.0 && eps < 1.0) => {
                return Err(SimError::Config(format!("epsilon={eps} outside (0, 1)")))
            }
            _ => {}
        }
        if let Target::Fixed(i) = self.target {
            if i == 0 || i > self.n_bins() {
                return Err(SimError::Config(format!("target {i} outside 1..={}", self.n_bins())));
            }
        }
        self.profile.validated()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub tau: u64,
    pub estimate: usize,
    pub truth: usize,
    pub correct: bool,
    /// `δ|S_t|` for every query.
    pub query_sizes: Vec<f64>,
    /// `max_i π_i(t)` after every update, if requested.
    pub max_posterior_trace: Option<Vec<f64>>,
    /// `1 − max_i π_i(τ)`, the posterior probability that the estimate is
    /// wrong.
    pub posterior_error: f64,
    /// Operations spent on selection and updates.
    pub work: u64,
    /// Largest partition size seen, for the connected strategies.
    pub max_intervals: Option<usize>,
}

#[derive(Debug, Clone)]
enum Belief {
    Dense { post: PosteriorDense, tracker: SortPmTracker },
    Partition(PosteriorPartition),
}

/// A single episode in progress.
#[derive(Debug, Clone)]
pub struct SearchState {
    strategy: StrategyKind,
    profile: NoiseProfile,
    belief: Belief,
    truth: usize,
    t: u64,
    ops: OpCounter,
    max_intervals: Option<usize>,
}

impl SearchState {
    pub fn new(
        strategy: StrategyKind,
        profile: NoiseProfile,
        levels: u32,
        truth: usize,
    ) -> Result<Self, SimError> {
        let n = 1usize << levels;
        if truth == 0 || truth > n {
            return Err(SimError::Config(format!("target {truth} outside 1..={n}")));
        }
        let mut ops = OpCounter::default();
        let (belief, max_intervals) = if strategy == StrategyKind::Sort {
            let post = PosteriorDense::uniform(n)?;
            let tracker = SortPmTracker::new(&post, &mut ops);
            (Belief::Dense { post, tracker }, None)
        } else {
            (Belief::Partition(PosteriorPartition::uniform(n)?), Some(1))
        };
        Ok(Self { strategy, profile, belief, truth, t: 0, ops, max_intervals })
    }

    pub fn truth(&self) -> usize {
        self.truth
    }

    /// Updates applied so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn work(&self) -> u64 {
        self.ops.0
    }

    /// Current partition size, for the connected strategies.
    pub fn intervals(&self) -> Option<usize> {
        match &self.belief {
            Belief::Partition(p) => Some(p.len()),
            Belief::Dense { .. } => None,
        }
    }

    pub fn max_intervals(&self) -> Option<usize> {
        self.max_intervals
    }

    /// Most likely bin (smallest index on ties) and its mass.
    pub fn argmax(&self) -> (usize, f64) {
        match &self.belief {
            Belief::Dense { post, tracker } => {
                let i = tracker.order()[0] as usize + 1;
                (i, post.mass(i))
            }
            Belief::Partition(p) => p.argmax(),
        }
    }

    /// The posterior as one mass per bin.
    pub fn dense_posterior(&self) -> PosteriorDense {
        match &self.belief {
            Belief::Dense { post, .. } => post.clone(),
            Belief::Partition(p) => p.flatten(),
        }
    }

    pub fn partition(&self) -> Option<&PosteriorPartition> {
        match &self.belief {
            Belief::Partition(p) => Some(p),
            Belief::Dense { .. } => None,
        }
    }

    /// Next query of the configured strategy.
    pub fn select(&mut self) -> Result<QuerySet, SimError> {
        let ops = &mut self.ops;
        let q = match (&mut self.belief, self.strategy) {
            (Belief::Dense { post, tracker }, _) => tracker.select(post, ops)?,
            (Belief::Partition(p), StrategyKind::Median) => select_median_pm(p, ops)?,
            (Belief::Partition(p), StrategyKind::Dya) => select_dya_pm(p, ops)?,
            (Belief::Partition(p), StrategyKind::Hie) => select_hie_pm(p, ops)?,
            (Belief::Partition(_), StrategyKind::Sort) => unreachable!("sort keeps a dense posterior"),
        };
        Ok(q)
    }

    /// Applies the answer `y` to `query`, which must come from
    /// [`Self::select`].
    pub fn observe(&mut self, query: &QuerySet, y: bool) -> Result<(), SimError> {
        match &mut self.belief {
            Belief::Dense { post, tracker } => {
                post.bayes_update(query, y, &self.profile)?;
                self.ops.add(post.n_bins() as u64);
                tracker.after_update(post, &mut self.ops);
            }
            Belief::Partition(p) => {
                p.bayes_update(query, y, &self.profile)?;
                self.ops.add(p.len() as u64);
            }
        }
        self.t += 1;
        if let Some(len) = self.intervals() {
            if len as u64 > 2 * self.t + 1 {
                return Err(SimError::PartitionBound { t: self.t, intervals: len });
            }
            self.max_intervals = self.max_intervals.max(Some(len));
        }
        Ok(())
    }

    /// Draws the channel output for `query` given the true target.
    pub fn sample<R: Rng + ?Sized>(&self, query: &QuerySet, rng: &mut R) -> Result<bool, SimError> {
        Ok(sample_observation(&self.profile, query.contains(self.truth), query.size_fraction(), rng)?)
    }

    /// One full select → sample → update step. Returns the query used.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<QuerySet, SimError> {
        let q = self.select()?;
        let y = self.sample(&q, rng)?;
        self.observe(&q, y)?;
        Ok(q)
    }
}

fn draw_truth<R: Rng + ?Sized>(config: &SearchConfig, rng: &mut R) -> usize {
    match config.target {
        Target::Fixed(i) => i,
        Target::Random => rng.random_range(1..=config.n_bins()),
    }
}

/// Runs one episode with randomness from `rng`.
pub fn run_episode<R: Rng + ?Sized>(config: &SearchConfig, rng: &mut R) -> Result<EpisodeRecord, SimError> {
    config.validate()?;
    let truth = draw_truth(config, rng);
    let mut state = SearchState::new(config.strategy, config.profile, config.levels, truth)?;
    let mut query_sizes = Vec::new();
    let mut trace = config.record_trace.then(Vec::new);
    let done = |state: &SearchState| match config.stopping {
        Stopping::FixedLength(n) => state.t() >= n,
        Stopping::VariableLength(eps) => state.argmax().1 > 1.0 - eps,
    };
    while !done(&state) {
        if matches!(config.stopping, Stopping::VariableLength(_)) && state.t() >= VL_STEP_CAP {
            return Err(SimError::CapExceeded { steps: VL_STEP_CAP });
        }
        let q = state.step(rng)?;
        query_sizes.push(q.size_fraction());
        if let Some(tr) = trace.as_mut() {
            tr.push(state.argmax().1);
        }
    }
    let (estimate, top) = state.argmax();
    Ok(EpisodeRecord {
        tau: state.t(),
        estimate,
        truth,
        correct: estimate == truth,
        query_sizes,
        max_posterior_trace: trace,
        posterior_error: 1.0 - top,
        work: state.work(),
        max_intervals: state.max_intervals(),
    })
}

/// Estimate of a fixed-length run observed at an intermediate step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub n: u64,
    pub estimate: usize,
    pub correct: bool,
    pub posterior_error: f64,
}

/// Runs `max(checkpoints)` steps and records the estimate after each
/// checkpoint. Selection is deterministic, so the record at `n` is exactly
/// what a fixed-length run of `n` queries on the same stream would report.
pub fn run_with_checkpoints<R: Rng + ?Sized>(
    config: &SearchConfig,
    checkpoints: &[u64],
    rng: &mut R,
) -> Result<Vec<Checkpoint>, SimError> {
    let mut marks = checkpoints.to_vec();
    marks.sort_unstable();
    marks.dedup();
    let Some(&last) = marks.last() else {
        return Err(SimError::Config("no checkpoints given".into()));
    };
    let mut probe = config.clone();
    probe.stopping = Stopping::FixedLength(last.max(1));
    probe.validate()?;
    let truth = draw_truth(config, rng);
    let mut state = SearchState::new(config.strategy, config.profile, config.levels, truth)?;
    let mut out = Vec::with_capacity(marks.len());
    for &n in &marks {
        while state.t() < n {
            state.step(rng)?;
        }
        let (estimate, top) = state.argmax();
        out.push(Checkpoint { n, estimate, correct: estimate == truth, posterior_error: 1.0 - top });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn affine() -> NoiseProfile {
        NoiseProfile::affine(0.1, 0.5).unwrap()
    }

    #[test]
    fn noiseless_bisection() {
        let cfg = SearchConfig::new(3, StrategyKind::Median, NoiseProfile::Noiseless, Stopping::VariableLength(0.01));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rec = run_episode(&cfg, &mut rng).unwrap();
            assert_eq!(rec.tau, 3);
            assert!(rec.correct);
        }
    }

    #[test]
    fn single_bin_shortcut() {
        let cfg = SearchConfig::new(0, StrategyKind::Hie, affine(), Stopping::VariableLength(0.01));
        let rec = run_episode(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((rec.tau, rec.estimate, rec.correct), (0, 1, true));
    }

    #[test]
    fn fixed_length_runs_exactly_n() {
        for kind in StrategyKind::ALL {
            let cfg = SearchConfig::new(6, kind, affine(), Stopping::FixedLength(17));
            let rec = run_episode(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            assert_eq!(rec.tau, 17);
            assert_eq!(rec.query_sizes.len(), 17);
            assert_eq!(rec.max_intervals.is_some(), kind.is_connected());
        }
    }

    #[test]
    fn trace_is_recorded_on_request() {
        let mut cfg = SearchConfig::new(5, StrategyKind::Dya, affine(), Stopping::VariableLength(0.1));
        cfg.record_trace = true;
        let rec = run_episode(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let tr = rec.max_posterior_trace.unwrap();
        assert_eq!(tr.len() as u64, rec.tau);
        assert!(*tr.last().unwrap() > 0.9);
        assert!((rec.posterior_error - (1.0 - tr.last().unwrap())).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let base = SearchConfig::new(4, StrategyKind::Sort, affine(), Stopping::FixedLength(1));
        let mut c = base.clone();
        c.stopping = Stopping::FixedLength(0);
        assert!(c.validate().is_err());
        c.stopping = Stopping::VariableLength(1.0);
        assert!(c.validate().is_err());
        c = base.clone();
        c.target = Target::Fixed(17);
        assert!(c.validate().is_err());
        c.levels = 31;
        assert!(c.validate().is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn config_json_shape() {
        let mut cfg = SearchConfig::new(12, StrategyKind::Hie, affine(), Stopping::VariableLength(1e-3));
        cfg.target = Target::Fixed(7);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"L\":12") && json.contains("\"vl\":0.001") && json.contains("\"fixed\":7"));
        let back: SearchConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn checkpoints_match_separate_runs() {
        for kind in StrategyKind::ALL {
            let cfg = SearchConfig::new(7, kind, affine(), Stopping::FixedLength(1));
            let marks = [5, 12, 30];
            let cps = run_with_checkpoints(&cfg, &marks, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
            for cp in cps {
                let mut single = cfg.clone();
                single.stopping = Stopping::FixedLength(cp.n);
                let rec = run_episode(&single, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
                assert_eq!(rec.estimate, cp.estimate);
                assert_eq!(rec.posterior_error, cp.posterior_error);
            }
        }
    }
}
