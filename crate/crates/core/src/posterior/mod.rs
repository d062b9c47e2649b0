//! Bayesian posterior over the `1/δ` bins.
//!
//! Bins are numbered `1..=n` throughout the crate. Two representations are
//! kept interchangeable:
//!
//! * [`PosteriorDense`] stores one mass per bin and accepts arbitrary query
//!   sets.
//! * [`PosteriorPartition`] stores the posterior as a piecewise-constant
//!   function over contiguous intervals. Starting from the uniform prior and
//!   updating only with contiguous queries, it never holds more than `2t + 1`
//!   intervals after `t` updates, so both storage and update cost stay
//!   proportional to the number of queries rather than to `1/δ`.
//!
//! Both implement [`Posterior`], which is all the connected-geometry
//! strategies need.

mod dense;
mod partition;
mod query;

pub use dense::PosteriorDense;
pub use partition::{Interval, PosteriorPartition};
pub use query::{QuerySet, Run};

use crate::channel::{ChannelError, NoiseProfile};
use thiserror::Error;

/// Tolerance on `Σ mass = 1` when accepting externally built posteriors.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PosteriorError {
    #[error("posterior needs at least one bin")]
    Empty,
    #[error("bin {bin} outside 1..={n_bins}")]
    BinOutOfRange { bin: usize, n_bins: usize },
    #[error("query set is empty")]
    EmptyQuery,
    #[error("query built for {query} bins applied to a posterior over {posterior} bins")]
    BinCountMismatch { query: usize, posterior: usize },
    #[error("partition update requires a contiguous query, got {runs} runs")]
    NotContiguous { runs: usize },
    #[error("invalid mass {value} at bin {bin}")]
    InvalidMass { bin: usize, value: f64 },
    #[error("masses sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("intervals do not tile 1..={n_bins}: {reason}")]
    BadTiling { n_bins: usize, reason: String },
    #[error("observation has zero likelihood under every bin")]
    NoLikelihoodMass,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// A maximal run of bins `lo..=hi` carrying total mass `mass` spread evenly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: usize,
    pub hi: usize,
    pub mass: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn density(&self) -> f64 {
        self.mass / self.len() as f64
    }
}

/// Read access shared by both posterior representations.
pub trait Posterior {
    type Segments<'a>: Iterator<Item = Segment>
    where
        Self: 'a;

    fn n_bins(&self) -> usize;

    /// Piecewise-constant pieces in bin order. A dense posterior yields one
    /// piece per bin.
    fn segments(&self) -> Self::Segments<'_>;

    /// `Σ_{i ≤ k} π_i` for `0 ≤ k ≤ n`. Callers guarantee the range.
    fn cumulative(&self, k: usize) -> f64;

    /// Mass of `lo..=hi`.
    fn range_mass(&self, lo: usize, hi: usize) -> f64 {
        if hi < lo {
            return 0.0;
        }
        self.cumulative(hi) - self.cumulative(lo - 1)
    }

    /// The most likely bin (smallest index on ties) and its mass.
    fn argmax(&self) -> (usize, f64) {
        let mut best = (1, f64::NEG_INFINITY);
        for seg in self.segments() {
            let d = seg.density();
            if d > best.1 {
                best = (seg.lo, d);
            }
        }
        best
    }

    /// Checked `Σ_{i ≤ k} π_i` for `1 ≤ k ≤ n`.
    fn prefix_mass(&self, k: usize) -> Result<f64, PosteriorError> {
        if k == 0 || k > self.n_bins() {
            return Err(PosteriorError::BinOutOfRange { bin: k, n_bins: self.n_bins() });
        }
        Ok(self.cumulative(k))
    }
}

/// `(P(y | θ ∈ S), P(y | θ ∉ S))` for the observation `y` to query `S`.
pub(crate) fn likelihoods(
    profile: &NoiseProfile,
    query: &QuerySet,
    y: bool,
) -> Result<(f64, f64), PosteriorError> {
    let p = profile.crossover_for_query(query.size_fraction())?;
    Ok(if y { (1.0 - p, p) } else { (p, 1.0 - p) })
}

/// `U(π) = Σ π_i log2(π_i / (1 − π_i))`, skipping zero entries.
///
/// `1 − π_i` is evaluated as the sum of the other entries so that nearly
/// degenerate posteriors keep a finite value. An entry holding all the mass
/// gives `+∞`.
pub fn avg_log_likelihood(masses: &[f64]) -> f64 {
    let n = masses.len();
    // suffix[i] = Σ_{j ≥ i} masses[j]
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + masses[i];
    }
    let mut prefix = 0.0;
    let mut u = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        if m > 0.0 {
            let rest = prefix + suffix[i + 1];
            if rest <= 0.0 {
                return f64::INFINITY;
            }
            u += m * (m / rest).log2();
        }
        prefix += m;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avg_log_likelihood_values() {
        assert!((avg_log_likelihood(&[0.25; 4]) + 3f64.log2()).abs() < 1e-12);
        assert_eq!(avg_log_likelihood(&[0.5, 0.5]), 0.0);
        assert!((avg_log_likelihood(&[0.9, 0.1]) - 2.535_940_001_153_85).abs() < 1e-9);
        assert_eq!(avg_log_likelihood(&[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn avg_log_likelihood_keeps_precision_near_certainty() {
        let u = avg_log_likelihood(&[1.0, 1e-30]);
        assert!(u.is_finite());
        assert!((u - 30.0 * 10f64.log2()).abs() < 1e-6);
    }
}
