use super::{avg_log_likelihood, likelihoods, Posterior, PosteriorError, QuerySet, Segment};
use super::NORMALIZATION_TOL;
use crate::channel::NoiseProfile;

/// One probability per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDense {
    mass: Vec<f64>,
}

impl PosteriorDense {
    pub fn uniform(n_bins: usize) -> Result<Self, PosteriorError> {
        if n_bins == 0 {
            return Err(PosteriorError::Empty);
        }
        Ok(Self { mass: vec![1.0 / n_bins as f64; n_bins] })
    }

    /// Accepts any non-negative vector summing to 1 within
    /// [`NORMALIZATION_TOL`] and renormalizes it exactly.
    pub fn from_masses(mass: Vec<f64>) -> Result<Self, PosteriorError> {
        if mass.is_empty() {
            return Err(PosteriorError::Empty);
        }
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(PosteriorError::InvalidMass { bin: i + 1, value: m });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(PosteriorError::NotNormalized { sum });
        }
        let mut post = Self { mass };
        post.normalize(sum);
        Ok(post)
    }

    /// Normalizes an arbitrary non-negative weight vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, PosteriorError> {
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(PosteriorError::NotNormalized { sum });
        }
        Self::from_masses(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// `π_bin` for a 1-based bin.
    pub fn mass(&self, bin: usize) -> f64 {
        self.mass[bin - 1]
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.mass
    }

    pub fn max_mass(&self) -> f64 {
        self.mass.iter().copied().fold(0.0, f64::max)
    }

    /// `U(π)`.
    pub fn avg_log_likelihood(&self) -> f64 {
        avg_log_likelihood(&self.mass)
    }

    /// Bayes update after observing `y` for query `query`:
    /// `π_i ∝ π_i · P(y | X = 1(i ∈ S))`, renormalized.
    pub fn bayes_update(
        &mut self,
        query: &QuerySet,
        y: bool,
        profile: &NoiseProfile,
    ) -> Result<(), PosteriorError> {
        self.check_query(query)?;
        let (lik_in, lik_out) = likelihoods(profile, query, y)?;
        self.reweight(query, lik_in, lik_out)
    }

    /// Non-mutating variant of [`Self::bayes_update`].
    pub fn updated(
        &self,
        query: &QuerySet,
        y: bool,
        profile: &NoiseProfile,
    ) -> Result<Self, PosteriorError> {
        let mut next = self.clone();
        next.bayes_update(query, y, profile)?;
        Ok(next)
    }

    pub(crate) fn check_query(&self, query: &QuerySet) -> Result<(), PosteriorError> {
        if query.n_bins() != self.mass.len() {
            return Err(PosteriorError::BinCountMismatch {
                query: query.n_bins(),
                posterior: self.mass.len(),
            });
        }
        Ok(())
    }

    /// Multiplies members of `query` by `lik_in`, the rest by `lik_out`,
    /// then renormalizes.
    pub(crate) fn reweight(
        &mut self,
        query: &QuerySet,
        lik_in: f64,
        lik_out: f64,
    ) -> Result<(), PosteriorError> {
        let mut next_lo = 1;
        for run in query.runs() {
            for m in &mut self.mass[next_lo - 1..run.lo - 1] {
                *m *= lik_out;
            }
            for m in &mut self.mass[run.lo - 1..run.hi] {
                *m *= lik_in;
            }
            next_lo = run.hi + 1;
        }
        for m in &mut self.mass[next_lo - 1..] {
            *m *= lik_out;
        }
        let sum: f64 = self.mass.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(PosteriorError::NoLikelihoodMass);
        }
        self.normalize(sum);
        Ok(())
    }

    fn normalize(&mut self, sum: f64) {
        let inv = 1.0 / sum;
        for m in &mut self.mass {
            *m *= inv;
        }
    }
}

impl Posterior for PosteriorDense {
    type Segments<'a> = std::iter::Map<
        std::iter::Enumerate<std::slice::Iter<'a, f64>>,
        fn((usize, &f64)) -> Segment,
    >;

    fn n_bins(&self) -> usize {
        self.mass.len()
    }

    fn segments(&self) -> Self::Segments<'_> {
        fn unit((i, &m): (usize, &f64)) -> Segment {
            Segment { lo: i + 1, hi: i + 1, mass: m }
        }
        self.mass.iter().enumerate().map(unit as fn((usize, &f64)) -> Segment)
    }

    fn cumulative(&self, k: usize) -> f64 {
        self.mass[..k].iter().sum()
    }

    fn range_mass(&self, lo: usize, hi: usize) -> f64 {
        if hi < lo {
            return 0.0;
        }
        self.mass[lo - 1..hi].iter().sum()
    }
}
