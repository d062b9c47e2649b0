//! Size-dependent binary measurement channel.
//!
//! A query set `S` of normalized size `x = δ|S|` is answered through a binary
//! symmetric channel whose crossover probability `p(x)` is non-decreasing in
//! `x`. This module holds the noise profiles, the channel sampler, and the
//! scalar information measures (entropy, mutual information, KL divergence)
//! that the strategies and bounds are built from.
//!
//! Every information quantity is measured in bits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest crossover probability a profile evaluates to.
pub const P_FLOOR: f64 = 1e-9;
/// Distance kept between the largest crossover probability and 1/2.
pub const P_CEIL_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("size fraction {0} outside [0, 1/2]")]
    SizeFraction(f64),
    #[error("query size fraction {0} outside [0, 1]")]
    QueryFraction(f64),
    #[error("invalid noise profile: {0}")]
    InvalidProfile(String),
}

/// Crossover probability as a function of the normalized query size.
///
/// Serialized as `{"kind":"affine","a":0.1,"b":0.5}`,
/// `{"kind":"constant","p":0.3}` or `{"kind":"noiseless"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseProfile {
    /// `p(x) = a + b·x`.
    Affine { a: f64, b: f64 },
    /// Measurement-independent noise.
    Constant { p: f64 },
    /// `p ≡ 0` with no clamping. Only meant for regression tests of the
    /// noiseless bisection limit.
    Noiseless,
}

impl NoiseProfile {
    pub fn affine(a: f64, b: f64) -> Result<Self, ChannelError> {
        Self::Affine { a, b }.validated()
    }

    pub fn constant(p: f64) -> Result<Self, ChannelError> {
        Self::Constant { p }.validated()
    }

    /// Checks that the profile describes a non-decreasing map into `[0, 1]`.
    pub fn validated(self) -> Result<Self, ChannelError> {
        match self {
            Self::Affine { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(ChannelError::InvalidProfile(format!(
                        "affine coefficients must be finite (a={a}, b={b})"
                    )));
                }
                if b < 0.0 {
                    return Err(ChannelError::InvalidProfile(format!(
                        "affine slope must be non-negative (b={b})"
                    )));
                }
                if !(0.0..=1.0).contains(&a) {
                    return Err(ChannelError::InvalidProfile(format!(
                        "affine intercept must lie in [0, 1] (a={a})"
                    )));
                }
            }
            Self::Constant { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ChannelError::InvalidProfile(format!(
                        "constant crossover must lie in [0, 1] (p={p})"
                    )));
                }
            }
            Self::Noiseless => {}
        }
        Ok(self)
    }

    /// Crossover probability `p(x)` for `x ∈ [0, 1/2]`, clamped into
    /// `[P_FLOOR, 1/2 − P_CEIL_MARGIN]` (no clamping for [`Self::Noiseless`]).
    pub fn eval(&self, size_fraction: f64) -> Result<f64, ChannelError> {
        if !(0.0..=0.5).contains(&size_fraction) {
            return Err(ChannelError::SizeFraction(size_fraction));
        }
        Ok(self.eval_unchecked(size_fraction))
    }

    /// Crossover probability for a query covering the fraction `x ∈ [0, 1]`
    /// of the search space. Sizes beyond 1/2 see the worst-case noise
    /// `p(1/2)`.
    pub fn crossover_for_query(&self, size_fraction: f64) -> Result<f64, ChannelError> {
        if !(0.0..=1.0).contains(&size_fraction) {
            return Err(ChannelError::QueryFraction(size_fraction));
        }
        Ok(self.eval_unchecked(size_fraction.min(0.5)))
    }

    /// `p_min = p(0)`.
    pub fn p_min(&self) -> f64 {
        self.eval_unchecked(0.0)
    }

    /// `p_max = p(1/2)`.
    pub fn p_max(&self) -> f64 {
        self.eval_unchecked(0.5)
    }

    /// `p(δ)`, the noise of a single-bin query.
    pub fn p_at(&self, delta: f64) -> Result<f64, ChannelError> {
        self.eval(delta)
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let raw = match *self {
            Self::Affine { a, b } => a + b * x,
            Self::Constant { p } => p,
            Self::Noiseless => return 0.0,
        };
        raw.clamp(P_FLOOR, 0.5 - P_CEIL_MARGIN)
    }

    /// Intercept and slope columns used in result tables. A constant profile
    /// reports `(p, 0)`.
    pub fn table_coefficients(&self) -> (f64, f64) {
        match *self {
            Self::Affine { a, b } => (a, b),
            Self::Constant { p } => (p, 0.0),
            Self::Noiseless => (0.0, 0.0),
        }
    }
}

/// The two observation laws of a binary symmetric channel with crossover
/// `p`: `B0 = Bern(p)` (target outside the query) and `B1 = Bern(1 − p)`
/// (target inside). Parameters are `P(Y = 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPair {
    pub p0: f64,
    pub p1: f64,
}

impl BernoulliPair {
    pub fn from_crossover(p: f64) -> Self {
        Self { p0: p, p1: 1.0 - p }
    }

    /// Parameter of the mixture `w·B1 + (1 − w)·B0`.
    pub fn mixture(&self, w: f64) -> f64 {
        w * self.p1 + (1.0 - w) * self.p0
    }
}

/// Draws `Y = 1(θ ∈ S) ⊕ Z` with `Z ~ Bern(p(x))`.
pub fn sample_observation<R: Rng + ?Sized>(
    profile: &NoiseProfile,
    target_in_set: bool,
    size_fraction: f64,
    rng: &mut R,
) -> Result<bool, ChannelError> {
    let p = profile.crossover_for_query(size_fraction)?;
    let flip = rng.random::<f64>() < p;
    Ok(target_in_set ^ flip)
}

fn xlog2x_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).log2()
    }
}

/// `H_b(q)` in bits, with `0·log 0 = 0`.
pub fn binary_entropy(q: f64) -> f64 {
    let mut h = 0.0;
    if q > 0.0 {
        h -= q * q.log2();
    }
    if q < 1.0 {
        h -= (1.0 - q) * (1.0 - q).log2();
    }
    h
}

/// `I(q, p)`: mutual information between `X ~ Bern(q)` and the output of a
/// BSC with crossover `p`.
pub fn mutual_info_bsc(q: f64, p: f64) -> f64 {
    let out = q * (1.0 - p) + (1.0 - q) * p;
    (binary_entropy(out) - binary_entropy(p)).max(0.0)
}

/// `D(Bern(a) ‖ Bern(b))` in bits. Returns `+∞` when `a` puts mass on an
/// outcome `b` excludes.
pub fn kl_bernoulli(a: f64, b: f64) -> f64 {
    let d = xlog2x_ratio(a, b) + xlog2x_ratio(1.0 - a, 1.0 - b);
    // Rounding can leave tiny negatives for a ≈ b.
    d.max(0.0)
}

/// `C1(p) = D(Bern(p) ‖ Bern(1 − p)) = (1 − 2p)·log2((1 − p)/p)`.
pub fn reliability_c1(p: f64) -> f64 {
    if p == 0.0 {
        return f64::INFINITY;
    }
    (1.0 - 2.0 * p) * ((1.0 - p) / p).log2()
}
