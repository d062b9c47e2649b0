//! Drift constants, expected search-time bounds and rate-reliability
//! frontiers.
//!
//! The constants depend only on the worst-case crossover `p½ = p(1/2)`
//! through the laws `B1 = Bern(1 − p½)` and `B0 = Bern(p½)`. Mixtures
//! `w·B1 + (1 − w)·B0` are Bernoulli with parameter `w(1 − p½) + (1 − w)p½`.

use crate::channel::{kl_bernoulli, mutual_info_bsc, reliability_c1, BernoulliPair, ChannelError, NoiseProfile};
use crate::strategies::StrategyKind;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("{0}")]
    Domain(String),
    #[error("no search-time bound for the {0} strategy")]
    Unsupported(StrategyKind),
    #[error("alpha={alpha} is below the admissible floor {floor}")]
    BelowFloor { alpha: f64, floor: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Coefficient of the second branch of `K_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsVariant {
    /// `1/8`, the coefficient used with the search-time bound.
    #[default]
    Eighth,
    /// `1/4`, the coefficient that comes out of the drift derivation.
    Quarter,
}

fn laws(p_half: f64) -> BernoulliPair {
    BernoulliPair::from_crossover(p_half)
}

/// `D(w·B1 + (1−w)·B0 ‖ v·B1 + (1−v)·B0)`.
fn mix_kl(p_half: f64, w: f64, v: f64) -> f64 {
    let b = laws(p_half);
    kl_bernoulli(b.mixture(w), b.mixture(v))
}

/// Both branches of `K_s`: `(½·D(¼B1+¾B0 ‖ B0), c·D(B1 ‖ ¾B1+¼B0))` with
/// `c = 1/8` or `1/4`.
pub fn k_s_branches(p_half: f64, variant: KsVariant) -> (f64, f64) {
    let c = match variant {
        KsVariant::Eighth => 0.125,
        KsVariant::Quarter => 0.25,
    };
    (0.5 * mix_kl(p_half, 0.25, 0.0), c * mix_kl(p_half, 1.0, 0.75))
}

pub fn k_s(p_half: f64, variant: KsVariant) -> f64 {
    let (a, b) = k_s_branches(p_half, variant);
    a.max(b)
}

/// Both branches of `K_h`: `(I(1/3, p½), ⅔·D(⅓B1+⅔B0 ‖ B0))`.
pub fn k_h_branches(p_half: f64) -> (f64, f64) {
    (mutual_info_bsc(1.0 / 3.0, p_half), 2.0 / 3.0 * mix_kl(p_half, 1.0 / 3.0, 0.0))
}

pub fn k_h(p_half: f64) -> f64 {
    let (a, b) = k_h_branches(p_half);
    a.min(b)
}

/// `f(ρ) = ρ·D(B1 ‖ ¾B1 + ¼B0)`.
pub fn kd_f(rho: f64, p_half: f64) -> f64 {
    rho * mix_kl(p_half, 1.0, 0.75)
}

/// `g(ρ) = (½ − ρ)·D((1−4ρ)B1 + 4ρB0 ‖ (½+ρ)B1 + (½−ρ)B0)`.
pub fn kd_g(rho: f64, p_half: f64) -> f64 {
    (0.5 - rho) * mix_kl(p_half, 1.0 - 4.0 * rho, 0.5 + rho)
}

/// The three branches of `K_d`:
/// `min_{[0,¼]} max{f, g}`, `min_{[¼,½]} f` and `¼·D(¼B1+¾B0 ‖ B0)`.
pub fn k_d_branches(p_half: f64) -> [f64; 3] {
    let (_, b1) = minimize(|r| kd_f(r, p_half).max(kd_g(r, p_half)), 0.0, 0.25);
    let (_, b2) = minimize(|r| kd_f(r, p_half), 0.25, 0.5);
    [b1, b2, 0.25 * mix_kl(p_half, 0.25, 0.0)]
}

pub fn k_d(p_half: f64) -> f64 {
    k_d_branches(p_half).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn constant_k_s(profile: &NoiseProfile, variant: KsVariant) -> f64 {
    k_s(profile.p_max(), variant)
}

pub fn constant_k_h(profile: &NoiseProfile) -> f64 {
    k_h(profile.p_max())
}

pub fn constant_k_d(profile: &NoiseProfile) -> f64 {
    k_d(profile.p_max())
}

/// Drift constant paired with a strategy's bound.
pub fn strategy_constant(
    kind: StrategyKind,
    profile: &NoiseProfile,
    variant: KsVariant,
) -> Result<f64, TheoryError> {
    match kind {
        StrategyKind::Sort => Ok(constant_k_s(profile, variant)),
        StrategyKind::Hie => Ok(constant_k_h(profile)),
        StrategyKind::Dya => Ok(constant_k_d(profile)),
        StrategyKind::Median => Err(TheoryError::Unsupported(kind)),
    }
}

const GRID_POINTS: usize = 10_000;
const GOLDEN_TOL: f64 = 1e-8;

/// Minimum of a one-dimensional function on `[a, b]`: the best point of a
/// uniform grid, then golden-section search on its two neighbouring cells.
pub fn minimize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    let step = (b - a) / GRID_POINTS as f64;
    let at = |i: usize| if i == GRID_POINTS { b } else { a + step * i as f64 };
    let mut best = (a, f(a));
    let mut best_i = 0;
    for i in 1..=GRID_POINTS {
        let x = at(i);
        let v = f(x);
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(GRID_POINTS)));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Residual `log2 log2(1/(δε))/R + 1/E + (96/(R·E))·((1 − p(δ))/p(δ))²`.
pub fn residual_f(
    rate: f64,
    reliability: f64,
    profile: &NoiseProfile,
    delta: f64,
    epsilon: f64,
) -> Result<f64, TheoryError> {
    if rate.is_nan() || rate <= 0.0 || reliability.is_nan() || reliability <= 0.0 {
        return Err(TheoryError::Domain(format!(
            "rate and reliability must be positive (R={rate}, E={reliability})"
        )));
    }
    let p_delta = profile.p_at(delta)?;
    residual_from_p(rate, reliability, p_delta, delta, epsilon)
}

fn residual_from_p(
    rate: f64,
    reliability: f64,
    p_delta: f64,
    delta: f64,
    epsilon: f64,
) -> Result<f64, TheoryError> {
    let de = delta * epsilon;
    if !(de > 0.0 && de < 1.0) {
        return Err(TheoryError::Domain(format!(
            "log2 log2(1/(delta*epsilon)) needs delta*epsilon in (0, 1), got {de}"
        )));
    }
    let odds = (1.0 - p_delta) / p_delta;
    Ok((1.0 / de).log2().log2() / rate + 1.0 / reliability + 96.0 / (rate * reliability) * odds * odds)
}

/// Whether [`tau_upper_bound`] refuses an `α` below the admissible floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorCheck {
    Enforce,
    /// Compute anyway; the report records whether the floor was met.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub strategy: StrategyKind,
    pub delta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// `K_s`, `K_h` or `K_d`.
    pub constant: f64,
    pub rate_term: f64,
    pub reliability_term: f64,
    pub residual_f: f64,
    pub tau_upper: f64,
    /// `(e·log2(1/(δε)))^(−K)`.
    pub alpha_floor: f64,
    pub floor_satisfied: bool,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str =
        "strategy,delta,epsilon,alpha,K,rate_term,reliability_term,residual,tau_upper";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.delta,
            self.epsilon,
            self.alpha,
            self.constant,
            self.rate_term,
            self.reliability_term,
            self.residual_f,
            self.tau_upper
        )
    }
}

/// Upper bound on the expected search time of sort, dya or hie.
///
/// `rate_term` and `reliability_term` are the two leading queries counts
/// `log2(1/δ)/R` and `log2(1/ε)/E`, with `R = I(1/2, p(α))` (`I(1/3, p(α))`
/// for hie, `α = 2^{−l}`) and `E = C1(p(δ))`. The residual is evaluated with
/// the same `R` and `E`.
pub fn tau_upper_bound(
    strategy: StrategyKind,
    profile: &NoiseProfile,
    delta: f64,
    epsilon: f64,
    alpha: f64,
    variant: KsVariant,
    floor: FloorCheck,
) -> Result<BoundReport, TheoryError> {
    let constant = strategy_constant(strategy, profile, variant)?;
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(TheoryError::Domain(format!("delta={delta} outside (0, 1/2]")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(TheoryError::Domain(format!("epsilon={epsilon} outside (0, 1]")));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(TheoryError::Domain(format!("alpha={alpha} outside (0, 1/2]")));
    }
    let alpha_floor = (std::f64::consts::E * (1.0 / (delta * epsilon)).log2()).powf(-constant);
    let floor_satisfied = alpha > alpha_floor;
    if floor == FloorCheck::Enforce && !floor_satisfied {
        return Err(TheoryError::BelowFloor { alpha, floor: alpha_floor });
    }
    let q = if strategy == StrategyKind::Hie { 1.0 / 3.0 } else { 0.5 };
    let rate = mutual_info_bsc(q, profile.eval(alpha)?);
    let p_delta = profile.p_at(delta)?;
    let reliability = reliability_c1(p_delta);
    let rate_term = (1.0 / delta).log2() / rate;
    let reliability_term = (1.0 / epsilon).log2() / reliability;
    let residual = residual_from_p(rate, reliability, p_delta, delta, epsilon)?;
    Ok(BoundReport {
        strategy,
        delta,
        epsilon,
        alpha,
        constant,
        rate_term,
        reliability_term,
        residual_f: residual,
        tau_upper: rate_term + reliability_term + residual,
        alpha_floor,
        floor_satisfied,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontierClass {
    Optimal,
    Hie,
    Median,
}

impl FrontierClass {
    pub const ALL: [FrontierClass; 3] = [Self::Optimal, Self::Hie, Self::Median];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Hie => "hie",
            Self::Median => "median",
        }
    }
}

impl std::fmt::Display for FrontierClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FrontierClass {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| {
            TheoryError::Domain(format!("unknown frontier class '{s}' (supported: optimal, hie, median)"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub rate: f64,
    pub reliability: f64,
}

/// `(R_max, E_max)` intercepts of a class's achievable region.
pub fn frontier_intercepts(profile: &NoiseProfile, class: FrontierClass) -> (f64, f64) {
    let p_min = profile.p_min();
    let p_max = profile.p_max();
    match class {
        FrontierClass::Optimal => (mutual_info_bsc(0.5, p_min), reliability_c1(p_min)),
        FrontierClass::Hie => (mutual_info_bsc(1.0 / 3.0, p_min), reliability_c1(p_min)),
        FrontierClass::Median => {
            let i = mutual_info_bsc(0.5, p_max);
            (i, i)
        }
    }
}

pub const FRONTIER_POINTS: usize = 101;

/// Evenly spaced points on `E = E_max·(1 − R/R_max)`, from `(0, E_max)` to
/// `(R_max, 0)`.
pub fn rate_reliability_frontier(profile: &NoiseProfile, class: FrontierClass) -> Vec<FrontierPoint> {
    let (r_max, e_max) = frontier_intercepts(profile, class);
    let last = (FRONTIER_POINTS - 1) as f64;
    (0..FRONTIER_POINTS)
        .map(|j| {
            let s = j as f64 / last;
            FrontierPoint { rate: r_max * s, reliability: e_max * (1.0 - s) }
        })
        .collect()
}

/// Writes `class,R,E` rows for each class.
pub fn write_frontier_csv<W: Write>(
    mut out: W,
    profile: &NoiseProfile,
    classes: &[FrontierClass],
) -> io::Result<()> {
    writeln!(out, "class,R,E")?;
    for &class in classes {
        for pt in rate_reliability_frontier(profile, class) {
            writeln!(out, "{class},{},{}", pt.rate, pt.reliability)?;
        }
    }
    Ok(())
}
