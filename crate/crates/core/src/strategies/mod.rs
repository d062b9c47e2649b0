//! Query-selection rules.
//!
//! Every rule is a posterior-matching step: it picks, inside its own
//! constraint class, the query set whose posterior mass is closest to 1/2.
//!
//! | rule   | query class                                   | posterior |
//! |--------|-----------------------------------------------|-----------|
//! | median | prefixes `[1, k]`                             | partition |
//! | sort   | top-`k` bins of the sorted posterior          | dense     |
//! | hie    | dyadic nodes around the heaviest ≥½ node      | partition |
//! | dya    | `[d, k]` anchored at the heaviest ≥½ node     | partition |
//!
//! Ties break toward the smaller index or `k`; hie prefers the deeper level
//! first. Masses within [`TIE_TOL`] of each other count as tied.

mod diagnostics;
mod tree;

pub use diagnostics::{
    binned_sorted_loglik, ejs_divergence, expected_drift, js_divergence, nested_loglik,
};
pub use tree::{dyadic_levels, heaviest_node, TreeNode};

use crate::channel::ChannelError;
use crate::posterior::{Posterior, PosteriorDense, PosteriorError, QuerySet};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Distances to 1/2 closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("{n_bins} bins is not a power of two")]
    NotDyadic { n_bins: usize },
    #[error("unknown strategy '{0}' (supported: median, sort, dya, hie)")]
    UnknownStrategy(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Median,
    Sort,
    Dya,
    Hie,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Median, Self::Sort, Self::Dya, Self::Hie];
    /// The size-aware rules, as opposed to the median baseline.
    pub const PROPOSED: [StrategyKind; 3] = [Self::Sort, Self::Dya, Self::Hie];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Median => "median",
            Self::Sort => "sort",
            Self::Dya => "dya",
            Self::Hie => "hie",
        }
    }

    /// Whether every query is a single contiguous run.
    pub fn is_connected(&self) -> bool {
        !matches!(self, Self::Sort)
    }

    pub fn requires_dyadic(&self) -> bool {
        matches!(self, Self::Dya | Self::Hie)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_owned()))
    }
}

/// Elementary-operation counter for complexity accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter(pub u64);

impl OpCounter {
    pub fn tick(&mut self) {
        self.0 += 1;
    }

    pub fn add(&mut self, n: u64) {
        self.0 += n;
    }
}

/// Smallest `k ≥ start` minimizing `|π_[start,k] − 1/2|`.
///
/// `|π_[start,k] − 1/2|` is unimodal in `k`, so within one constant-density
/// segment only the ends and the two bins around the crossing need checking,
/// and the scan stops once the running mass reaches 1/2.
fn closest_to_half<P: Posterior + ?Sized>(post: &P, start: usize, ops: &mut OpCounter) -> usize {
    let mut best_k = start;
    let mut best = f64::INFINITY;
    let mut acc = 0.0;
    for seg in post.segments() {
        if seg.hi < start {
            continue;
        }
        ops.tick();
        let lo = seg.lo.max(start);
        let len = seg.hi - lo + 1;
        let d = seg.density();
        let seg_mass = if lo == seg.lo { seg.mass } else { d * len as f64 };
        let mut consider = |j: usize| {
            let m = if j == len { acc + seg_mass } else { acc + d * j as f64 };
            let dist = (m - 0.5).abs();
            if dist < best - TIE_TOL {
                best = dist;
                best_k = lo + j - 1;
            }
        };
        consider(1);
        if d > 0.0 && len > 2 {
            let x = (0.5 - acc) / d;
            if x > 1.0 && x < len as f64 {
                let f = x.floor() as usize;
                consider(f);
                consider(f + 1);
            }
        }
        consider(len);
        acc += seg_mass;
        if acc >= 0.5 {
            break;
        }
    }
    best_k
}

/// Prefix query `[1, k*]` at the posterior median.
pub fn select_median_pm<P: Posterior + ?Sized>(
    post: &P,
    ops: &mut OpCounter,
) -> Result<QuerySet, StrategyError> {
    let k = closest_to_half(post, 1, ops);
    Ok(QuerySet::interval(1, k, post.n_bins())?)
}

/// Node around the heaviest ≥½ node whose mass is closest to 1/2.
pub fn select_hie_pm<P: Posterior + ?Sized>(
    post: &P,
    ops: &mut OpCounter,
) -> Result<QuerySet, StrategyError> {
    let (node, _) = select_hie_node(post, ops)?;
    let levels = dyadic_levels(post.n_bins())?;
    let (lo, hi) = node.interval(levels);
    Ok(QuerySet::interval(lo, hi, post.n_bins())?)
}

/// The node chosen by [`select_hie_pm`] and its mass.
pub fn select_hie_node<P: Posterior + ?Sized>(
    post: &P,
    ops: &mut OpCounter,
) -> Result<(TreeNode, f64), StrategyError> {
    let levels = dyadic_levels(post.n_bins())?;
    let (star, star_mass) = heaviest_node(post, ops)?;
    if star.level == levels {
        return Ok((star, star_mass));
    }
    let [left, right] = star.children();
    // Deeper candidates first so that ties resolve toward them.
    let candidates = [
        (left, left.mass(post, levels)),
        (right, right.mass(post, levels)),
        (star, star_mass),
    ];
    ops.add(candidates.len() as u64);
    let mut best = candidates[0];
    for &cand in &candidates[1..] {
        if (cand.1 - 0.5).abs() < (best.1 - 0.5).abs() - TIE_TOL {
            best = cand;
        }
    }
    Ok(best)
}

/// `[d, k*]` with `d` the left edge of the heaviest ≥½ node.
pub fn select_dya_pm<P: Posterior + ?Sized>(
    post: &P,
    ops: &mut OpCounter,
) -> Result<QuerySet, StrategyError> {
    let levels = dyadic_levels(post.n_bins())?;
    let (star, _) = heaviest_node(post, ops)?;
    let (d, _) = star.interval(levels);
    let k = closest_to_half(post, d, ops);
    Ok(QuerySet::interval(d, k, post.n_bins())?)
}

/// Bins sorted by mass descending, index ascending on ties (0-based).
pub fn sorted_order(post: &PosteriorDense, ops: &mut OpCounter) -> Vec<u32> {
    let m = post.masses();
    let mut order: Vec<u32> = (0..m.len() as u32).collect();
    let mut cmps = 0u64;
    order.sort_by(|&a, &b| {
        cmps += 1;
        m[b as usize].total_cmp(&m[a as usize]).then(a.cmp(&b))
    });
    ops.add(cmps);
    order
}

/// Length `k*` of the sorted prefix with mass closest to 1/2.
fn sorted_prefix_len(post: &PosteriorDense, order: &[u32], ops: &mut OpCounter) -> usize {
    let m = post.masses();
    let mut best_k = 1;
    let mut best = f64::INFINITY;
    let mut acc = 0.0;
    for (k, &i) in order.iter().enumerate() {
        ops.tick();
        acc += m[i as usize];
        let dist = (acc - 0.5).abs();
        if dist < best - TIE_TOL {
            best = dist;
            best_k = k + 1;
        }
        if acc >= 0.5 {
            break;
        }
    }
    best_k
}

fn top_k_query(order: &[u32], k: usize, n_bins: usize) -> Result<QuerySet, StrategyError> {
    let mut bins: Vec<usize> = order[..k].iter().map(|&i| i as usize + 1).collect();
    bins.sort_unstable();
    Ok(QuerySet::from_sorted_unique(&bins, n_bins)?)
}

/// Top bins of the sorted posterior whose total mass is closest to 1/2.
pub fn select_sort_pm(post: &PosteriorDense, ops: &mut OpCounter) -> Result<QuerySet, StrategyError> {
    let order = sorted_order(post, ops);
    let k = sorted_prefix_len(post, &order, ops);
    top_k_query(&order, k, post.n_bins())
}

/// sortPM with the sorted order carried across updates.
///
/// A sortPM update scales the queried top-`k` prefix and the remaining bins
/// by one factor each, which keeps both sublists sorted. The new order is
/// therefore a linear merge of the two. If rounding ever breaks the order
/// (checked in linear time), a full sort is done instead.
#[derive(Debug, Clone)]
pub struct SortPmTracker {
    order: Vec<u32>,
    // Length of the prefix queried by the last call to `select`.
    last_k: Option<usize>,
    scratch: Vec<u32>,
}

impl SortPmTracker {
    pub fn new(post: &PosteriorDense, ops: &mut OpCounter) -> Self {
        Self { order: sorted_order(post, ops), last_k: None, scratch: Vec::new() }
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn select(
        &mut self,
        post: &PosteriorDense,
        ops: &mut OpCounter,
    ) -> Result<QuerySet, StrategyError> {
        let k = sorted_prefix_len(post, &self.order, ops);
        self.last_k = Some(k);
        top_k_query(&self.order, k, post.n_bins())
    }

    /// Restores the order after `post` was updated with the last selected
    /// query.
    pub fn after_update(&mut self, post: &PosteriorDense, ops: &mut OpCounter) {
        let m = post.masses();
        let before = |a: u32, b: u32| {
            let (ma, mb) = (m[a as usize], m[b as usize]);
            ma > mb || (ma == mb && a < b)
        };
        if let Some(k) = self.last_k.take() {
            let (head, tail) = self.order.split_at(k);
            self.scratch.clear();
            self.scratch.reserve(self.order.len());
            let (mut i, mut j) = (0, 0);
            while i < head.len() && j < tail.len() {
                ops.tick();
                if before(tail[j], head[i]) {
                    self.scratch.push(tail[j]);
                    j += 1;
                } else {
                    self.scratch.push(head[i]);
                    i += 1;
                }
            }
            self.scratch.extend_from_slice(&head[i..]);
            self.scratch.extend_from_slice(&tail[j..]);
            std::mem::swap(&mut self.order, &mut self.scratch);
        }
        ops.add(self.order.len() as u64);
        if !self.order.windows(2).all(|w| before(w[0], w[1])) {
            self.order = sorted_order(post, ops);
        }
    }
}
