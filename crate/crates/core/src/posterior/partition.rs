use super::{likelihoods, Posterior, PosteriorDense, PosteriorError, QuerySet, Segment};
use super::NORMALIZATION_TOL;
use crate::channel::NoiseProfile;
use std::io::{self, Write};

/// Interval `lo..=hi` of the partition with its total mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
    pub mass: f64,
}

impl Interval {
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

/// Piecewise-constant posterior over contiguous, disjoint intervals covering
/// `1..=n`.
///
/// Updates only accept contiguous queries. An update splits at most two
/// intervals, so the count grows by at most two per observation. Pieces with
/// equal density are never merged back together.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPartition {
    intervals: Vec<Interval>,
    n_bins: usize,
    // cum[u] = mass of intervals[..u]
    cum: Vec<f64>,
}

impl PosteriorPartition {
    pub fn uniform(n_bins: usize) -> Result<Self, PosteriorError> {
        if n_bins == 0 {
            return Err(PosteriorError::Empty);
        }
        Ok(Self::from_parts(vec![Interval { lo: 1, hi: n_bins, mass: 1.0 }], n_bins))
    }

    pub fn from_intervals(
        intervals: Vec<Interval>,
        n_bins: usize,
    ) -> Result<Self, PosteriorError> {
        let tiling = |reason: String| PosteriorError::BadTiling { n_bins, reason };
        if intervals.is_empty() {
            return Err(PosteriorError::Empty);
        }
        let mut expect_lo = 1;
        for iv in &intervals {
            if iv.lo != expect_lo {
                return Err(tiling(format!("interval starts at {} instead of {expect_lo}", iv.lo)));
            }
            if iv.hi < iv.lo {
                return Err(tiling(format!("empty interval [{}, {}]", iv.lo, iv.hi)));
            }
            if !iv.mass.is_finite() || iv.mass < 0.0 {
                return Err(PosteriorError::InvalidMass { bin: iv.lo, value: iv.mass });
            }
            expect_lo = iv.hi + 1;
        }
        if expect_lo != n_bins + 1 {
            return Err(tiling(format!("coverage ends at {}", expect_lo - 1)));
        }
        let sum: f64 = intervals.iter().map(|iv| iv.mass).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(PosteriorError::NotNormalized { sum });
        }
        let mut post = Self::from_parts(intervals, n_bins);
        post.normalize(sum);
        Ok(post)
    }

    fn from_parts(intervals: Vec<Interval>, n_bins: usize) -> Self {
        let mut post = Self { intervals, n_bins, cum: Vec::new() };
        post.rebuild_cumulative();
        post
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Number of intervals currently stored.
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn max_density(&self) -> f64 {
        self.intervals.iter().map(Interval::density).fold(0.0, f64::max)
    }

    /// Bayes update for a contiguous query `[s1, s2]`.
    ///
    /// The intervals containing `s1` and `s2` are cut so that the query is a
    /// union of whole intervals (mass shared in proportion to length, empty
    /// pieces dropped); then every interval is reweighted by the likelihood
    /// of its membership and the result renormalized.
    pub fn bayes_update(
        &mut self,
        query: &QuerySet,
        y: bool,
        profile: &NoiseProfile,
    ) -> Result<(), PosteriorError> {
        if query.n_bins() != self.n_bins {
            return Err(PosteriorError::BinCountMismatch {
                query: query.n_bins(),
                posterior: self.n_bins,
            });
        }
        let run = query
            .single_run()
            .ok_or(PosteriorError::NotContiguous { runs: query.runs().len() })?;
        let (lik_in, lik_out) = likelihoods(profile, query, y)?;

        let mut next = Vec::with_capacity(self.intervals.len() + 2);
        for iv in &self.intervals {
            let density = iv.mass / iv.len() as f64;
            let mut lo = iv.lo;
            for cut in [run.lo, run.hi + 1] {
                if lo < cut && cut <= iv.hi {
                    let len = cut - lo;
                    next.push(Interval { lo, hi: cut - 1, mass: density * len as f64 });
                    lo = cut;
                }
            }
            let mass = if lo == iv.lo { iv.mass } else { density * (iv.hi - lo + 1) as f64 };
            next.push(Interval { lo, hi: iv.hi, mass });
        }

        let mut sum = 0.0;
        for iv in &mut next {
            let inside = run.lo <= iv.lo && iv.hi <= run.hi;
            iv.mass *= if inside { lik_in } else { lik_out };
            sum += iv.mass;
        }
        if !sum.is_finite() || sum <= 0.0 {
            return Err(PosteriorError::NoLikelihoodMass);
        }
        self.intervals = next;
        self.normalize(sum);
        Ok(())
    }

    fn normalize(&mut self, sum: f64) {
        let inv = 1.0 / sum;
        for iv in &mut self.intervals {
            iv.mass *= inv;
        }
        self.rebuild_cumulative();
    }

    fn rebuild_cumulative(&mut self) {
        self.cum.clear();
        self.cum.reserve(self.intervals.len() + 1);
        let mut acc = 0.0;
        self.cum.push(acc);
        for iv in &self.intervals {
            acc += iv.mass;
            self.cum.push(acc);
        }
    }

    /// Index of the interval containing `bin`.
    pub fn locate(&self, bin: usize) -> usize {
        self.intervals.partition_point(|iv| iv.hi < bin)
    }

    /// Expands to one mass per bin.
    pub fn flatten(&self) -> PosteriorDense {
        let mut mass = Vec::with_capacity(self.n_bins);
        for iv in &self.intervals {
            let d = iv.density();
            mass.extend(std::iter::repeat_n(d, iv.len()));
        }
        let sum: f64 = mass.iter().sum();
        PosteriorDense::from_weights(mass).unwrap_or_else(|_| {
            unreachable!("partition with total mass {sum} cannot be flattened")
        })
    }

    /// Writes `lo,hi,mass` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "lo,hi,mass")?;
        for iv in &self.intervals {
            writeln!(out, "{},{},{}", iv.lo, iv.hi, iv.mass)?;
        }
        Ok(())
    }
}

impl Posterior for PosteriorPartition {
    type Segments<'a> = std::iter::Map<std::slice::Iter<'a, Interval>, fn(&Interval) -> Segment>;

    fn n_bins(&self) -> usize {
        self.n_bins
    }

    fn segments(&self) -> Self::Segments<'_> {
        fn seg(iv: &Interval) -> Segment {
            Segment { lo: iv.lo, hi: iv.hi, mass: iv.mass }
        }
        self.intervals.iter().map(seg as fn(&Interval) -> Segment)
    }

    fn cumulative(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let u = self.locate(k);
        let iv = &self.intervals[u];
        if k == iv.hi {
            return self.cum[u + 1];
        }
        self.cum[u] + iv.density() * (k - iv.lo + 1) as f64
    }

    fn range_mass(&self, lo: usize, hi: usize) -> f64 {
        if hi < lo {
            return 0.0;
        }
        let (a, b) = (self.locate(lo), self.locate(hi));
        if a == b {
            return self.intervals[a].density() * (hi - lo + 1) as f64;
        }
        let first = &self.intervals[a];
        let last = &self.intervals[b];
        let head = first.density() * (first.hi - lo + 1) as f64;
        let tail = last.density() * (hi - last.lo + 1) as f64;
        let middle: f64 = self.intervals[a + 1..b].iter().map(|iv| iv.mass).sum();
        head + middle + tail
    }
}
