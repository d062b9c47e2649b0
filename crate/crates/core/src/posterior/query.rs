use super::PosteriorError;
use serde::{Deserialize, Serialize};

/// Inclusive run of bins `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Run {
    pub lo: usize,
    pub hi: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, bin: usize) -> bool {
        self.lo <= bin && bin <= self.hi
    }
}

/// A query set `S ⊆ {1, …, n}` stored as sorted, non-adjacent runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuerySet {
    runs: Vec<Run>,
    n_bins: usize,
    cardinality: usize,
}

impl QuerySet {
    /// The contiguous set `lo..=hi`.
    pub fn interval(lo: usize, hi: usize, n_bins: usize) -> Result<Self, PosteriorError> {
        if lo == 0 || lo > n_bins {
            return Err(PosteriorError::BinOutOfRange { bin: lo, n_bins });
        }
        if hi > n_bins {
            return Err(PosteriorError::BinOutOfRange { bin: hi, n_bins });
        }
        if hi < lo {
            return Err(PosteriorError::EmptyQuery);
        }
        Ok(Self { runs: vec![Run { lo, hi }], n_bins, cardinality: hi - lo + 1 })
    }

    /// Builds a set from arbitrary bins; duplicates are ignored.
    pub fn from_bins<I>(bins: I, n_bins: usize) -> Result<Self, PosteriorError>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut bins: Vec<usize> = bins.into_iter().collect();
        bins.sort_unstable();
        bins.dedup();
        Self::from_sorted_unique(&bins, n_bins)
    }

    /// Builds a set from strictly increasing bins.
    pub fn from_sorted_unique(bins: &[usize], n_bins: usize) -> Result<Self, PosteriorError> {
        let (&first, &last) = match (bins.first(), bins.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(PosteriorError::EmptyQuery),
        };
        if first == 0 {
            return Err(PosteriorError::BinOutOfRange { bin: 0, n_bins });
        }
        if last > n_bins {
            return Err(PosteriorError::BinOutOfRange { bin: last, n_bins });
        }
        let mut runs: Vec<Run> = Vec::new();
        for &b in bins {
            match runs.last_mut() {
                Some(r) if r.hi + 1 == b => r.hi = b,
                _ => runs.push(Run { lo: b, hi: b }),
            }
        }
        Ok(Self { runs, n_bins, cardinality: bins.len() })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// `|S|`.
    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    /// `δ|S|`.
    pub fn size_fraction(&self) -> f64 {
        self.cardinality as f64 / self.n_bins as f64
    }

    pub fn is_contiguous(&self) -> bool {
        self.runs.len() == 1
    }

    /// The single run of a contiguous set.
    pub fn single_run(&self) -> Option<Run> {
        match self.runs.as_slice() {
            [r] => Some(*r),
            _ => None,
        }
    }

    pub fn contains(&self, bin: usize) -> bool {
        let idx = self.runs.partition_point(|r| r.hi < bin);
        self.runs.get(idx).is_some_and(|r| r.lo <= bin)
    }

    /// Iterates the member bins in increasing order.
    pub fn bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.runs.iter().flat_map(|r| r.lo..=r.hi)
    }
}
