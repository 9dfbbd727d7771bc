//! Execution strategy for the enumeration-heavy kernels.
//!
//! With the `parallel` feature (on by default) the hot loops fan out over a
//! rayon pool; without it everything runs on the calling thread. Both paths
//! produce identical results: work is split into fixed-size chunks whose
//! partial results are reduced in chunk order, so floating-point sums do not
//! depend on the thread count.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items handed to a single task by the chunked reducers.
pub(crate) const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Every strategy compiled into this build.
    pub fn available() -> &'static [Execution] {
        #[cfg(feature = "parallel")]
        {
            &[Execution::Sequential, Execution::Parallel]
        }
        #[cfg(not(feature = "parallel"))]
        {
            &[Execution::Sequential]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Execution::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Execution::Parallel => "parallel",
        }
    }

    /// Order-preserving filter-map over an index range.
    pub(crate) fn filter_map_range<R, F>(self, range: Range<usize>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> Option<R> + Sync + Send,
    {
        match self {
            Execution::Sequential => range.filter_map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => range.into_par_iter().filter_map(f).collect(),
        }
    }

    /// Splits `0..len` into [`CHUNK`]-sized pieces, runs `f` on each and
    /// returns the partial results in chunk order.
    pub(crate) fn chunked<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(Range<usize>) -> R + Sync + Send,
    {
        let chunks = len.div_ceil(CHUNK);
        let piece = |c: usize| f(c * CHUNK..((c + 1) * CHUNK).min(len));
        match self {
            Execution::Sequential => (0..chunks).map(piece).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..chunks).into_par_iter().map(piece).collect(),
        }
    }
}

/// Largest table (joint cells, factor cells, error configurations) any
/// operation will materialise. `CDE_MAX_CELLS` overrides the default of 2^24.
pub fn max_cells() -> usize {
    std::env::var("CDE_MAX_CELLS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(DEFAULT_MAX_CELLS)
}

pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

/// Product of cardinalities, or `None` once it passes `limit`.
pub(crate) fn checked_product(cards: impl IntoIterator<Item = usize>, limit: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for c in cards {
        acc = acc.checked_mul(c)?;
        if acc > limit {
            return None;
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_covers_range_in_order() {
        for exec in Execution::available() {
            let parts = exec.chunked(CHUNK * 2 + 7, |r| (r.start, r.end));
            assert_eq!(parts, vec![(0, CHUNK), (CHUNK, 2 * CHUNK), (2 * CHUNK, 2 * CHUNK + 7)]);
            assert!(exec.chunked(0, |r| r.len()).is_empty());
        }
    }

    #[test]
    fn checked_product_respects_limit() {
        assert_eq!(checked_product([2, 3, 4], 24), Some(24));
        assert_eq!(checked_product([2, 3, 4], 23), None);
        assert_eq!(checked_product(std::iter::empty(), 1), Some(1));
    }
}
