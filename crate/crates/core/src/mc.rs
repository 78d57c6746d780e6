//! Order-independent parallel aggregation over Monte Carlo samples.
//!
//! Each sample draws from its own seed, `derive_seed(master, index)`, and
//! per-sample results are reduced either with exact integer sums or by
//! collecting in index order, so outputs do not depend on the thread count.

use rayon::prelude::*;

use crate::clocks::derive_seed;
use crate::error::Result;

/// Runs `sample(index, seed)` for every index and returns the results in
/// index order.
pub fn collect_samples<T, F>(samples: u64, master_seed: u64, sample: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
{
    (0..samples)
        .into_par_iter()
        .map(|i| sample(i, derive_seed(master_seed, i)))
        .collect()
}

/// Element-wise integer sum of per-sample count vectors of length `width`.
pub fn sum_counts<F>(samples: u64, master_seed: u64, width: usize, sample: F) -> Result<Vec<i64>>
where
    F: Fn(u64, u64) -> Result<Vec<i64>> + Sync,
{
    sum_counts_with(samples, master_seed, width, || (), |_, i, seed| sample(i, seed))
}

/// Like [`sum_counts`], with scratch state from `init` reused across the
/// samples handled by one worker. Results must not depend on that state.
pub fn sum_counts_with<S, I, F>(
    samples: u64,
    master_seed: u64,
    width: usize,
    init: I,
    sample: F,
) -> Result<Vec<i64>>
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64, u64) -> Result<Vec<i64>> + Sync,
{
    (0..samples)
        .into_par_iter()
        .try_fold(
            || (init(), vec![0i64; width]),
            |(mut state, mut acc), i| {
                let row = sample(&mut state, i, derive_seed(master_seed, i))?;
                for (a, r) in acc.iter_mut().zip(row) {
                    *a += r;
                }
                Ok((state, acc))
            },
        )
        .map(|r| r.map(|(_, acc)| acc))
        .try_reduce(
            || vec![0i64; width],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}
