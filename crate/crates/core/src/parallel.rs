//! Record-parallel loops with schedule-independent results.
//!
//! Reductions are accumulated in fixed-size chunks that are combined in
//! index order, so sums are bit-identical for any number of workers.

use std::sync::atomic::{AtomicU8, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs
    /// sequentially.
    Parallel,
}

static STRATEGY: AtomicU8 = AtomicU8::new(1);

/// Process-wide execution strategy. Output does not depend on it.
pub fn set_strategy(s: Strategy) {
    STRATEGY.store(matches!(s, Strategy::Parallel) as u8, Ordering::Relaxed);
}

pub fn strategy() -> Strategy {
    if STRATEGY.load(Ordering::Relaxed) == 1 {
        Strategy::Parallel
    } else {
        Strategy::Sequential
    }
}

fn use_rayon() -> bool {
    cfg!(feature = "parallel") && strategy() == Strategy::Parallel
}

/// `(0..n).map(f)` collected in order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if use_rayon() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Column sums of `width`-wide rows produced by `f(i, row)`, for `i < n`.
/// `row` is zeroed before each call.
pub fn sum_rows<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunk_sum = |c: usize| {
        let mut acc = vec![0.0; width];
        let mut row = vec![0.0; width];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            row.iter_mut().for_each(|v| *v = 0.0);
            f(i, &mut row);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += r;
            }
        }
        acc
    };
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = if use_rayon() {
        map_indexed(chunks, chunk_sum)
    } else {
        (0..chunks).map(chunk_sum).collect()
    };
    let mut total = vec![0.0; width];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
