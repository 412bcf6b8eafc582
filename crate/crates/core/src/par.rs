//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces results in input order, and reductions are carried
//! out sequentially over those ordered partial results, so outputs are
//! bit-identical whichever execution mode is selected.

/// Execution strategy for batch operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon global pool (or the pool installed by the caller).
    /// Falls back to sequential execution when the `parallel` feature is off.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Parallel only if `allowed`; used for classifiers that cannot be
    /// evaluated concurrently.
    pub fn restrict(self, allowed: bool) -> Exec {
        if allowed {
            self
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<'a, S, T, F>(exec: Exec, items: &'a [S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&'a S) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Number of items per reduction chunk. Fixed so that the summation tree
/// does not depend on the number of worker threads.
pub const CHUNK: usize = 512;

/// Sums `f(i)` over `0..n` in fixed-size chunks; chunk partials are added in
/// order.
pub fn chunked_sum<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = map_range(exec, chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        (start..end).map(&f).sum::<f64>()
    });
    partials.into_iter().sum()
}

/// Accumulates vector-valued contributions `f(i, acc)` over `0..n` in
/// fixed-size chunks; chunk partials are added in order.
pub fn chunked_vec_sum<F>(exec: Exec, n: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = map_range(exec, chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        let mut acc = vec![0.0; dim];
        for i in start..end {
            f(i, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; dim];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
