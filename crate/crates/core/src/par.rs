//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or when a single worker is requested, everything runs on the
//! calling thread. Results are always returned in input order, so callers
//! that derive per-item RNG streams get identical output either way.

/// Worker count for a batch job. `0` means "all available cores".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub usize);

impl Workers {
    pub const ALL: Workers = Workers(0);
    pub const SINGLE: Workers = Workers(1);

    pub fn is_single(&self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }

    /// Number of threads that will actually be used.
    pub fn effective(&self) -> usize {
        if self.is_single() {
            return 1;
        }
        #[cfg(feature = "parallel")]
        {
            if self.0 == 0 {
                return rayon::current_num_threads();
            }
        }
        self.0
    }
}

/// Runs `f` inside a pool sized for `workers`.
#[cfg(feature = "parallel")]
fn install<R: Send>(workers: Workers, f: impl FnOnce() -> R + Send) -> R {
    if workers.0 == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers.0).build() {
        Ok(pool) => pool.install(f),
        Err(err) => {
            log::warn!("falling back to the global pool: {err}");
            f()
        }
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], workers: Workers, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !workers.is_single() {
            use rayon::prelude::*;
            return install(workers, || items.par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(n: usize, workers: Workers, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !workers.is_single() {
            use rayon::prelude::*;
            return install(workers, || (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    (0..n).map(f).collect()
}

/// Order-preserving filter-map over `0..n`.
pub fn filter_map_range<R, F>(n: usize, workers: Workers, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> Option<R> + Sync + Send,
{
    map_range(n, workers, f).into_iter().flatten().collect()
}
