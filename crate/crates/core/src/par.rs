//! Data-parallel fan-out over independent work items (per-slot solves,
//! sweep points). With the `parallel` feature off everything runs on the
//! calling thread in index order; results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Like [`map_indexed`] but stops at the first error (lowest index wins).
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Runs `f` with fan-out capped at `jobs` worker threads (`None` keeps the
/// global pool).
pub fn with_jobs<T, F>(jobs: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(j) = jobs {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}
