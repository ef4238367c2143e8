//! Execution strategy for data-parallel loops.
//!
//! With the `parallel` feature (default) row loops and batch maps run on the
//! rayon pool; without it every strategy degrades to the sequential path.
//! Both paths evaluate each output element with the same arithmetic in the
//! same order, so results are bit-identical regardless of strategy.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every row of `out` (rows of `width` elements), passing the
/// row index.
pub fn for_each_row<T, F>(out: &mut [T], width: usize, exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
        return;
    }
    let _ = exec;
    for (y, row) in out.chunks_mut(width).enumerate() {
        f(y, row);
    }
}

/// Maps `f` over `items`, keeping input order in the output.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Runs `op` on a dedicated pool of `jobs` workers. `jobs == 1` and builds
/// without the `parallel` feature run `op` on the calling thread.
pub fn with_jobs<R, F>(jobs: usize, op: F) -> R
where
    R: Send,
    F: FnOnce(Execution) -> R + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => return pool.install(|| op(Execution::Parallel)),
            Err(e) => log::warn!("could not build a {jobs}-worker pool ({e}); running sequentially"),
        }
    }
    let _ = jobs;
    op(Execution::Sequential)
}

/// Logical core count, used as the default worker count.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
