//! Worker-pool plumbing. With the `parallel` feature, rounds run on a rayon
//! pool sized by the caller; otherwise everything runs on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Exec {
    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    parallel: bool,
}

impl Exec {
    pub(crate) fn sequential() -> Self {
        Exec { parallel: false }
    }

    /// Maps `f` over `items` with mutable access, preserving index order in
    /// the output regardless of schedule.
    pub(crate) fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel {
            return items
                .par_iter_mut()
                .enumerate()
                .map(|(i, t)| f(i, t))
                .collect();
        }
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel {
            return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Runs `body` with `workers` threads. One worker means the sequential path.
pub(crate) fn with_workers<R: Send>(workers: usize, body: impl FnOnce(Exec) -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(|| body(Exec { parallel: true })),
            Err(e) => log::warn!("falling back to sequential execution: {e}"),
        }
    }
    let _ = workers;
    body(Exec::sequential())
}
