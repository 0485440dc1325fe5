use rayon::prelude::*;

use robustctl_core::exec::PathExecutor;
use robustctl_core::Result;

/// Runs path jobs on a dedicated rayon pool; output order is the job order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> std::result::Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl PathExecutor for Parallel {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> Result<T> + Sync)) -> Result<Vec<T>> {
        let results: Vec<Result<T>> = self.pool.install(|| (0..n).into_par_iter().map(job).collect());
        results.into_iter().collect()
    }
}
