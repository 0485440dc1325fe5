//! Execution of independent Monte Carlo work units.

use alloc::vec::Vec;

use crate::error::Result;

/// Runs `n` independent jobs and returns their results in index order.
///
/// Implementations may run jobs concurrently, but must return exactly
/// `job(0), ..., job(n-1)`; downstream reductions rely on that order.
pub trait PathExecutor: Sync {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> Result<T> + Sync)) -> Result<Vec<T>>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl PathExecutor for Sequential {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> Result<T> + Sync)) -> Result<Vec<T>> {
        (0..n).map(job).collect()
    }
}
