use plateau_core::mc::Executor;
use rayon::prelude::*;

/// Executor backed by a dedicated rayon pool.
pub struct Threaded {
    pool: rayon::ThreadPool,
}

impl Threaded {
    /// `workers = 0` lets rayon pick the thread count.
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Threaded {
    fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let f = &f;
        self.pool.install(|| (0..tasks).into_par_iter().map(f).collect())
    }
}
