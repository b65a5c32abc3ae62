//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool.
//! Without it, [`Execution::Parallel`] silently runs sequentially. Results are
//! identical either way: maps preserve index order and every reduction uses a
//! fixed pairwise tree, so floating-point sums do not depend on thread count.

use crate::linalg::CMat;

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
    /// Evaluate `f(0..n)` and collect in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fallible variant of [`Execution::map`]; the first error in index order wins.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }

    /// Sum `f(0..n)` with a fixed binary-tree topology.
    ///
    /// Panics if `n == 0`.
    pub fn tree_sum<F>(self, n: usize, f: &F) -> CMat
    where
        F: Fn(usize) -> CMat + Sync + Send,
    {
        assert!(n > 0, "tree_sum over an empty range");
        self.tree_sum_range(0, n, f)
    }

    fn tree_sum_range<F>(self, lo: usize, hi: usize, f: &F) -> CMat
    where
        F: Fn(usize) -> CMat + Sync + Send,
    {
        if hi - lo == 1 {
            return f(lo);
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel if hi - lo > 4 => {
                rayon::join(|| self.tree_sum_range(lo, mid, f), || self.tree_sum_range(mid, hi, f))
            }
            _ => (self.tree_sum_range(lo, mid, f), self.tree_sum_range(mid, hi, f)),
        };
        a + b
    }
}
