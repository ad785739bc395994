//! Sequential / data-parallel execution of independent index-addressed jobs.
//!
//! Every parallel entry point in the crate funnels through [`Execution::map`],
//! which always returns results in index order. Callers derive any randomness
//! from the job index, so the two modes are bit-for-bit interchangeable.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// falls back to [`Execution::Serial`].
    #[default]
    Parallel,
}

impl Execution {
    /// `true` if this mode will actually fan out work on this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..n`, collecting results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Execution::map`] but over a slice.
    pub fn map_slice<'a, S, T, F>(self, items: &'a [S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&'a S) -> T + Send + Sync,
    {
        self.map(items.len(), |i| f(&items[i]))
    }
}
