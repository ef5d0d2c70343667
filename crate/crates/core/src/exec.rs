//! Serial and data-parallel executors for the per-face and per-block passes.
//!
//! Both backends preserve index order in their outputs, so any pass built on
//! them yields identical results regardless of which backend runs it.

use std::str::FromStr;

use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Serial,
    Parallel,
}

impl Backend {
    /// Evaluates `f(i)` for `i in 0..n`, collecting results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Backend::Serial => (0..n).map(f).collect(),
            Backend::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Maps over a slice, collecting results in input order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        match self {
            Backend::Serial => items.iter().map(f).collect(),
            Backend::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Runs `f` on disjoint mutable chunks of `data`, each `chunk` long.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            Backend::Serial => data
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
            Backend::Parallel => data
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Serial => "serial",
            Backend::Parallel => "parallel",
        }
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "serial" => Ok(Backend::Serial),
            "parallel" => Ok(Backend::Parallel),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}
