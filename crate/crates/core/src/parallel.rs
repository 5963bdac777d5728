//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the [`Execution::Parallel`] strategy
//! runs on the rayon global pool. Without it, every strategy runs
//! sequentially. Reductions are split into fixed-size chunks whose partial
//! sums are combined in chunk order, so both strategies return bitwise
//! identical results regardless of thread count.

/// Number of items per reduction chunk.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if is_parallel_available() {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of `f(i)` for `i in 0..len`.
pub fn sum_indexed<F>(len: usize, exec: Execution, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = |c: usize| {
        let mut acc = CompensatedSum::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
            acc.add(f(i));
        }
        acc.value()
    };
    let partials: Vec<f64> = map_indexed(chunks, exec, partial);
    let mut total = CompensatedSum::new();
    for p in partials {
        total.add(p);
    }
    total.value()
}

/// Order-preserving map over `0..len`.
pub fn map_indexed<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}
