//! Replicate-level execution: rayon when the `parallel` feature is on,
//! a plain loop otherwise. Results always come back in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(i)` for `i in 0..len` and returns the results in order.
    ///
    /// `init` builds per-worker scratch state (sample buffers) that is reused
    /// across indices handled by the same worker.
    pub fn map_init<S, T, I, F>(self, len: usize, init: I, f: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len)
                .into_par_iter()
                .with_min_len(64)
                .map_init(&init, |s, i| f(s, i))
                .collect();
        }
        let mut state = init();
        (0..len).map(|i| f(&mut state, i)).collect()
    }

    /// Like [`map_init`](Self::map_init) but reduces to a sum of per-index counts.
    pub fn count_init<S, I, F>(self, len: usize, init: I, f: F) -> Vec<u64>
    where
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize, &mut [u64]) + Sync + Send,
        S: CountWidth + Send,
    {
        let width = init().width();
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len)
                .into_par_iter()
                .with_min_len(64)
                .fold(
                    || (init(), vec![0u64; width]),
                    |(mut s, mut acc), i| {
                        f(&mut s, i, &mut acc);
                        (s, acc)
                    },
                )
                .map(|(_, acc)| acc)
                .reduce(|| vec![0u64; width], add_counts);
        }
        let mut state = init();
        let mut acc = vec![0u64; width];
        for i in 0..len {
            f(&mut state, i, &mut acc);
        }
        acc
    }
}

/// Scratch state that knows how many counters a replicate updates.
pub trait CountWidth {
    fn width(&self) -> usize;
}

#[cfg(feature = "parallel")]
fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}
