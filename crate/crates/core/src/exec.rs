//! Data-parallel helpers and per-user randomness.
//!
//! Work over a population is split into fixed-size chunks, so the partition
//! (and therefore every merged result) is the same no matter which execution
//! mode runs it or how rayon schedules the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Users per work unit.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Runs on the rayon pool when built with the `parallel` feature,
    /// sequentially otherwise.
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
    /// `f(0..n)` collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Folds `0..n` chunk by chunk and merges the chunk accumulators.
    ///
    /// `merge` must be associative; the result then does not depend on the
    /// execution mode.
    pub fn fold<A, I, S, M>(self, n: usize, init: I, step: S, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        S: Fn(&mut A, usize) + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        let run_chunk = |c: usize| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                step(&mut acc, i);
            }
            acc
        };
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..chunks).into_par_iter().map(run_chunk).reduce(&init, &merge),
            _ => (0..chunks).map(run_chunk).fold(init(), &merge),
        }
    }
}

/// Random source for one simulated user.
///
/// The ChaCha key is the little-endian concatenation of `(seed, trial, user)`,
/// so each user's stream is fixed by those three numbers alone.
pub fn user_rng(seed: u64, trial: u64, user: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&user.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn modes_agree() {
        let n = 3 * CHUNK + 17;
        let seq = Execution::Sequential.map(n, |i| i * i);
        let par = Execution::Parallel.map(n, |i| i * i);
        assert_eq!(seq, par);

        let sum = |e: Execution| {
            e.fold(
                n,
                || vec![0u64; 8],
                |acc, i| acc[i % 8] += user_rng(1, 2, i as u64).random_range(0..100u64),
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
        };
        assert_eq!(sum(Execution::Sequential), sum(Execution::Parallel));
    }

    #[test]
    fn fold_empty() {
        let total = Execution::default().fold(0, || 5u32, |_, _| unreachable!(), |a, b| a + b);
        assert_eq!(total, 5);
    }

    #[test]
    fn user_streams_are_keyed() {
        let a: u64 = user_rng(1, 0, 0).random();
        let b: u64 = user_rng(1, 0, 0).random();
        let c: u64 = user_rng(1, 0, 1).random();
        let d: u64 = user_rng(1, 1, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
