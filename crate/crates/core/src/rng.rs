//! Counter-based seed derivation for reproducible parallel trials.
//!
//! Trial `i` of experiment `e` under master seed `m` draws from a ChaCha8
//! stream seeded with `mix64(m, e, i)`, where
//!
//! ```text
//! splitmix64(x) = let z = x + 0x9E3779B97F4A7C15;
//!                 z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//!                 z ^ (z >> 31)
//! mix64(m, e, i) = splitmix64(splitmix64(splitmix64(m) ^ e) ^ i)
//! ```
//!
//! (all arithmetic wrapping mod 2^64). A trial's stream depends only on
//! `(m, e, i)`, never on the worker that runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The random-state type threaded through every sampler.
pub type TrialRng = ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix64(master: u64, experiment: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ experiment) ^ trial)
}

pub fn trial_rng(master: u64, experiment: u64, trial: u64) -> TrialRng {
    TrialRng::seed_from_u64(mix64(master, experiment, trial))
}

/// Stable experiment identifiers, so unrelated pipelines never share streams.
pub mod stream {
    pub const SAMPLE: u64 = 0x01;
    pub const PALM: u64 = 0x02;
    pub const REFERENCE: u64 = 0x03;
    pub const DIRECT: u64 = 0x04;
    pub const PIPELINE_A: u64 = 0x05;
    pub const PIPELINE_B: u64 = 0x06;
    pub const ALLOCATION: u64 = 0x07;
    pub const CONTROL: u64 = 0x08;
    pub const AUX: u64 = 0x09;
}

/// Runs `n` trials, each with its own derived stream, and returns the results
/// in trial order. The output does not depend on the size of the thread pool.
pub fn run_trials<T, F>(n: usize, master: u64, experiment: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut TrialRng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(master, experiment, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = trial_rng(7, 1, 0).random();
        let b: u64 = trial_rng(7, 1, 1).random();
        let c: u64 = trial_rng(7, 2, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, trial_rng(7, 1, 0).random::<u64>());
    }

    #[test]
    fn run_trials_is_pool_size_independent() {
        let draw = |_: usize, rng: &mut TrialRng| rng.random::<u64>();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_trials(64, 3, 9, draw));
        let b = four.install(|| run_trials(64, 3, 9, draw));
        assert_eq!(a, b);
    }
}
