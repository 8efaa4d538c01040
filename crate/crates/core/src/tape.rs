//! Explicit streams of uniform draws.
//!
//! Every randomized routine in this crate consumes randomness through a
//! [`RandomTape`] instead of an ambient RNG. Two runs constructed with the
//! same seed read the exact same stream, which is what makes shared-randomness
//! coupling (common random numbers) between perturbed executions meaningful:
//! the coupling is the identity on the underlying draw sequence.
//!
//! Each algorithm documents its draw order as part of its public contract;
//! changing the order of draws is a breaking change for coupled experiments.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Multiplier from splitmix64, used to derive per-trial and child seeds.
const MIX: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(MIX);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// An ordered stream of uniform-[0,1) draws with an explicit counter.
///
/// Same seed ⇒ identical stream; the counter strictly increases and draws are
/// never reused. `ChaCha8` is used underneath because its output stream is
/// stable across platforms and crate versions.
#[derive(Debug, Clone)]
pub struct RandomTape {
    seed: u64,
    rng: ChaCha8Rng,
    counter: u64,
    script: Option<Vec<f64>>,
}

impl RandomTape {
    /// Tape reading from the stream determined by `seed`.
    pub fn new(seed: u64) -> Self {
        RandomTape {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
            script: None,
        }
    }

    /// Per-trial tape derived from a master seed: trial `i` owns the stream
    /// seeded by `mix(master, i)`, so trials are independent and
    /// order-insensitive (workers may run them in any order).
    pub fn derive(master_seed: u64, trial: u64) -> Self {
        RandomTape::new(splitmix64(master_seed ^ trial.wrapping_mul(MIX)))
    }

    /// Tape that replays `draws` verbatim (then errors). Used by enumeration
    /// tests that drive an algorithm down one explicit branch of its decision
    /// tree.
    pub fn scripted(draws: Vec<f64>) -> Self {
        RandomTape {
            seed: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            counter: 0,
            script: Some(draws),
        }
    }

    /// Next uniform draw in [0, 1).
    pub fn draw(&mut self) -> f64 {
        let u = match &self.script {
            Some(s) => {
                let i = self.counter as usize;
                assert!(i < s.len(), "scripted tape exhausted after {} draws", s.len());
                s[i]
            }
            None => {
                // 53 high bits -> uniform double in [0,1)
                (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
            }
        };
        self.counter += 1;
        u
    }

    /// Child tape seeded from one parent draw. The parent advances by exactly
    /// one position no matter how many draws the child later consumes, so
    /// loops with data-dependent draw counts (rejection sampling) cannot
    /// desynchronize coupled parent streams.
    pub fn fork(&mut self) -> RandomTape {
        let raw = match &self.script {
            Some(_) => (self.draw() * (1u64 << 53) as f64) as u64,
            None => {
                self.counter += 1;
                self.rng.next_u64()
            }
        };
        RandomTape::new(splitmix64(raw ^ self.seed.rotate_left(17)))
    }

    /// Number of draws consumed so far.
    pub fn draws_used(&self) -> u64 {
        self.counter
    }

    /// Seed this tape was constructed with.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}
