//! Deferred-decision MDP for maximum independent set and related locally
//! decomposable problems, trained with PPO over a GraphSAGE policy and
//! verified against exact oracles.

pub mod config;
pub mod dataset;
pub mod env;
pub mod graph;
pub mod net;
pub mod nn;
pub mod ppo;
pub mod problem;
pub mod rollout;
pub mod solver;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-stream of one base seed, so every consumer of randomness
/// draws from its own independent deterministic stream.
pub fn seeded_stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}
