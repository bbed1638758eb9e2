//! Counter-derived random streams.
//!
//! Every trial and every lane inside a trial gets its own ChaCha key built
//! from `(master seed, trial index, lane, purpose tag)`, so results do not
//! depend on how trials are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Lane tags used inside one Monte Carlo trial.
pub mod lane {
    /// Pilot selection uniforms for all access-seeking UEs.
    pub const SELECTION: u64 = 0;
    /// UE positions and shadowing.
    pub const GEOMETRY: u64 = 1;
    /// Receiver noise at the BS and the UEs.
    pub const NOISE: u64 = 2;
    /// Small-scale fading of UE `k` lives on lane `UE_BASE + k`.
    pub const UE_BASE: u64 = 1 << 32;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeeder {
    master: u64,
    tag: u64,
}

impl StreamSeeder {
    pub fn new(master: u64) -> Self {
        StreamSeeder { master, tag: 0 }
    }

    /// A seeder whose streams are disjoint from the parent's.
    pub fn derive(&self, tag: u64) -> Self {
        StreamSeeder {
            master: self.master,
            tag: self.tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag + 1),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, trial: u64, lane: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&trial.to_le_bytes());
        key[16..24].copy_from_slice(&lane.to_le_bytes());
        key[24..32].copy_from_slice(&self.tag.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}
