//! Splittable, counter-style random substreams.
//!
//! Every random draw in the crate comes from a [`StreamKey`]: a root seed
//! plus a path of integer labels (replicate index, bootstrap index, group
//! index, ...). The key is hashed with SplitMix64 into a 256-bit ChaCha8
//! seed, so a substream depends only on its path and never on the order in
//! which other substreams were consumed. Serial and parallel execution
//! therefore produce bitwise-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels used as the first path component so that different consumers of
/// the same root seed never collide.
pub mod domain {
    pub const DGP: u64 = 0x6467_7000;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
    pub const REPLICATE: u64 = 0x7265_706c;
    pub const SHIFT: u64 = 0x7368_6674;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root seed plus a label path identifying one independent substream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    path: Vec<u64>,
}

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
        }
    }

    /// Child key with one more label appended.
    pub fn child(&self, label: u64) -> Self {
        let mut path = self.path.clone();
        path.push(label);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn children(&self, labels: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(labels);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Collapse the key into a 64-bit value usable as a fresh root seed.
    pub fn derive_u64(&self) -> u64 {
        let mut state = self.seed;
        let mut acc = splitmix64(&mut state);
        for &label in &self.path {
            state ^= label.wrapping_mul(0xD6E8_FEB8_6659_FD93);
            acc ^= splitmix64(&mut state);
            acc = acc.rotate_left(17);
        }
        acc ^ splitmix64(&mut state)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.derive_u64();
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}
