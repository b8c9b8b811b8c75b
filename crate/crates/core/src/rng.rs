//! Splittable deterministic random streams.
//!
//! An [`Rng`] is a value `(seed, stream)`. Children are derived by hashing a
//! label into a new stream id, so the stream a replicate sees never depends
//! on scheduling or on how many siblings were created before it. Draws come
//! from ChaCha8 keyed by the seed with the stream id as the ChaCha stream,
//! which is platform independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rng {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, stream: 0 }
    }

    /// Deterministic child stream keyed by `label`.
    pub fn split(&self, label: &str) -> Rng {
        // FNV-1a over the label, then mixed with the parent stream id.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        Rng {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(h)),
        }
    }

    /// Child stream keyed by an integer, e.g. a replicate index.
    pub fn split_index(&self, label: &str, index: u64) -> Rng {
        let child = self.split(label);
        Rng {
            seed: child.seed,
            stream: splitmix64(child.stream.wrapping_add(splitmix64(index))),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&splitmix64(self.seed).to_le_bytes());
        let mut g = ChaCha8Rng::from_seed(key);
        g.set_stream(self.stream);
        g
    }
}
