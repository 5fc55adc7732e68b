//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a [`SeedStream`]: a root seed
//! plus a derivation path (trial index, purpose tag). The path is hashed into
//! a ChaCha8 key, and rows of a data matrix use distinct ChaCha stream ids so
//! any row can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Order-sensitive hash of a word sequence. Stable across platforms and
/// compiler versions, unlike `std::hash`.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243F_6A88_85A3_08D3u64, |acc, &w| mix64(acc ^ mix64(w)))
}

/// FNV-1a over the tag bytes.
pub fn hash_tag(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedStream {
    root: u64,
    trial: u64,
    purpose: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self {
            root,
            trial: 0,
            purpose: 0,
        }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn trial_index(&self) -> u64 {
        self.trial
    }

    /// Same root, different trial.
    pub fn trial(&self, trial: u64) -> Self {
        Self { trial, ..*self }
    }

    /// Derive a sub-stream for a named purpose. Purposes compose, so
    /// `s.purpose("a").purpose("b")` differs from `s.purpose("b")`.
    pub fn purpose(&self, tag: &str) -> Self {
        Self {
            purpose: hash_words(&[self.purpose, hash_tag(tag)]),
            ..*self
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
            let w = hash_words(&[self.root, self.trial, self.purpose, k as u64]);
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }

    /// Generator for one row of a data matrix: same key, ChaCha stream id = row.
    pub fn row_rng(&self, row: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(row);
        rng
    }
}
