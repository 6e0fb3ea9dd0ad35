//! Seeded, counter-derived random streams.
//!
//! Every stream is derived from a master seed plus a list of integer tags
//! (replicate index, panellist index, ...) so simulation output is
//! independent of execution order.

use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic random stream keyed by (master_seed, tags).
pub struct Stream {
    rng: ChaCha12Rng,
}

impl Stream {
    pub fn derive(master_seed: u64, tags: &[u64]) -> Self {
        let mut state = master_seed ^ 0xA076_1D64_78BD_642F;
        for &t in tags {
            let mixed = splitmix64(&mut state);
            state ^= t.wrapping_mul(0xE703_7ED1_A0B4_28DB) ^ mixed;
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Stream {
            rng: ChaCha12Rng::from_seed(seed),
        }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller; the second variate is discarded
    /// to keep the draw count per call fixed).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        math::sqrt(-2.0 * math::ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Index drawn from a categorical distribution; `probs` must sum to
    /// roughly 1 (the last category absorbs rounding slack).
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = (self.rng.next_u64() % (i as u64 + 1)) as usize;
            xs.swap(i, j);
        }
    }

    /// A seeded permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}
