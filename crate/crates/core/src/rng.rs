//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed
//! (`ChaCha8Rng::seed_from_u64`, which expands the seed with PCG32 and is
//! platform independent). Sub-seeds are derived from a master seed through a
//! SplitMix64 hash chain over a stage label and integer indices, so stages
//! can be re-run in isolation.
//!
//! Samplers that need per-item reproducibility use [`CounterStream`]: item
//! `i` reads a fixed-size block of the keystream starting at word
//! `i * block_words`, so serial and parallel generation produce identical
//! values.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derive a sub-seed from `seed`, a stage label and a list of indices.
pub fn derive_seed(seed: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = mix64(seed ^ fnv1a(label));
    for &i in indices {
        h = mix64(h ^ i.wrapping_mul(GOLDEN));
    }
    h
}

/// Hash an arbitrary slice of floats (bit patterns) into a seed.
pub fn hash_f64s(seed: u64, values: &[f64]) -> u64 {
    let mut h = mix64(seed);
    for v in values {
        h = mix64(h ^ v.to_bits());
    }
    h
}

/// Uniform in the half-open interval (0, 1]; never returns zero so that
/// `ln` is always finite.
#[inline]
pub fn unit_open0(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A sequential random stream.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn derived(seed: u64, label: &str, indices: &[u64]) -> Self {
        Self::new(derive_seed(seed, label, indices))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        unit_open0(self.rng.next_u64())
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (1.0 - self.uniform())
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's multiply-shift with rejection.
        loop {
            let x = self.rng.next_u64();
            let m = u128::from(x) * u128::from(n);
            let low = m as u64;
            if low >= n.wrapping_neg() % n {
                return (m >> 64) as u64;
            }
        }
    }

    /// Unit-rate exponential.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Pair of independent standard normals (Box-Muller).
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        box_muller(self.uniform(), self.uniform())
    }

    /// Fill `out` with standard normals, consuming `2 * ceil(len / 2)` uniforms.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_mut(2);
        for c in &mut chunks {
            let (a, b) = self.normal_pair();
            c[0] = a;
            if c.len() > 1 {
                c[1] = b;
            }
        }
    }

    /// Uniform weight vector on the probability simplex (normalized exponentials).
    pub fn dirichlet_uniform(&mut self, out: &mut [f64]) {
        let mut total = 0.0;
        for w in out.iter_mut() {
            *w = self.exponential();
            total += *w;
        }
        for w in out.iter_mut() {
            *w /= total;
        }
    }
}

#[inline]
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Random-access stream: item `i` owns the keystream block starting at
/// 32-bit word `i * block_words`.
#[derive(Clone, Debug)]
pub struct CounterStream {
    seed: u64,
    block_u64: u64,
}

impl CounterStream {
    /// `uniforms_per_item` is the number of 64-bit draws each item consumes.
    pub fn new(seed: u64, uniforms_per_item: usize) -> Self {
        Self {
            seed,
            block_u64: uniforms_per_item as u64,
        }
    }

    pub fn item(&self, index: u64) -> Stream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(u128::from(index) * u128::from(self.block_u64) * 2);
        Stream { rng }
    }
}
