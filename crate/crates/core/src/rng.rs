//! Seeded random streams.
//!
//! Every stream is ChaCha20 (RFC 8439 block function, 20 rounds) keyed by the
//! run seed: key bytes 0..8 hold the seed in little-endian order, the remaining
//! 24 key bytes are zero. The 64-bit ChaCha stream id separates purposes, so the
//! SGD index stream never shares keystream with probe or data generation.
//! Outputs are consumed as little-endian 64-bit words, in keystream order.
//!
//! Uniform indices in `{0, …, n−1}` are drawn with Lemire's multiply-shift
//! rejection method on 64-bit words, which is unbiased and pinned here rather
//! than delegated to a library's range sampler.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Name recorded in run metadata.
pub const GENERATOR_NAME: &str =
    "ChaCha20 (RFC 8439), seed as little-endian key bytes 0..8, Lemire bounded indices";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// SGD sample indices.
    Indices = 0,
    /// Property-test probes.
    Probes = 1,
    /// Synthetic dataset generation.
    Data = 2,
}

pub fn chacha(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

/// Unbiased draw from `{0, …, n−1}`.
pub fn bounded_index<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0, "bounded_index needs n > 0");
    let mut m = (rng.next_u64() as u128) * (n as u128);
    let mut low = m as u64;
    if low < n {
        let threshold = n.wrapping_neg() % n;
        while low < threshold {
            m = (rng.next_u64() as u128) * (n as u128);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// I.i.d. uniform sample indices for one SGD run.
#[derive(Debug, Clone)]
pub struct IndexStream {
    rng: ChaCha20Rng,
    n: u64,
}

impl IndexStream {
    pub fn new(seed: u64, n: usize) -> Self {
        Self {
            rng: chacha(seed, Stream::Indices),
            n: n as u64,
        }
    }

    pub fn next_index(&mut self) -> usize {
        bounded_index(&mut self.rng, self.n) as usize
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform draw from the closed Euclidean ball of radius `radius` in `ℝ^d`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let mut v = standard_normal_vec(rng, d);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; d];
    }
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    for x in &mut v {
        *x *= r / norm;
    }
    v
}

/// Uniform draw from the unit sphere in `ℝ^d`.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let mut v = standard_normal_vec(rng, d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}
