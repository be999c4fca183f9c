use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Scalar;

/// Seeded random stream that can be split into independent child streams.
///
/// `split(i)` depends only on the seed this stream was created with, never on
/// how many values have been drawn, so jobs can derive their streams in any order.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream number `index`.
    pub fn split(&self, index: u64) -> Rng {
        let child = splitmix64(splitmix64(self.seed) ^ splitmix64(index ^ 0xA076_1D64_78BD_642F));
        Rng::new(child)
    }

    /// One draw from `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// `n` independent draws from `[a, b)`.
    pub fn uniform<T: Scalar>(&mut self, a: f64, b: f64, n: usize) -> Result<Vector<T>> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::config(format!(
                "uniform sampling needs finite a < b, got [{a}, {b})"
            )));
        }
        Ok((0..n)
            .map(|_| {
                // random_range over floats can round up to `b`; redraw in that case.
                loop {
                    let v = self.inner.random_range(a..b);
                    if v < b {
                        break T::lit(v);
                    }
                }
            })
            .collect())
    }

    /// `n` independent standard normal draws.
    pub fn standard_normal<T: Scalar>(&mut self, n: usize) -> Vector<T> {
        (0..n)
            .map(|_| T::lit(self.inner.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<U>(&mut self, items: &mut [U]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
