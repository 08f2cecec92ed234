//! Deterministic random streams addressed by `(master_seed, stream_id)`.
//!
//! Each stream is a ChaCha20 keystream keyed by the master seed and selected
//! by the ChaCha stream counter, so two streams with the same master seed
//! never overlap and can be consumed from different threads.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct SeededRng {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same master seed.
    pub fn fork(&self, stream_id: u64) -> Self {
        Self::new(self.master_seed, stream_id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard complex Gaussian: real and imaginary parts independent N(0, 1/2).
    pub fn complex_normal(&mut self) -> Complex64 {
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes(rng: &mut SeededRng) -> Vec<u8> {
        let mut buf = vec![0u8; 256];
        rng.fill_bytes(&mut buf);
        buf
    }

    #[test]
    fn same_address_same_stream() {
        let a = bytes(&mut SeededRng::new(42, 7));
        let b = bytes(&mut SeededRng::new(42, 7));
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = bytes(&mut SeededRng::new(42, 0));
        let b = bytes(&mut SeededRng::new(42, 1));
        let c = bytes(&mut SeededRng::new(43, 0));
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fork_keeps_master_seed() {
        let rng = SeededRng::new(9, 0);
        let f = rng.fork(5);
        assert_eq!(f.master_seed(), 9);
        assert_eq!(f.stream_id(), 5);
        assert_eq!(bytes(&mut f.clone()), bytes(&mut SeededRng::new(9, 5)));
    }

    #[test]
    fn complex_normal_has_unit_second_moment() {
        let mut rng = SeededRng::new(1, 0);
        let m: f64 = (0..20_000)
            .map(|_| rng.complex_normal().norm_sqr())
            .sum::<f64>()
            / 20_000.0;
        assert!((m - 1.0).abs() < 0.03, "E|z|^2 = {m}");
    }
}
