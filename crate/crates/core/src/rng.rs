//! Seedable random-number streams derived from a labelled path.
//!
//! A stream is identified by the path that produced it: a master seed
//! followed by any number of labels (simulation index, competition index,
//! consumer name). Each child key is a SHA-256 digest of the parent key and
//! the label, so draws depend only on the path and never on the order in
//! which streams are created or consumed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// An independent, reproducible random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Root stream for a master seed.
    pub fn from_seed(master_seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"dpsim/root");
        hasher.update(master_seed.to_le_bytes());
        Self::from_key(hasher.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream for a textual label. The parent's own position is not
    /// consumed or consulted.
    pub fn child(&self, label: &str) -> Self {
        self.derive(0x01, label.as_bytes())
    }

    /// Child stream for an integer label (simulation or competition index).
    pub fn child_index(&self, index: u64) -> Self {
        self.derive(0x02, &index.to_le_bytes())
    }

    fn derive(&self, tag: u8, label: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update([tag]);
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label);
        Self::from_key(hasher.finalize().into())
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in the open interval `(0, 1)`.
    #[inline]
    pub fn unit_open(&mut self) -> f64 {
        loop {
            let u = self.unit();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; bias is below 2^-32 for the small n used here.
        ((self.rng.next_u64() >> 32).wrapping_mul(n as u64) >> 32) as usize
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_path_same_sequence() {
        let a = RngStream::from_seed(7).child_index(3).child("market");
        let b = RngStream::from_seed(7).child_index(3).child("market");
        let xs: Vec<u64> = a.clone().take_u64(10_000);
        let ys: Vec<u64> = b.clone().take_u64(10_000);
        assert_eq!(xs, ys);
    }

    #[test]
    fn derivation_ignores_parent_position() {
        let mut parent = RngStream::from_seed(1);
        let before = parent.child("x").next_u64();
        for _ in 0..100 {
            parent.next_u64();
        }
        assert_eq!(before, parent.child("x").next_u64());
    }

    #[test]
    fn text_and_index_labels_differ() {
        let root = RngStream::from_seed(5);
        assert_ne!(root.child("1").next_u64(), root.child_index(1).next_u64());
    }

    #[test]
    fn sibling_streams_uncorrelated() {
        let root = RngStream::from_seed(11);
        let mut a = root.child_index(0);
        let mut b = root.child_index(1);
        let n = 100_000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.unit();
            let y = b.unit();
            sa += x;
            sb += y;
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let n = n as f64;
        let cov = sab / n - sa / n * sb / n;
        let corr = cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt();
        assert!(corr.abs() <= 0.01, "corr = {corr}");
    }

    #[test]
    fn unit_ranges() {
        let mut s = RngStream::from_seed(2);
        for _ in 0..10_000 {
            let u = s.unit();
            assert!((0.0..1.0).contains(&u));
            let k = s.below(7);
            assert!(k < 7);
        }
    }

    impl RngStream {
        fn take_u64(mut self, n: usize) -> Vec<u64> {
            (0..n).map(|_| self.next_u64()).collect()
        }
    }
}
