//! Counter-based pseudo-random generator.
//!
//! Output `i` of a stream keyed by `key` is `mix(key + (i + 1) * GOLDEN)`,
//! so any position of any stream can be computed directly. This is what
//! lets the dither decoder regenerate `z_i` from `(seed, i)` without
//! replaying the encoder's draw order, and lets each simulated client own
//! an independent stream derived from `(master_seed, round, client_id)`.
//! All arithmetic is wrapping `u64`, so the streams are identical on every
//! platform.

use rand_core::{impls, RngCore};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into a stream key.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(master ^ GOLDEN), |acc, &p| {
        mix64(acc.wrapping_add(GOLDEN) ^ mix64(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// Maps 64 random bits to a double in `[0, 1)`.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: seed,
            counter: 0,
        }
    }

    /// Independent stream for one `(round, client)` pair.
    pub fn for_client(master_seed: u64, round: u64, client_id: u64) -> Self {
        Self::new(derive_seed(master_seed, &[round, client_id]))
    }

    /// Child stream tagged by `tag`; does not advance `self`.
    pub fn fork(&self, tag: u64) -> Self {
        Self::new(derive_seed(self.key, &[self.counter, tag]))
    }

    pub fn seed(&self) -> u64 {
        self.key
    }

    /// Number of words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    /// Word at an absolute position of the stream keyed by `key`.
    #[inline]
    pub fn word_at(key: u64, index: u64) -> u64 {
        mix64(key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        let w = Self::word_at(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    /// Uniform double in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_word())
    }

    /// Uniform integer in `[0, n)` by rejection; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let w = self.next_word();
            if w <= zone {
                return w % n;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `m` distinct indices from `0..n`, uniformly, in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, m: usize) -> Vec<usize> {
        assert!(m <= n, "cannot draw {m} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(m);
        pool
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
