use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::numerics::Matrix;

/// Seeded, splittable random stream.
///
/// Backed by ChaCha8, a counter-based generator whose output depends only on
/// the seed — never on the OS — so identical seeds give identical draw
/// sequences on every platform. Child streams are derived from the parent
/// *seed* and a label, not from the parent's draw position, so they are
/// reproducible regardless of how much the parent has been consumed.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            stream: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream for `label`.
    pub fn child(&self, label: &str) -> Rng {
        // FNV-1a over the label, mixed with the parent seed via splitmix64.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let mut z = self.seed ^ h;
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        Rng::new(z)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.stream.gen()
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.stream.gen::<f64>()
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        self.stream.gen_range(0..n)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        if std == 0.0 {
            return mean;
        }
        Normal::new(mean, std).unwrap().sample(&mut self.stream)
    }

    /// Matrix of i.i.d. normal draws; std = 0 degenerates to the constant mean.
    pub fn gaussian(&mut self, rows: usize, cols: usize, mean: f64, std: f64) -> Matrix {
        assert!(std >= 0.0, "gaussian std must be non-negative");
        Matrix::from_fn(rows, cols, |_, _| self.normal(mean, std))
    }

    /// Matrix of i.i.d. uniform draws in [lo, hi).
    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.uniform_in(lo, hi))
    }

    /// Fisher-Yates permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            perm.swap(i, j);
        }
        perm
    }
}
