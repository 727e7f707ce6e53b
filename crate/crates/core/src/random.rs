//! Seeded random generation shared by the experiment harness and proof checks.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream for trial `index` under `seed`.
///
/// ChaCha is counter based, so a trial's draws depend only on `(seed, index)`
/// and never on which worker ran it or in what order.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `rows × cols` matrix with i.i.d. `N(0, 1/rows)` entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let scale = 1.0 / (rows as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Gaussian direction scaled to norm exactly `norm` (zero vector when `norm == 0`).
pub fn vector_with_norm<R: Rng + ?Sized>(rng: &mut R, len: usize, norm: f64) -> DVector<f64> {
    if norm == 0.0 || len == 0 {
        return DVector::zeros(len);
    }
    loop {
        let v = gaussian_vector(rng, len);
        let n = v.norm();
        if n > 0.0 {
            return v * (norm / n);
        }
    }
}

/// Uniform size-`k` subset of `1..=m`, ascending.
pub fn random_support<R: Rng + ?Sized>(rng: &mut R, m: usize, k: usize) -> Vec<usize> {
    let mut s: Vec<usize> = sample(rng, m, k).into_iter().map(|i| i + 1).collect();
    s.sort_unstable();
    s
}
