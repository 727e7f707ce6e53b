//! Exact block-RIP constants by exhaustive enumeration of block supports.
//!
//! For each size-`K` support `S` the Gram matrix `A[S]ᵀA[S]` is diagonalized;
//! `δ^B_K = max_S max(λ_max(S) − 1, 1 − λ_min(S))`. The cost is combinatorial,
//! so every exact request is checked against a floating-point budget first.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::BlockedMatrix;
use crate::error::{BompError, Result};

/// Roughly 10⁸ floating-point operations.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub order: usize,
    pub delta: f64,
    /// Support attaining `delta` (lexicographically first on ties).
    pub arg_support: Vec<usize>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `false` when `delta ≥ 1`, i.e. no block RIP of this order.
    pub satisfies_rip: bool,
}

/// Extreme Gram eigenvalues for one support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportSpectrum {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SupportSpectrum {
    pub fn delta(&self) -> f64 {
        (self.lambda_max - 1.0).max(1.0 - self.lambda_min)
    }
}

/// Eigenvalues of `A[S]ᵀA[S]`, ascending.
pub fn gram_spectrum(a: &BlockedMatrix, support: &[usize]) -> Result<Vec<f64>> {
    let sub = a.extract_blocks(support)?;
    Ok(sorted_eigenvalues(sub.tr_mul(&sub)))
}

fn sorted_eigenvalues(gram: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn support_spectrum(a: &BlockedMatrix, support: &[usize]) -> SupportSpectrum {
    let sub = a.gather(support);
    let ev = sorted_eigenvalues(sub.tr_mul(&sub));
    SupportSpectrum {
        lambda_min: ev[0],
        lambda_max: ev[ev.len() - 1],
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `C(M, K) · (Kd)³`.
pub fn enumeration_cost(num_blocks: usize, order: usize, block_width: usize) -> u128 {
    let side = (order * block_width) as u128;
    binomial(num_blocks, order).saturating_mul(side.saturating_pow(3))
}

fn check_order(a: &BlockedMatrix, order: usize) -> Result<()> {
    let m = a.layout().num_blocks();
    if order == 0 || order > m {
        return Err(BompError::InvalidInput(format!(
            "RIP order must lie in 1..={m}, got {order}"
        )));
    }
    Ok(())
}

/// Exact `δ^B_K` over every size-`order` block support.
///
/// Supports are evaluated in parallel and reduced in lexicographic order, so
/// the report is identical to a sequential sweep.
pub fn exact_block_rip(a: &BlockedMatrix, order: usize, budget: u128) -> Result<RipReport> {
    check_order(a, order)?;
    let layout = a.layout();
    let cost = enumeration_cost(layout.num_blocks(), order, layout.block_width());
    if cost > budget {
        return Err(BompError::BudgetExceeded { cost, budget });
    }
    let supports: Vec<Vec<usize>> = (1..=layout.num_blocks()).combinations(order).collect();
    let spectra: Vec<SupportSpectrum> = supports
        .par_iter()
        .map(|s| support_spectrum(a, s))
        .collect();
    Ok(reduce(order, &supports, &spectra))
}

fn reduce(order: usize, supports: &[Vec<usize>], spectra: &[SupportSpectrum]) -> RipReport {
    let mut best = 0;
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    for (i, spec) in spectra.iter().enumerate() {
        if spec.delta() > spectra[best].delta() {
            best = i;
        }
        lambda_min = lambda_min.min(spec.lambda_min);
        lambda_max = lambda_max.max(spec.lambda_max);
    }
    let delta = (lambda_max - 1.0).max(1.0 - lambda_min);
    RipReport {
        order,
        delta,
        arg_support: supports[best].clone(),
        lambda_min,
        lambda_max,
        satisfies_rip: delta < 1.0,
    }
}

/// Lower bound on `δ^B_K` from `trials` distinct supports sampled uniformly.
///
/// When `trials ≥ C(M, K)` every support is visited and the value is exact.
pub fn rip_lower_bound_sampled(
    a: &BlockedMatrix,
    order: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_order(a, order)?;
    if trials == 0 {
        return Err(BompError::InvalidInput(
            "trials must be positive".to_string(),
        ));
    }
    let num_blocks = a.layout().num_blocks();
    let supports: Vec<Vec<usize>> = if (trials as u128) >= binomial(num_blocks, order) {
        (1..=num_blocks).combinations(order).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials)
            .map(|_| {
                let mut s: Vec<usize> = sample(&mut rng, num_blocks, order)
                    .into_iter()
                    .map(|i| i + 1)
                    .collect();
                s.sort_unstable();
                s
            })
            .collect()
    };
    Ok(supports
        .par_iter()
        .map(|s| support_spectrum(a, s).delta())
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max))
}
