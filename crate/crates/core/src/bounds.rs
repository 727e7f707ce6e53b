//! Closed-form recovery thresholds on the smallest nonzero block norm.
//!
//! With `δ = δ^B_{K+1}` and noise level `ε`:
//!
//! * sufficient (`Z1`): `ε/√(1−δ) + ε√(1+δ)/(1−√(K+1)·δ)`
//! * prior sufficient (`Z2`): `2ε/(1−√(K+1)·δ)`
//! * necessary: `ε / (√(1−δ²)·(√(1−δ²) − √K·δ))`
//!
//! All three require `δ < 1/√(K+1)` and are linear in `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{BompError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
}

impl BoundInputs {
    pub fn new(k: usize, delta: f64, epsilon: f64) -> Self {
        Self { k, delta, epsilon }
    }

    /// `1/√(K+1)`, the exclusive upper end of the feasible `δ` range.
    pub fn delta_limit(&self) -> f64 {
        delta_limit(self.k)
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(BompError::InvalidInput("K must be positive".to_string()));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "delta must be finite and nonnegative, got {}",
                self.delta
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.delta >= self.delta_limit() {
            return Err(BompError::Infeasible(format!(
                "delta = {} is not below 1/sqrt(K+1) = {} for K = {}",
                self.delta,
                self.delta_limit(),
                self.k
            )));
        }
        Ok(())
    }
}

pub fn delta_limit(k: usize) -> f64 {
    1.0 / ((k + 1) as f64).sqrt()
}

/// Minimum block norm above which BOMP provably recovers the support in `K` steps.
pub fn z1_sufficient_bound(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    let d = b.delta;
    let root = ((b.k + 1) as f64).sqrt();
    Ok(b.epsilon / (1.0 - d).sqrt() + b.epsilon * (1.0 + d).sqrt() / (1.0 - root * d))
}

/// The earlier sufficient threshold `2ε/(1−√(K+1)δ)` that `Z1` improves on.
pub fn z2_prior_bound(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    let root = ((b.k + 1) as f64).sqrt();
    Ok(2.0 * b.epsilon / (1.0 - root * b.delta))
}

/// Threshold below which an explicit instance defeats BOMP.
pub fn necessary_bound(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    let a = (1.0 - b.delta * b.delta).sqrt();
    let gap = a - (b.k as f64).sqrt() * b.delta;
    if !(gap > 0.0) {
        return Err(BompError::Infeasible(format!(
            "necessary-bound denominator is not positive ({gap})"
        )));
    }
    Ok(b.epsilon / (a * gap))
}

/// Facts about a problem instance needed for the recovery guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemFacts {
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub min_block_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailedClause {
    /// `δ^B_{K+1} < 1/√(K+1)` does not hold.
    Rip,
    /// The smallest block norm is not above `Z1`.
    Norm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub guaranteed: bool,
    pub reasons: Vec<FailedClause>,
    /// `Z1` when it is defined.
    pub threshold: Option<f64>,
}

/// Whether the sufficient condition certifies exact support recovery.
pub fn check_sufficient(facts: &ProblemFacts) -> Verdict {
    let inputs = BoundInputs::new(facts.k, facts.delta, facts.epsilon);
    let mut reasons = Vec::new();
    let threshold = match z1_sufficient_bound(&inputs) {
        Ok(z1) => {
            if !(facts.min_block_norm > z1) {
                reasons.push(FailedClause::Norm);
            }
            Some(z1)
        }
        Err(_) => {
            reasons.push(FailedClause::Rip);
            None
        }
    };
    Verdict {
        guaranteed: reasons.is_empty(),
        reasons,
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub z1: f64,
    pub z2: f64,
    pub diff: f64,
}

/// `Z1`, `Z2`, and `Z1 − Z2` at `ε = 1` on an open uniform grid in `(0, 1/√(K+1))`.
///
/// Rows are grouped by `K` in the order given, `δ` ascending within a group.
pub fn figure1_curves(k_values: &[usize], grid_points: usize) -> Result<Vec<CurveRow>> {
    if grid_points < 2 {
        return Err(BompError::InvalidInput(
            "grid_points must be at least 2".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(k_values.len() * grid_points);
    for &k in k_values {
        let limit = delta_limit(k);
        for delta in open_grid(0.0, limit, grid_points) {
            let inputs = BoundInputs::new(k, delta, 1.0);
            let z1 = z1_sufficient_bound(&inputs)?;
            let z2 = z2_prior_bound(&inputs)?;
            rows.push(CurveRow {
                k,
                delta,
                z1,
                z2,
                diff: z1 - z2,
            });
        }
    }
    Ok(rows)
}

pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("K,delta,z1,z2,diff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k, r.delta, r.z1, r.z2, r.diff
        ));
    }
    out
}

/// `points` interior points of `(lo, hi)`, equally spaced, endpoints excluded.
pub fn open_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (points as f64 + 1.0);
    (1..=points).map(move |i| lo + step * i as f64)
}

/// Checks `2 − √(1+δ) > √(1−δ)` at every point of an open grid on `(0, 1)`.
pub fn verify_inequality_20(grid_points: usize) -> bool {
    open_grid(0.0, 1.0, grid_points).all(inequality_20_holds)
}

pub fn inequality_20_holds(delta: f64) -> bool {
    2.0 - (1.0 + delta).sqrt() > (1.0 - delta).sqrt()
}
