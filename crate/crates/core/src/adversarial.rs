//! Explicit instance on which BOMP's first selection is wrong.
//!
//! With `s = δ/√K` and `a = √(1−δ²)` the matrix is
//!
//! ```text
//! A(d) = [ I_d    0      ]
//!        [ s·E    a·I_dK ]      E = [I_d; …; I_d]  (K copies)
//! ```
//!
//! the signal puts `t₀·e₁` in blocks `2..=K+1`, and the noise is `ε·e₁` in the
//! first coordinate. Block 1 then scores `ε + K·a·s·t₀` against `a²·t₀` for
//! every true block, so BOMP picks block 1 whenever `t₀` is below the
//! necessary bound. `δ^B_{K+1}(A(d)) = δ` for every `d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::block::{BlockLayout, BlockSignal, BlockedMatrix, SensingProblem};
use crate::bounds::{necessary_bound, BoundInputs};
use crate::error::{BompError, Result};
use crate::solver::{run_bomp, select_block, StoppingRule};

/// Fraction of the failure bound used for `t₀` when none is given.
pub const DEFAULT_T0_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialParams {
    pub d: usize,
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub t0: f64,
}

impl AdversarialParams {
    /// `t0 = None` picks `0.99 ×` [`max_t0_for_failure`].
    pub fn new(d: usize, k: usize, delta: f64, epsilon: f64, t0: Option<f64>) -> Result<Self> {
        let t0 = match t0 {
            Some(t) => t,
            None => DEFAULT_T0_FRACTION * max_t0_for_failure(k, delta, epsilon)?,
        };
        let p = Self {
            d,
            k,
            delta,
            epsilon,
            t0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(BompError::InvalidInput(
                "d and K must be positive".to_string(),
            ));
        }
        // The construction only needs 0 < δ < 1; the failure threshold
        // additionally needs δ < 1/√(K+1) and reports that itself.
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BompError::InvalidInput(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "t0 must be positive, got {}",
                self.t0
            )));
        }
        Ok(())
    }

    /// `s = δ/√K`.
    pub fn s(&self) -> f64 {
        self.delta / (self.k as f64).sqrt()
    }

    /// `a = √(1−δ²)`.
    pub fn a(&self) -> f64 {
        (1.0 - self.delta * self.delta).sqrt()
    }

    /// Block-1 correlation with `y`: `ε + K·a·s·t₀`.
    pub fn outside_score(&self) -> f64 {
        self.epsilon + self.k as f64 * self.a() * self.s() * self.t0
    }

    /// Correlation of each true block with `y`: `a²·t₀`.
    pub fn inside_score(&self) -> f64 {
        self.a() * self.a() * self.t0
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::new(self.k + 1, self.d).expect("validated sizes")
    }

    /// True support `{2, …, K+1}`.
    pub fn support(&self) -> Vec<usize> {
        (2..=self.k + 1).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialInstance {
    pub params: AdversarialParams,
    pub problem: SensingProblem,
    pub truth: BlockSignal,
    pub noise: DVector<f64>,
}

pub fn adversarial_matrix(p: &AdversarialParams) -> Result<BlockedMatrix> {
    p.validate()?;
    let (d, k) = (p.d, p.k);
    let n = d * (k + 1);
    let (s, a) = (p.s(), p.a());
    let mut m = DMatrix::zeros(n, n);
    for i in 0..d {
        m[(i, i)] = 1.0;
    }
    for block in 1..=k {
        for i in 0..d {
            let row = block * d + i;
            m[(row, i)] = s;
            m[(row, row)] = a;
        }
    }
    BlockedMatrix::new(m, p.layout())
}

pub fn build_adversarial_instance(p: &AdversarialParams) -> Result<AdversarialInstance> {
    let matrix = adversarial_matrix(p)?;
    let layout = p.layout();
    let d = p.d;

    let mut truth = DVector::zeros(layout.ambient_dim());
    for block in 1..=p.k {
        truth[block * d] = p.t0;
    }
    let mut noise = DVector::zeros(layout.ambient_dim());
    noise[0] = p.epsilon;

    // assembled directly: y = (ε e₁; a t₀ e₁; …; a t₀ e₁)
    let mut y = DVector::zeros(layout.ambient_dim());
    y[0] = p.epsilon;
    for block in 1..=p.k {
        y[block * d] = p.a() * p.t0;
    }

    Ok(AdversarialInstance {
        params: *p,
        problem: SensingProblem::new(matrix, y, p.epsilon)?,
        truth: BlockSignal::new(layout, truth)?,
        noise,
    })
}

/// Eigenvalues of `A(1)ᵀA(1)`, ascending: `{1−δ, 1+δ}` for `K = 1`, otherwise
/// `1−δ²` (×`K−1`), `1−δ`, `1+δ`.
pub fn closed_form_spectrum(p: &AdversarialParams) -> Result<Vec<f64>> {
    p.validate()?;
    if p.d != 1 {
        return Err(BompError::InvalidInput(format!(
            "closed-form spectrum is only available for d = 1, got d = {}",
            p.d
        )));
    }
    let dl = p.delta;
    let mut ev = vec![1.0 - dl, 1.0 + dl];
    ev.extend(std::iter::repeat_n(1.0 - dl * dl, p.k - 1));
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Strict upper bound on `t₀` below which the first selection is block 1.
pub fn max_t0_for_failure(k: usize, delta: f64, epsilon: f64) -> Result<f64> {
    necessary_bound(&BoundInputs::new(k, delta, epsilon))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub first_selected_index: usize,
    /// `‖A[ℓ]ᵀy‖₂` for `ℓ = 1..=K+1`.
    pub scores: Vec<f64>,
    pub outside_score_closed_form: f64,
    pub inside_score_closed_form: f64,
    /// First selection lies outside the true support.
    pub failed: bool,
    pub t0: f64,
    pub t0_bound: f64,
    /// Support reported after a full run with `‖r‖₂ ≤ ε` stopping, capped at `K` iterations.
    pub final_support: Vec<usize>,
    pub recovered_at_end: bool,
}

pub fn demonstrate_failure(p: &AdversarialParams) -> Result<FailureReport> {
    let inst = build_adversarial_instance(p)?;
    let a = inst.problem.matrix();
    let y = inst.problem.observation();
    let scores = a.block_correlations(y)?;
    let first = select_block(a, y)?;

    let trace = run_bomp(
        &inst.problem,
        &StoppingRule::residual_threshold(p.epsilon, p.k)?,
    )?;
    let final_support = trace.support();
    let recovered_at_end = final_support == p.support() && trace.iterations_run == p.k;

    Ok(FailureReport {
        first_selected_index: first,
        scores,
        outside_score_closed_form: p.outside_score(),
        inside_score_closed_form: p.inside_score(),
        failed: first == 1,
        t0: p.t0,
        t0_bound: max_t0_for_failure(p.k, p.delta, p.epsilon)?,
        final_support,
        recovered_at_end,
    })
}
