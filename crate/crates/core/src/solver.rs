//! Block orthogonal matching pursuit.
//!
//! Each iteration picks the block whose columns correlate most with the
//! current residual, re-fits `y` by least squares on every chosen block, and
//! replaces the residual with the part of `y` orthogonal to those blocks.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::block::{BlockSignal, BlockedMatrix, SensingProblem};
use crate::error::{BompError, Result};
use crate::linalg::{least_squares_with_residual, OrthoBasis, RANK_TOL};

/// Tolerance on `‖A[i]ᵀ r‖₂ / ‖y‖₂` for chosen blocks after projection.
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Stop once `‖r^k‖₂ ≤ ε`; `max_iterations` acts as a safety cap.
    ResidualThreshold,
    /// Run exactly `max_iterations` selections.
    FixedIterations,
    /// Whichever of the two fires first.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub mode: StopMode,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl StoppingRule {
    pub fn new(mode: StopMode, epsilon: f64, max_iterations: usize) -> Result<Self> {
        let rule = Self {
            mode,
            epsilon,
            max_iterations,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn residual_threshold(epsilon: f64, max_iterations: usize) -> Result<Self> {
        Self::new(StopMode::ResidualThreshold, epsilon, max_iterations)
    }

    pub fn fixed_iterations(iterations: usize) -> Result<Self> {
        Self::new(StopMode::FixedIterations, 0.0, iterations)
    }

    pub fn both(epsilon: f64, max_iterations: usize) -> Result<Self> {
        Self::new(StopMode::Both, epsilon, max_iterations)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "stopping epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(BompError::InvalidInput(
                "max_iterations must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    fn uses_threshold(&self) -> bool {
        matches!(self.mode, StopMode::ResidualThreshold | StopMode::Both)
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    /// Residual fell to `ε` or below.
    Converged,
    /// Fixed-iteration count reached (fixed or both modes).
    IterationLimit,
    /// Residual-threshold mode hit `max_iterations` with `‖r‖₂ > ε`.
    IterationBudgetExceeded,
    /// No further block can be added (all chosen, or `(|Λ|+1)·d > m`).
    DictionaryExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrace {
    /// Selected blocks in selection order (1-based).
    pub chosen_indices: Vec<usize>,
    /// `‖r^k‖₂` for `k = 0..=iterations_run`; entry 0 is `‖y‖₂`.
    pub residual_norms: Vec<f64>,
    pub final_estimate: BlockSignal,
    pub iterations_run: usize,
    pub status: TraceStatus,
}

impl RecoveryTrace {
    /// Chosen indices sorted ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut s = self.chosen_indices.clone();
        s.sort_unstable();
        s
    }

    pub fn final_residual_norm(&self) -> f64 {
        *self.residual_norms.last().expect("trace always holds ‖y‖")
    }

    pub fn to_json(&self) -> TraceJson {
        TraceJson {
            chosen_indices: self.chosen_indices.clone(),
            residual_norms: self.residual_norms.clone(),
            final_estimate: self.final_estimate.values().iter().copied().collect(),
            iterations_run: self.iterations_run,
            status: self.status,
            num_blocks: self.final_estimate.layout().num_blocks(),
            block_width: self.final_estimate.layout().block_width(),
        }
    }
}

/// Serialized form of a [`RecoveryTrace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub chosen_indices: Vec<usize>,
    pub residual_norms: Vec<f64>,
    pub final_estimate: Vec<f64>,
    pub iterations_run: usize,
    pub status: TraceStatus,
    #[serde(rename = "M")]
    pub num_blocks: usize,
    #[serde(rename = "d")]
    pub block_width: usize,
}

/// Block maximizing `‖A[ℓ]ᵀ r‖₂`; ties go to the smallest index.
pub fn select_block(a: &BlockedMatrix, r: &DVector<f64>) -> Result<usize> {
    select_block_excluding(a, r, &[])
}

/// As [`select_block`] but never returns a block listed in `excluded`.
pub fn select_block_excluding(
    a: &BlockedMatrix,
    r: &DVector<f64>,
    excluded: &[usize],
) -> Result<usize> {
    let scores = a.block_correlations(r)?;
    let mut best: Option<(usize, f64)> = None;
    for (b, &score) in scores.iter().enumerate() {
        let index = b + 1;
        if excluded.contains(&index) {
            continue;
        }
        // strict comparison keeps the smallest index on ties
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((index, score));
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| {
        BompError::InvalidInput("every block is excluded from selection".to_string())
    })
}

/// Least-squares fit of `y` on the blocks in `support`.
///
/// Returns the estimate (zero off `support`) and the residual `y − A·estimate`.
pub fn project_least_squares(
    a: &BlockedMatrix,
    support: &[usize],
    y: &DVector<f64>,
) -> Result<(BlockSignal, DVector<f64>)> {
    if y.len() != a.rows() {
        return Err(BompError::DimensionMismatch(format!(
            "observation has {} entries, matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    let sorted = a.layout().normalize_support(support)?;
    let (coeffs, residual) = least_squares_with_residual(&a.gather(&sorted), y, RANK_TOL)?;
    let estimate = BlockSignal::from_support(a.layout(), &sorted, &coeffs)?;
    Ok((estimate, residual))
}

/// Runs BOMP on `problem` until `stop` fires.
///
/// Rank-deficient subdictionaries abort the run with an error; hitting the
/// iteration cap in threshold mode is reported through
/// [`TraceStatus::IterationBudgetExceeded`] instead.
pub fn run_bomp(problem: &SensingProblem, stop: &StoppingRule) -> Result<RecoveryTrace> {
    stop.validate()?;
    let a = problem.matrix();
    let y = problem.observation();
    let layout = a.layout();
    let d = layout.block_width();

    let mut chosen: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut residual_norms = vec![y.norm()];
    let mut estimate = BlockSignal::zeros(layout);
    // factorization of A[Λ] in selection order, extended by one block per iteration
    let mut basis = OrthoBasis::new(a.rows(), RANK_TOL);

    let status = loop {
        let current = *residual_norms.last().unwrap();
        if stop.uses_threshold() && current <= stop.epsilon {
            break TraceStatus::Converged;
        }
        if chosen.len() >= stop.max_iterations {
            break match stop.mode {
                StopMode::ResidualThreshold => TraceStatus::IterationBudgetExceeded,
                _ => TraceStatus::IterationLimit,
            };
        }
        if chosen.len() == layout.num_blocks() || (chosen.len() + 1) * d > a.rows() {
            break TraceStatus::DictionaryExhausted;
        }

        // chosen blocks are masked; their scores are round-off after projection anyway
        let next = select_block_excluding(a, &residual, &chosen)?;
        basis.push_columns(&a.block(next)?.into_owned())?;
        chosen.push(next);
        let (coeffs, r) = basis.solve(y)?;
        residual_norms.push(r.norm());
        estimate = BlockSignal::from_support(layout, &chosen, &coeffs)?;
        residual = r;
    };

    Ok(RecoveryTrace {
        iterations_run: chosen.len(),
        chosen_indices: chosen,
        residual_norms,
        final_estimate: estimate,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockLayout;
    use nalgebra::DMatrix;

    fn identity_problem(values: &[f64], d: usize, eps: f64) -> SensingProblem {
        let layout = BlockLayout::new(values.len() / d, d).unwrap();
        SensingProblem::new(
            BlockedMatrix::identity(layout),
            DVector::from_column_slice(values),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn zero_residual_selects_first_block() {
        let a = BlockedMatrix::identity(BlockLayout::new(4, 2).unwrap());
        assert_eq!(select_block(&a, &DVector::zeros(8)).unwrap(), 1);
    }

    #[test]
    fn identity_selects_coordinate() {
        let a = BlockedMatrix::identity(BlockLayout::new(5, 1).unwrap());
        let mut r = DVector::zeros(5);
        r[2] = 1.0;
        assert_eq!(select_block(&a, &r).unwrap(), 3);
    }

    #[test]
    fn ties_break_to_smallest_index() {
        let a = BlockedMatrix::identity(BlockLayout::new(4, 1).unwrap());
        let r = DVector::from_column_slice(&[0.0, 2.0, -2.0, 2.0]);
        assert_eq!(select_block(&a, &r).unwrap(), 2);
        assert_eq!(select_block_excluding(&a, &r, &[2]).unwrap(), 3);
    }

    #[test]
    fn empty_support_projection() {
        let a = BlockedMatrix::identity(BlockLayout::new(3, 1).unwrap());
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let (x, r) = project_least_squares(&a, &[], &y).unwrap();
        assert_eq!(x.values(), &DVector::zeros(3));
        assert_eq!(r, y);
    }

    #[test]
    fn identity_projection_copies_block() {
        let a = BlockedMatrix::identity(BlockLayout::new(3, 2).unwrap());
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (x, r) = project_least_squares(&a, &[2], &y).unwrap();
        assert_eq!(x.values().as_slice(), &[0.0, 0.0, 3.0, 4.0, 0.0, 0.0]);
        assert_eq!(r.as_slice(), &[1.0, 2.0, 0.0, 0.0, 5.0, 6.0]);
    }

    #[test]
    fn rank_deficient_projection_errors() {
        let layout = BlockLayout::new(2, 1).unwrap();
        let a = BlockedMatrix::new(DMatrix::from_element(3, 2, 1.0), layout).unwrap();
        let y = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            project_least_squares(&a, &[1, 2], &y),
            Err(BompError::RankDeficient { .. })
        ));
    }

    #[test]
    fn noiseless_identity_one_block() {
        let p = identity_problem(&[0.0, 0.0, 3.0, -1.0, 0.0, 0.0], 2, 0.0);
        let trace = run_bomp(&p, &StoppingRule::residual_threshold(0.0, 3).unwrap()).unwrap();
        assert_eq!(trace.chosen_indices, vec![2]);
        assert_eq!(trace.iterations_run, 1);
        assert_eq!(trace.status, TraceStatus::Converged);
        assert_eq!(trace.final_residual_norm(), 0.0);
        assert_eq!(trace.residual_norms.len(), 2);
    }

    #[test]
    fn threshold_budget_exceeded_is_a_status() {
        let p = identity_problem(&[1.0, 2.0, 3.0, 4.0], 1, 0.0);
        let trace = run_bomp(&p, &StoppingRule::residual_threshold(0.0, 2).unwrap()).unwrap();
        assert_eq!(trace.status, TraceStatus::IterationBudgetExceeded);
        assert_eq!(trace.chosen_indices, vec![4, 3]);
    }

    #[test]
    fn fixed_mode_runs_exact_count() {
        let p = identity_problem(&[1.0, 0.0, 0.0, 0.0], 1, 0.0);
        let trace = run_bomp(&p, &StoppingRule::fixed_iterations(3).unwrap()).unwrap();
        assert_eq!(trace.iterations_run, 3);
        assert_eq!(trace.status, TraceStatus::IterationLimit);
        assert_eq!(trace.chosen_indices[0], 1);
    }

    #[test]
    fn both_mode_stops_on_first_trigger() {
        let p = identity_problem(&[1.0, 5.0, 0.0, 0.0], 1, 0.0);
        let trace = run_bomp(&p, &StoppingRule::both(1.5, 3).unwrap()).unwrap();
        assert_eq!(trace.chosen_indices, vec![2]);
        assert_eq!(trace.status, TraceStatus::Converged);
        let trace = run_bomp(&p, &StoppingRule::both(0.0, 1).unwrap()).unwrap();
        assert_eq!(trace.status, TraceStatus::IterationLimit);
    }

    #[test]
    fn small_observation_needs_no_iterations() {
        let p = identity_problem(&[0.1, 0.0], 1, 0.0);
        let trace = run_bomp(&p, &StoppingRule::residual_threshold(0.5, 2).unwrap()).unwrap();
        assert_eq!(trace.iterations_run, 0);
        assert_eq!(trace.status, TraceStatus::Converged);
    }

    #[test]
    fn exhausts_dictionary() {
        let p = identity_problem(&[1.0, 2.0], 1, 0.0);
        let trace = run_bomp(&p, &StoppingRule::fixed_iterations(5).unwrap()).unwrap();
        assert_eq!(trace.iterations_run, 2);
        assert_eq!(trace.status, TraceStatus::DictionaryExhausted);
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::residual_threshold(-1.0, 3).is_err());
        assert!(StoppingRule::fixed_iterations(0).is_err());
        assert!(StoppingRule::both(f64::NAN, 3).is_err());
    }

    #[test]
    fn trace_json_mirrors_fields() {
        let p = identity_problem(&[0.0, 2.0], 1, 0.0);
        let trace = run_bomp(&p, &StoppingRule::residual_threshold(0.0, 2).unwrap()).unwrap();
        let json = serde_json::to_value(trace.to_json()).unwrap();
        assert_eq!(json["chosen_indices"], serde_json::json!([2]));
        assert_eq!(json["iterations_run"], 1);
        assert_eq!(json["status"], "converged");
        assert_eq!(json["final_estimate"], serde_json::json!([0.0, 2.0]));
    }
}
