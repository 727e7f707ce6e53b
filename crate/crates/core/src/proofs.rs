//! Numerical checks of the identities behind the recovery guarantee.
//!
//! Notation: `T` is the true block support, `Λ ⊊ T` the blocks chosen so far,
//! `j ∉ T` a probe block, `r = P⊥_Λ y`, `ξ` the coefficients of `P_T y` on
//! `A[T]`, and `α = ξ[T∖Λ]`. The gap
//!
//! ```text
//! η = (‖r‖² − ‖P⊥_T e‖²)/‖α‖_{2,1} − ‖A[j]ᵀ r‖₂
//! ```
//!
//! is computed directly and through the polarization form in `B`, `u`, `v`,
//! `h`, which must agree for every `t > 0`. The perturbation bound checks
//! `min_T ‖ξ[i]‖ ≥ min_T ‖x[i]‖ − ε/√(1−δ^B_{K+1})`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockSignal, BlockedMatrix, SensingProblem};
use crate::error::{BompError, Result};
use crate::linalg::{least_squares, orthogonal_residual, orthogonal_residual_columns, RANK_TOL};
use crate::random::{gaussian_matrix, random_support, trial_rng, vector_with_norm};
use crate::rip::{exact_block_rip, DEFAULT_BUDGET};

/// Values of `t` at which the polarization identity is evaluated.
pub const T_SWEEP: [f64; 3] = [0.1, 1.0, 10.0];

/// Relative tolerance for `|η_direct − η_identity| ≤ tol · max(1, |η|)`.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Slack on the perturbation-bound inequalities.
pub const LEMMA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProofInstance {
    problem: SensingProblem,
    truth: BlockSignal,
    noise: DVector<f64>,
    support: Vec<usize>,
    partial_support: Vec<usize>,
    probe: usize,
    t: f64,
}

impl ProofInstance {
    /// `T` is the exact block support of `truth`; the noise is `y − A·truth`.
    pub fn new(
        problem: SensingProblem,
        truth: BlockSignal,
        partial_support: &[usize],
        probe: usize,
        t: f64,
    ) -> Result<Self> {
        let layout = problem.layout();
        let support = truth.block_support(0.0);
        let partial = layout.normalize_support(partial_support)?;
        layout.check_index(probe)?;
        if truth.layout() != layout {
            return Err(BompError::DimensionMismatch(
                "truth layout differs from problem layout".to_string(),
            ));
        }
        if partial.len() >= support.len() || !partial.iter().all(|i| support.contains(i)) {
            return Err(BompError::InvalidInput(
                "partial support must be a strict subset of the true support".to_string(),
            ));
        }
        if support.contains(&probe) {
            return Err(BompError::InvalidInput(format!(
                "probe block {probe} lies in the true support"
            )));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "t must be positive, got {t}"
            )));
        }
        let noise = problem.observation() - problem.matrix().apply(&truth)?;
        Ok(Self {
            problem,
            truth,
            noise,
            support,
            partial_support: partial,
            probe,
            t,
        })
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "t must be positive, got {t}"
            )));
        }
        Ok(Self { t, ..self.clone() })
    }

    pub fn problem(&self) -> &SensingProblem {
        &self.problem
    }

    pub fn truth(&self) -> &BlockSignal {
        &self.truth
    }

    pub fn noise(&self) -> &DVector<f64> {
        &self.noise
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn partial_support(&self) -> &[usize] {
        &self.partial_support
    }

    pub fn probe(&self) -> usize {
        self.probe
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `T ∖ Λ`, ascending.
    pub fn remaining(&self) -> Vec<usize> {
        self.support
            .iter()
            .copied()
            .filter(|i| !self.partial_support.contains(i))
            .collect()
    }

    fn matrix(&self) -> &BlockedMatrix {
        self.problem.matrix()
    }

    /// `r = P⊥_Λ y`.
    pub fn residual(&self) -> Result<DVector<f64>> {
        let sub = self.matrix().gather(&self.partial_support);
        orthogonal_residual(&sub, self.problem.observation(), RANK_TOL)
    }

    fn alpha(&self) -> Result<(Vec<usize>, DVector<f64>, f64)> {
        let xi = compute_xi(&self.problem, &self.support)?;
        let remaining = self.remaining();
        let d = self.problem.layout().block_width();
        let mut alpha = DVector::zeros(remaining.len() * d);
        let mut l21 = 0.0;
        for (slot, &i) in remaining.iter().enumerate() {
            let block = xi.block(i)?;
            l21 += block.norm();
            alpha.rows_mut(slot * d, d).copy_from(&block);
        }
        if l21 == 0.0 {
            return Err(BompError::DivisionByZero(
                "alpha has zero mixed l2,1 norm".to_string(),
            ));
        }
        Ok((remaining, alpha, l21))
    }
}

/// Coefficients of `P_T y` on the blocks of `T`, zero elsewhere.
pub fn compute_xi(problem: &SensingProblem, support: &[usize]) -> Result<BlockSignal> {
    let a = problem.matrix();
    let sorted = a.layout().normalize_support(support)?;
    let sub = a.gather(&sorted);
    let coeffs = least_squares(&sub, problem.observation(), RANK_TOL)?;
    BlockSignal::from_support(a.layout(), &sorted, &coeffs)
}

/// `η` straight from its definition.
pub fn eta_direct(inst: &ProofInstance) -> Result<f64> {
    let a = inst.matrix();
    let r = inst.residual()?;
    let (_, _, l21) = inst.alpha()?;
    let on_t = a.gather(&inst.support);
    let pt_perp_e = orthogonal_residual(&on_t, &inst.noise, RANK_TOL)?;
    let probe_corr = a.block(inst.probe)?.tr_mul(&r).norm();
    Ok((r.norm_squared() - pt_perp_e.norm_squared()) / l21 - probe_corr)
}

/// Intermediate objects of the polarization form.
#[derive(Debug, Clone)]
pub struct IdentityTerms {
    /// `B = P⊥_Λ [A[T∖Λ]  A[j]]`.
    pub b: DMatrix<f64>,
    /// `u = [α; 0]`.
    pub u: DVector<f64>,
    /// `v = [0; h]`.
    pub v: DVector<f64>,
    /// `h = A[j]ᵀ P⊥_Λ y / ‖A[j]ᵀ P⊥_Λ y‖₂`.
    pub h: DVector<f64>,
    pub alpha_l21: f64,
    /// `eᵀ P⊥_T A[j] h`.
    pub noise_term: f64,
}

pub fn identity_terms(inst: &ProofInstance) -> Result<IdentityTerms> {
    let a = inst.matrix();
    let d = a.layout().block_width();
    let y = inst.problem.observation();
    let on_lambda = a.gather(&inst.partial_support);
    let probe_block = a.block(inst.probe)?.into_owned();

    let r = orthogonal_residual(&on_lambda, y, RANK_TOL)?;
    let g = probe_block.tr_mul(&r);
    let g_norm = g.norm();
    if !(g_norm > 0.0) {
        return Err(BompError::DegenerateProbe(format!(
            "block {} is orthogonal to the residual",
            inst.probe
        )));
    }
    let h = g / g_norm;

    let (remaining, alpha, l21) = inst.alpha()?;
    let mut cols = remaining.clone();
    cols.push(inst.probe);
    let b = orthogonal_residual_columns(&on_lambda, &a.gather(&cols), RANK_TOL)?;

    let width = remaining.len() * d + d;
    let mut u = DVector::zeros(width);
    u.rows_mut(0, alpha.len()).copy_from(&alpha);
    let mut v = DVector::zeros(width);
    v.rows_mut(remaining.len() * d, d).copy_from(&h);

    let on_t = a.gather(&inst.support);
    let pt_perp_aj_h = orthogonal_residual(&on_t, &(&probe_block * &h), RANK_TOL)?;
    let noise_term = inst.noise.dot(&pt_perp_aj_h);

    Ok(IdentityTerms {
        b,
        u,
        v,
        h,
        alpha_l21: l21,
        noise_term,
    })
}

impl IdentityTerms {
    /// Right-hand side of the polarization identity at `t`.
    pub fn eta_at(&self, t: f64) -> f64 {
        let c = 1.0 / self.alpha_l21;
        let plus = &self.b * ((t + c) * &self.u - &self.v);
        let minus = &self.b * ((t - c) * &self.u + &self.v);
        (plus.norm_squared() - minus.norm_squared()) / (4.0 * t) - self.noise_term
    }
}

/// `η` through the polarization identity at the instance's `t`.
pub fn eta_via_identity(inst: &ProofInstance) -> Result<f64> {
    Ok(identity_terms(inst)?.eta_at(inst.t))
}

/// `‖P⊥_Λ P⊥_T y − P⊥_T y‖₂`, zero whenever `Λ ⊆ T`.
pub fn projector_nesting_residual(inst: &ProofInstance) -> Result<f64> {
    let a = inst.matrix();
    let y = inst.problem.observation();
    let pt = orthogonal_residual(&a.gather(&inst.support), y, RANK_TOL)?;
    let nested = orthogonal_residual(&a.gather(&inst.partial_support), &pt, RANK_TOL)?;
    Ok((nested - pt).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// `min_{i∈T} ‖ξ[i]‖₂`.
    pub lhs: f64,
    /// `min_{i∈T} ‖x[i]‖₂ − ε/√(1−δ)`.
    pub rhs: f64,
    pub holds: bool,
    /// `‖θ‖₂` where `P_T e = A[T] θ[T]`.
    pub theta_norm: f64,
    /// `ε/√(1−δ)`.
    pub theta_bound: f64,
    pub theta_holds: bool,
    /// `‖ξ[T] − x[T] − θ[T]‖₂`.
    pub decomposition_error: f64,
    pub delta: f64,
}

/// Perturbation bound with `δ = δ^B_{|T|+1}` computed exactly.
pub fn lemma1_check(
    problem: &SensingProblem,
    truth: &BlockSignal,
    epsilon: f64,
) -> Result<Lemma1Report> {
    let k = truth.block_support(0.0).len();
    let rip = exact_block_rip(problem.matrix(), k + 1, DEFAULT_BUDGET)?;
    lemma1_check_with_delta(problem, truth, epsilon, rip.delta)
}

pub fn lemma1_check_with_delta(
    problem: &SensingProblem,
    truth: &BlockSignal,
    epsilon: f64,
    delta: f64,
) -> Result<Lemma1Report> {
    if !(delta < 1.0) {
        return Err(BompError::Infeasible(format!(
            "block RIP constant {delta} is not below 1"
        )));
    }
    let a = problem.matrix();
    let support = truth.block_support(0.0);
    let noise = problem.observation() - a.apply(truth)?;
    if noise.norm() > epsilon * (1.0 + 1e-12) {
        return Err(BompError::InvalidInput(format!(
            "noise norm {} exceeds epsilon {epsilon}",
            noise.norm()
        )));
    }

    let xi = compute_xi(problem, &support)?;
    let sub = a.gather(&support);
    let theta_coeffs = least_squares(&sub, &noise, RANK_TOL)?;
    let theta = BlockSignal::from_support(a.layout(), &support, &theta_coeffs)?;

    let lhs = xi.min_block_norm_on(&support)?;
    let theta_bound = epsilon / (1.0 - delta).sqrt();
    let rhs = truth.min_block_norm_on(&support)? - theta_bound;
    let theta_norm = theta.values().norm();
    let decomposition_error = (xi.values() - truth.values() - theta.values()).norm();

    Ok(Lemma1Report {
        lhs,
        rhs,
        holds: lhs >= rhs - LEMMA_TOL,
        theta_norm,
        theta_bound,
        theta_holds: theta_norm <= theta_bound + LEMMA_TOL,
        decomposition_error,
        delta,
    })
}

/// Shape limits for randomly drawn proof instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerLimits {
    pub max_blocks: usize,
    pub max_width: usize,
    pub max_sparsity: usize,
    /// Rows per column of a size-`K+1` support.
    pub oversampling: usize,
}

impl Default for SamplerLimits {
    fn default() -> Self {
        Self {
            max_blocks: 8,
            max_width: 3,
            max_sparsity: 3,
            oversampling: 4,
        }
    }
}

/// A random instance together with its exact `δ^B_{K+1}` and noise level.
#[derive(Debug, Clone)]
pub struct SampledInstance {
    pub instance: ProofInstance,
    pub delta: f64,
    pub epsilon: f64,
}

/// Draws Gaussian instances until one has `δ^B_{K+1} < 1`, full-rank
/// subdictionaries, and a nondegenerate probe.
pub fn sample_instance<R: Rng + ?Sized>(rng: &mut R, limits: &SamplerLimits) -> SampledInstance {
    loop {
        if let Some(s) = try_sample(rng, limits) {
            return s;
        }
    }
}

fn try_sample<R: Rng + ?Sized>(rng: &mut R, limits: &SamplerLimits) -> Option<SampledInstance> {
    let d = rng.random_range(1..=limits.max_width);
    let k = rng.random_range(1..=limits.max_sparsity.min(limits.max_blocks - 1));
    let num_blocks = rng.random_range(k + 1..=limits.max_blocks);
    let rows = limits.oversampling * d * (k + 1);
    let layout = crate::block::BlockLayout::new(num_blocks, d).ok()?;
    let matrix =
        BlockedMatrix::new(gaussian_matrix(rng, rows, layout.ambient_dim()), layout).ok()?;

    let support = random_support(rng, num_blocks, k);
    let mut truth = DVector::zeros(layout.ambient_dim());
    for &i in &support {
        let norm = rng.random_range(0.5..2.0);
        truth
            .rows_mut((i - 1) * d, d)
            .copy_from(&vector_with_norm(rng, d, norm));
    }
    let truth = BlockSignal::new(layout, truth).ok()?;
    let epsilon = rng.random_range(0.01..1.0);
    let noise = vector_with_norm(rng, rows, epsilon);
    let y = matrix.apply(&truth).ok()? + noise;
    let problem = SensingProblem::new(matrix, y, epsilon).ok()?;

    let lambda_size = rng.random_range(0..k);
    let partial: Vec<usize> = random_support(rng, k, lambda_size)
        .into_iter()
        .map(|slot| support[slot - 1])
        .collect();
    let outside: Vec<usize> = (1..=num_blocks).filter(|i| !support.contains(i)).collect();
    let probe = outside[rng.random_range(0..outside.len())];

    let delta = exact_block_rip(problem.matrix(), k + 1, DEFAULT_BUDGET)
        .ok()?
        .delta;
    if !(delta < 1.0) {
        return None;
    }
    let instance = ProofInstance::new(problem, truth, &partial, probe, 1.0).ok()?;
    identity_terms(&instance).ok()?;
    Some(SampledInstance {
        instance,
        delta,
        epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub identity_passes: usize,
    pub identity_checks: usize,
    /// Largest `|η_direct − η_identity| / max(1, |η|)` over the `t` sweep.
    pub identity_residual: f64,
    pub h_norm_error: f64,
    pub nesting_residual: f64,
    pub lemma1_holds: bool,
    pub theta_holds: bool,
    pub decomposition_error: f64,
}

pub fn run_trial(seed: u64, index: u64, limits: &SamplerLimits) -> Result<TrialOutcome> {
    let mut rng = trial_rng(seed, index);
    let sampled = sample_instance(&mut rng, limits);
    let inst = &sampled.instance;

    let direct = eta_direct(inst)?;
    let terms = identity_terms(inst)?;
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    for t in T_SWEEP {
        let via = terms.eta_at(t);
        let rel = (direct - via).abs() / direct.abs().max(1.0);
        worst = worst.max(rel);
        if rel <= IDENTITY_TOL {
            passes += 1;
        }
    }

    let lemma =
        lemma1_check_with_delta(inst.problem(), inst.truth(), sampled.epsilon, sampled.delta)?;

    Ok(TrialOutcome {
        identity_passes: passes,
        identity_checks: T_SWEEP.len(),
        identity_residual: worst,
        h_norm_error: (terms.h.norm() - 1.0).abs(),
        nesting_residual: projector_nesting_residual(inst)?,
        lemma1_holds: lemma.holds,
        theta_holds: lemma.theta_holds,
        decomposition_error: lemma.decomposition_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub trials: usize,
    pub identity_passes: usize,
    pub identity_checks: usize,
    pub worst_identity_residual: f64,
    pub worst_h_norm_error: f64,
    pub worst_nesting_residual: f64,
    pub lemma1_passes: usize,
    pub theta_bound_passes: usize,
    pub worst_decomposition_error: f64,
    pub errors: usize,
}

impl VerificationSummary {
    pub fn all_passed(&self) -> bool {
        self.errors == 0
            && self.identity_passes == self.identity_checks
            && self.lemma1_passes == self.trials
            && self.theta_bound_passes == self.trials
    }
}

/// Runs `trials` independent proof checks; the summary does not depend on scheduling.
pub fn verify_proofs(trials: usize, seed: u64, limits: &SamplerLimits) -> VerificationSummary {
    let outcomes: Vec<Result<TrialOutcome>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(seed, i, limits))
        .collect();
    let mut summary = VerificationSummary {
        trials,
        identity_passes: 0,
        identity_checks: 0,
        worst_identity_residual: 0.0,
        worst_h_norm_error: 0.0,
        worst_nesting_residual: 0.0,
        lemma1_passes: 0,
        theta_bound_passes: 0,
        worst_decomposition_error: 0.0,
        errors: 0,
    };
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                summary.identity_passes += o.identity_passes;
                summary.identity_checks += o.identity_checks;
                summary.worst_identity_residual =
                    summary.worst_identity_residual.max(o.identity_residual);
                summary.worst_h_norm_error = summary.worst_h_norm_error.max(o.h_norm_error);
                summary.worst_nesting_residual =
                    summary.worst_nesting_residual.max(o.nesting_residual);
                summary.lemma1_passes += usize::from(o.lemma1_holds);
                summary.theta_bound_passes += usize::from(o.theta_holds);
                summary.worst_decomposition_error =
                    summary.worst_decomposition_error.max(o.decomposition_error);
            }
            Err(_) => {
                summary.errors += 1;
                summary.identity_checks += T_SWEEP.len();
            }
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockLayout;

    fn identity_instance(
        values: &[f64],
        d: usize,
        partial: &[usize],
        probe: usize,
    ) -> ProofInstance {
        let layout = BlockLayout::new(values.len() / d, d).unwrap();
        let truth = BlockSignal::from_slice(layout, values).unwrap();
        let a = BlockedMatrix::identity(layout);
        let y = a.apply(&truth).unwrap();
        let problem = SensingProblem::new(a, y, 0.0).unwrap();
        ProofInstance::new(problem, truth, partial, probe, 1.0).unwrap()
    }

    #[test]
    fn xi_on_identity_copies_y() {
        let layout = BlockLayout::new(3, 1).unwrap();
        let a = BlockedMatrix::identity(layout);
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let p = SensingProblem::new(a, y, 0.0).unwrap();
        let xi = compute_xi(&p, &[1, 3]).unwrap();
        assert_eq!(xi.values().as_slice(), &[1.0, 0.0, 3.0]);
    }

    #[test]
    fn instance_validation() {
        let layout = BlockLayout::new(3, 1).unwrap();
        let truth = BlockSignal::from_slice(layout, &[0.0, 1.0, 0.0]).unwrap();
        let a = BlockedMatrix::identity(layout);
        let p = SensingProblem::new(a, truth.values().clone(), 0.0).unwrap();
        assert!(ProofInstance::new(p.clone(), truth.clone(), &[2], 1, 1.0).is_err());
        assert!(ProofInstance::new(p.clone(), truth.clone(), &[], 2, 1.0).is_err());
        assert!(ProofInstance::new(p.clone(), truth.clone(), &[], 1, 0.0).is_err());
        assert!(ProofInstance::new(p, truth, &[], 1, 1.0).is_ok());
    }

    #[test]
    fn orthogonal_toy_reduces_to_block_norm() {
        // e = 0, Λ = ∅, orthonormal A: η = ‖x‖ − ‖A[j]ᵀ A x‖ = ‖x‖
        let inst = identity_instance(&[0.0, 0.0, 3.0, 4.0, 0.0, 0.0], 2, &[], 3);
        assert!((eta_direct(&inst).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_probe_is_reported() {
        let inst = identity_instance(&[0.0, 3.0, 0.0], 1, &[], 1);
        assert!(matches!(
            eta_via_identity(&inst),
            Err(BompError::DegenerateProbe(_))
        ));
    }

    #[test]
    fn noiseless_lemma_is_tight() {
        let layout = BlockLayout::new(3, 1).unwrap();
        let truth = BlockSignal::from_slice(layout, &[0.0, 2.0, 0.5]).unwrap();
        let a = BlockedMatrix::identity(layout);
        let p = SensingProblem::new(a, truth.values().clone(), 0.0).unwrap();
        let report = lemma1_check(&p, &truth, 0.0).unwrap();
        assert!(report.holds);
        assert_eq!(report.lhs, 0.5);
        assert_eq!(report.rhs, 0.5);
        assert_eq!(report.theta_norm, 0.0);
    }

    #[test]
    fn lemma_rejects_noise_above_epsilon() {
        let layout = BlockLayout::new(3, 1).unwrap();
        let truth = BlockSignal::from_slice(layout, &[0.0, 2.0, 0.0]).unwrap();
        let a = BlockedMatrix::identity(layout);
        let p = SensingProblem::new(a, DVector::from_column_slice(&[1.0, 2.0, 0.0]), 0.5).unwrap();
        assert!(lemma1_check(&p, &truth, 0.5).is_err());
    }
}
