mod common;

use bomp_core::experiment::{generate_instance, ExperimentConfig, MatrixEnsemble};
use bomp_core::solver::*;
use bomp_core::{BlockLayout, BlockedMatrix, SensingProblem};
use nalgebra::{DMatrix, DVector};

fn config(seed: u64, noise: f64) -> ExperimentConfig {
    ExperimentConfig {
        m: 30,
        num_blocks: 10,
        d: 2,
        k: 3,
        noise_norm: noise,
        min_block_norm: 1.0,
        trials: 1,
        seed,
        matrix_ensemble: MatrixEnsemble::Gaussian,
        stopping: None,
    }
}

#[test]
fn invariants_on_random_problems() {
    for seed in 0..40 {
        let inst = generate_instance(&config(seed, 0.05), 0).unwrap();
        for rule in [
            StoppingRule::residual_threshold(0.05, 10).unwrap(),
            StoppingRule::fixed_iterations(6).unwrap(),
            StoppingRule::both(0.05, 2).unwrap(),
        ] {
            let trace = run_bomp(&inst.problem, &rule).unwrap();
            common::solver_invariants(&inst.problem, &trace).unwrap();
            let again = run_bomp(&inst.problem, &rule).unwrap();
            assert_eq!(trace.chosen_indices, again.chosen_indices);
            assert_eq!(
                trace
                    .residual_norms
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>(),
                again
                    .residual_norms
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            );
            assert_eq!(trace.final_estimate, again.final_estimate);
        }
    }
}

#[test]
fn noiseless_success_reproduces_observation() {
    for seed in 0..20 {
        let inst = generate_instance(&config(seed, 0.0), 0).unwrap();
        let trace = run_bomp(&inst.problem, &StoppingRule::fixed_iterations(3).unwrap()).unwrap();
        if trace.support() == inst.support() {
            let y = inst.problem.observation();
            let fit = inst.problem.matrix().apply(&trace.final_estimate).unwrap();
            assert!((fit - y).norm() <= 1e-8 * y.norm());
        }
    }
}

#[test]
fn projection_is_idempotent() {
    let inst = generate_instance(&config(3, 0.1), 0).unwrap();
    let a = inst.problem.matrix();
    let y = inst.problem.observation();
    let (_, r1) = project_least_squares(a, &[2, 5, 7], y).unwrap();
    let (_, r2) = project_least_squares(a, &[2, 5, 7], y).unwrap();
    assert!((r1 - &r2).norm() <= 1e-12);
    // projecting the residual again removes nothing
    let (x3, r3) = project_least_squares(a, &[2, 5, 7], &r2).unwrap();
    assert!((r3 - &r2).norm() <= 1e-12 * r2.norm().max(1.0));
    assert!(x3.values().norm() <= 1e-10);
}

#[test]
fn rank_deficiency_propagates_from_run() {
    let layout = BlockLayout::new(3, 1).unwrap();
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let problem = SensingProblem::new(
        BlockedMatrix::new(a, layout).unwrap(),
        DVector::from_column_slice(&[1.0, 0.5, 0.0]),
        0.0,
    )
    .unwrap();
    let err = run_bomp(&problem, &StoppingRule::fixed_iterations(3).unwrap()).unwrap_err();
    assert!(matches!(err, bomp_core::BompError::RankDeficient { .. }));
}
