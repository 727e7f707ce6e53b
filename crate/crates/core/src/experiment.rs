//! Seeded Monte Carlo recovery experiments.

use std::path::PathBuf;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockLayout, BlockSignal, BlockedMatrix, SensingProblem};
use crate::bounds::{check_sufficient, ProblemFacts, Verdict};
use crate::error::{BompError, Result};
use crate::io::{load_blocked_matrix, read_vector_csv};
use crate::random::{gaussian_matrix, random_support, trial_rng, vector_with_norm};
use crate::rip::{exact_block_rip, DEFAULT_BUDGET};
use crate::solver::{run_bomp, StoppingRule};

/// Environment variable capping the worker count (`0` = automatic).
pub const THREADS_ENV: &str = "BOMP_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixEnsemble {
    /// Fresh `N(0, 1/m)` matrix per trial.
    Gaussian,
    /// Fixed matrix from disk. With `truth` the signal is fixed too, and with
    /// `observation` as well the whole instance is fixed.
    FromFile {
        matrix: PathBuf,
        layout: PathBuf,
        #[serde(default)]
        truth: Option<PathBuf>,
        #[serde(default)]
        observation: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    #[serde(rename = "M")]
    pub num_blocks: usize,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub noise_norm: f64,
    pub min_block_norm: f64,
    pub trials: usize,
    pub seed: u64,
    pub matrix_ensemble: MatrixEnsemble,
    /// Defaults to `‖r‖₂ ≤ noise_norm` capped at `K` iterations.
    #[serde(default)]
    pub stopping: Option<StoppingRule>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.num_blocks == 0 || self.d == 0 || self.k == 0 {
            return Err(BompError::InvalidInput(
                "m, M, d and K must all be positive".to_string(),
            ));
        }
        if self.k > self.num_blocks {
            return Err(BompError::InvalidInput(format!(
                "K = {} exceeds M = {}",
                self.k, self.num_blocks
            )));
        }
        if self.k * self.d > self.m {
            return Err(BompError::InvalidInput(format!(
                "K*d = {} exceeds m = {}",
                self.k * self.d,
                self.m
            )));
        }
        if self.trials == 0 {
            return Err(BompError::InvalidInput(
                "trials must be positive".to_string(),
            ));
        }
        if !(self.noise_norm >= 0.0) || !self.noise_norm.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "noise_norm must be finite and nonnegative, got {}",
                self.noise_norm
            )));
        }
        if !(self.min_block_norm > 0.0) || !self.min_block_norm.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "min_block_norm must be positive, got {}",
                self.min_block_norm
            )));
        }
        self.stopping_rule()?.validate()
    }

    pub fn stopping_rule(&self) -> Result<StoppingRule> {
        match self.stopping {
            Some(rule) => Ok(rule),
            None => StoppingRule::residual_threshold(self.noise_norm, self.k),
        }
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        BlockLayout::new(self.num_blocks, self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub problem: SensingProblem,
    pub truth: BlockSignal,
    pub noise: DVector<f64>,
}

impl GeneratedInstance {
    pub fn support(&self) -> Vec<usize> {
        self.truth.block_support(0.0)
    }
}

#[derive(Debug, Clone)]
enum Source {
    Gaussian,
    Matrix(BlockedMatrix),
    Signal(BlockedMatrix, BlockSignal),
    Fixed(GeneratedInstance),
}

/// A validated config with any file inputs loaded once.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    layout: BlockLayout,
    source: Source,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout()?;
        let source = match &config.matrix_ensemble {
            MatrixEnsemble::Gaussian => Source::Gaussian,
            MatrixEnsemble::FromFile {
                matrix,
                layout: layout_path,
                truth,
                observation,
            } => {
                let a = load_blocked_matrix(matrix, layout_path)?;
                if a.rows() != config.m || a.layout() != layout {
                    return Err(BompError::InvalidInput(format!(
                        "matrix file is {}x{} with M={}, d={}; config says m={}, M={}, d={}",
                        a.rows(),
                        a.layout().ambient_dim(),
                        a.layout().num_blocks(),
                        a.layout().block_width(),
                        config.m,
                        config.num_blocks,
                        config.d
                    )));
                }
                match (truth, observation) {
                    (None, None) => Source::Matrix(a),
                    (Some(t), None) => {
                        let x = BlockSignal::new(layout, read_vector_csv(t)?)?;
                        Source::Signal(a, x)
                    }
                    (Some(t), Some(o)) => {
                        let x = BlockSignal::new(layout, read_vector_csv(t)?)?;
                        let y = read_vector_csv(o)?;
                        let noise = &y - a.apply(&x)?;
                        let problem = SensingProblem::new(a, y, config.noise_norm)?;
                        Source::Fixed(GeneratedInstance {
                            problem,
                            truth: x,
                            noise,
                        })
                    }
                    (None, Some(_)) => {
                        return Err(BompError::InvalidInput(
                            "an observation file needs a matching truth file".to_string(),
                        ))
                    }
                }
            }
        };
        Ok(Self {
            config,
            layout,
            source,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Instance for `trial_index`; a pure function of `(seed, trial_index)`.
    pub fn generate_instance(&self, trial_index: u64) -> Result<GeneratedInstance> {
        let cfg = &self.config;
        let mut rng = trial_rng(cfg.seed, trial_index);
        let (matrix, truth) = match &self.source {
            Source::Fixed(inst) => return Ok(inst.clone()),
            Source::Gaussian => {
                let a = BlockedMatrix::new(
                    gaussian_matrix(&mut rng, cfg.m, self.layout.ambient_dim()),
                    self.layout,
                )?;
                let x = self.random_signal(&mut rng)?;
                (a, x)
            }
            Source::Matrix(a) => (a.clone(), self.random_signal(&mut rng)?),
            Source::Signal(a, x) => (a.clone(), x.clone()),
        };
        let noise = vector_with_norm(&mut rng, cfg.m, cfg.noise_norm);
        let y = matrix.apply(&truth)? + &noise;
        Ok(GeneratedInstance {
            problem: SensingProblem::new(matrix, y, cfg.noise_norm)?,
            truth,
            noise,
        })
    }

    /// Uniform support; block norms in `[b, 2b)` with the smallest pinned to `b`.
    fn random_signal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BlockSignal> {
        let cfg = &self.config;
        let d = self.layout.block_width();
        let support = random_support(rng, self.layout.num_blocks(), cfg.k);
        let mut norms: Vec<f64> = (0..cfg.k)
            .map(|_| cfg.min_block_norm * (1.0 + rng.random::<f64>()))
            .collect();
        let smallest = rng.random_range(0..cfg.k);
        norms[smallest] = cfg.min_block_norm;
        let mut values = DVector::zeros(self.layout.ambient_dim());
        for (&i, &norm) in support.iter().zip(&norms) {
            values
                .rows_mut((i - 1) * d, d)
                .copy_from(&vector_with_norm(rng, d, norm));
        }
        BlockSignal::new(self.layout, values)
    }

    pub fn run_trial(&self, trial_index: u64) -> TrialRecord {
        let outcome = self.generate_instance(trial_index).and_then(|inst| {
            let trace = run_bomp(&inst.problem, &self.config.stopping_rule()?)?;
            Ok((trace.support() == inst.support(), trace.iterations_run))
        });
        match outcome {
            Ok((recovered, iterations)) => TrialRecord {
                seed_offset: trial_index,
                recovered,
                iterations,
                error: None,
            },
            Err(e) => TrialRecord {
                seed_offset: trial_index,
                recovered: false,
                iterations: 0,
                error: Some(e.to_string()),
            },
        }
    }

    /// Runs every trial on a pool of `threads` workers (`0` = automatic).
    pub fn run(&self, threads: usize) -> Result<ExperimentResult> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| BompError::InvalidInput(format!("thread pool: {e}")))?;
        let records: Vec<TrialRecord> = pool.install(|| {
            (0..self.config.trials as u64)
                .into_par_iter()
                .map(|i| self.run_trial(i))
                .collect()
        });
        Ok(ExperimentResult::from_records(records))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed_offset: u64,
    pub recovered: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub recovery_rate: f64,
    pub avg_iterations: f64,
    pub errors: usize,
    pub records: Vec<TrialRecord>,
}

impl ExperimentResult {
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let trials = records.len();
        let recovered = records.iter().filter(|r| r.recovered).count();
        let total_iterations: usize = records.iter().map(|r| r.iterations).sum();
        let errors = records.iter().filter(|r| r.error.is_some()).count();
        Self {
            recovery_rate: recovered as f64 / trials as f64,
            avg_iterations: total_iterations as f64 / trials as f64,
            errors,
            records,
        }
    }
}

/// Worker count from `BOMP_THREADS`, defaulting to automatic.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

pub fn generate_instance(cfg: &ExperimentConfig, trial_index: u64) -> Result<GeneratedInstance> {
    Experiment::prepare(cfg.clone())?.generate_instance(trial_index)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    Experiment::prepare(cfg.clone())?.run(threads_from_env())
}

/// Certifies an instance against the sufficient condition using the exact
/// `δ^B_{K+1}` (`K` = support size) and `ε = ‖e‖₂`-bound `epsilon`.
pub fn certify(instance: &GeneratedInstance, epsilon: f64) -> Result<(Verdict, f64)> {
    let support = instance.support();
    let k = support.len();
    let rip = exact_block_rip(instance.problem.matrix(), k + 1, DEFAULT_BUDGET)?;
    let facts = ProblemFacts {
        k,
        delta: rip.delta,
        epsilon,
        min_block_norm: instance.truth.min_block_norm_on(&support)?,
    };
    Ok((check_sufficient(&facts), rip.delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            m: 24,
            num_blocks: 6,
            d: 2,
            k: 2,
            noise_norm: 0.1,
            min_block_norm: 1.5,
            trials: 8,
            seed: 42,
            matrix_ensemble: MatrixEnsemble::Gaussian,
            stopping: None,
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = config();
        c.k = 7;
        assert!(c.validate().is_err());
        let mut c = config();
        c.m = 3;
        assert!(c.validate().is_err());
        let mut c = config();
        c.noise_norm = -1.0;
        assert!(c.validate().is_err());
        let mut c = config();
        c.min_block_norm = 0.0;
        assert!(c.validate().is_err());
        assert!(config().validate().is_ok());
    }

    #[test]
    fn instances_are_deterministic() {
        let a = generate_instance(&config(), 3).unwrap();
        let b = generate_instance(&config(), 3).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(&config(), 4).unwrap();
        assert_ne!(a.problem.observation(), c.problem.observation());
    }

    #[test]
    fn instance_construction_contract() {
        let cfg = config();
        for t in 0..20 {
            let inst = generate_instance(&cfg, t).unwrap();
            let support = inst.support();
            assert_eq!(support.len(), cfg.k);
            let min = inst.truth.min_block_norm_on(&support).unwrap();
            assert!((min - cfg.min_block_norm).abs() <= 1e-12);
            assert!((inst.noise.norm() - cfg.noise_norm).abs() <= 1e-12);
        }
    }

    #[test]
    fn noiseless_observation_in_range() {
        let mut cfg = config();
        cfg.noise_norm = 0.0;
        let inst = generate_instance(&cfg, 0).unwrap();
        let assembled = inst.problem.matrix().apply(&inst.truth).unwrap();
        assert_eq!(&assembled, inst.problem.observation());
    }

    #[test]
    fn config_json_uses_schema_names() {
        let json = serde_json::to_value(config()).unwrap();
        assert_eq!(json["M"], 6);
        assert_eq!(json["K"], 2);
        assert_eq!(json["matrix_ensemble"]["kind"], "gaussian");
        let text = r#"{"m":10,"M":5,"d":1,"K":1,"noise_norm":0,"min_block_norm":1,
            "trials":3,"seed":1,"matrix_ensemble":{"kind":"gaussian"},
            "stopping":{"mode":"both","epsilon":0.0,"max_iterations":2}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.stopping.unwrap().max_iterations, 2);
    }

    #[test]
    fn rate_is_exact_fraction() {
        let records = vec![
            TrialRecord {
                seed_offset: 0,
                recovered: true,
                iterations: 2,
                error: None,
            },
            TrialRecord {
                seed_offset: 1,
                recovered: false,
                iterations: 1,
                error: None,
            },
            TrialRecord {
                seed_offset: 2,
                recovered: true,
                iterations: 3,
                error: None,
            },
        ];
        let r = ExperimentResult::from_records(records);
        assert_eq!(r.recovery_rate, 2.0 / 3.0);
        assert_eq!(r.avg_iterations, 2.0);
    }
}
