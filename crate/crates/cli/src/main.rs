//! `bomp`: command-line front end for the block OMP toolkit.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bomp_core::adversarial::{build_adversarial_instance, demonstrate_failure, AdversarialParams};
use bomp_core::bounds::{
    check_sufficient, curves_to_csv, figure1_curves, necessary_bound, z1_sufficient_bound,
    z2_prior_bound, BoundInputs, ProblemFacts,
};
use bomp_core::experiment::{threads_from_env, Experiment, ExperimentConfig};
use bomp_core::io::{load_blocked_matrix, read_vector_csv, save_blocked_matrix, write_vector_csv};
use bomp_core::proofs::{verify_proofs, SamplerLimits};
use bomp_core::rip::{exact_block_rip, rip_lower_bound_sampled, DEFAULT_BUDGET};
use bomp_core::{run_bomp, BompError, SensingProblem, StopMode, StoppingRule};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "bomp",
    version,
    about = "Block orthogonal matching pursuit and recovery-bound tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run BOMP on a stored problem and print the trace.
    Run {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        /// Residual threshold; omit to run a fixed number of iterations.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Iteration cap (defaults to the number of blocks).
        #[arg(long)]
        max_iter: Option<usize>,
        /// Stopping mode; inferred from --epsilon when absent.
        #[arg(long, value_enum)]
        stop: Option<StopArg>,
        /// Also write the trace JSON here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Block-RIP constant of a stored matrix.
    Rip {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        order: usize,
        /// Enumerate every support (the default).
        #[arg(long, conflicts_with = "sample")]
        exact: bool,
        /// Lower bound from this many sampled supports.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cost cap for exact enumeration, in C(M,K)·(Kd)³ units.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
    /// Recovery thresholds for given K, δ, ε.
    Bounds {
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Smallest nonzero block norm; adds a certification verdict.
        #[arg(long)]
        min_block_norm: Option<f64>,
    },
    /// Z1 and Z2 curves over δ for several K, as CSV.
    Figure1 {
        #[arg(long = "K", value_delimiter = ',', default_value = "10,20,30,40,50")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the adversarial instance and report where BOMP first goes wrong.
    Adversarial {
        #[arg(long)]
        d: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Signal amplitude; defaults to 0.99 of the failure threshold.
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Numerically check the proof identities on random instances.
    VerifyProofs {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Monte Carlo recovery experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_norm: Option<f64>,
        #[arg(long)]
        min_block_norm: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Residual,
    Fixed,
    Both,
}

impl From<StopArg> for StopMode {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::Residual => StopMode::ResidualThreshold,
            StopArg::Fixed => StopMode::FixedIterations,
            StopArg::Both => StopMode::Both,
        }
    }
}

fn exit_code(err: &BompError) -> u8 {
    match err {
        BompError::BudgetExceeded { .. } | BompError::Infeasible(_) => 3,
        BompError::InvalidInput(_)
        | BompError::DimensionMismatch(_)
        | BompError::BlockIndexOutOfRange { .. }
        | BompError::DuplicateBlockIndex(_)
        | BompError::UnsupportedNorm(_)
        | BompError::Parse(_) => 2,
        _ => 1,
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> bomp_core::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json(value: &impl serde::Serialize) -> bomp_core::Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> bomp_core::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_run(
    matrix: &Path,
    layout: &Path,
    obs: &Path,
    epsilon: Option<f64>,
    max_iter: Option<usize>,
    stop: Option<StopArg>,
    trace_path: Option<&Path>,
) -> bomp_core::Result<()> {
    let a = load_blocked_matrix(matrix, layout)?;
    let y = read_vector_csv(obs)?;
    let cap = max_iter.unwrap_or(a.layout().num_blocks());
    let mode = match (stop, epsilon) {
        (Some(s), _) => s.into(),
        (None, Some(_)) => StopMode::ResidualThreshold,
        (None, None) => StopMode::FixedIterations,
    };
    if mode != StopMode::FixedIterations && epsilon.is_none() {
        return Err(BompError::InvalidInput(
            "this stopping mode needs --epsilon".to_string(),
        ));
    }
    let eps = epsilon.unwrap_or(0.0);
    let rule = StoppingRule::new(mode, eps, cap)?;
    let problem = SensingProblem::new(a, y, eps)?;
    let trace = run_bomp(&problem, &rule)?.to_json();
    if let Some(path) = trace_path {
        write_json(path, &trace)?;
    }
    print_json(&trace)
}

fn cmd_rip(
    matrix: &Path,
    layout: &Path,
    order: usize,
    sample: Option<usize>,
    seed: u64,
    budget: u128,
) -> bomp_core::Result<()> {
    let a = load_blocked_matrix(matrix, layout)?;
    match sample {
        Some(trials) => {
            let delta = rip_lower_bound_sampled(&a, order, trials, seed)?;
            print_json(&json!({
                "order": order,
                "delta_lower_bound": delta,
                "sampled_supports": trials,
                "seed": seed,
            }))
        }
        None => print_json(&exact_block_rip(&a, order, budget)?),
    }
}

fn cmd_bounds(
    k: usize,
    delta: f64,
    epsilon: f64,
    min_block_norm: Option<f64>,
) -> bomp_core::Result<()> {
    let inputs = BoundInputs::new(k, delta, epsilon);
    let z1 = z1_sufficient_bound(&inputs)?;
    let z2 = z2_prior_bound(&inputs)?;
    let nec = necessary_bound(&inputs)?;
    let verdict = min_block_norm.map(|b| {
        check_sufficient(&ProblemFacts {
            k,
            delta,
            epsilon,
            min_block_norm: b,
        })
    });
    print_json(&json!({
        "K": k,
        "delta": delta,
        "epsilon": epsilon,
        "delta_limit": inputs.delta_limit(),
        "z1": z1,
        "z2": z2,
        "necessary": nec,
        "gap": z1 - nec,
        "verdict": verdict,
    }))
}

fn cmd_figure1(k: &[usize], points: usize, out: Option<&Path>) -> bomp_core::Result<()> {
    let csv = curves_to_csv(&figure1_curves(k, points)?);
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => emit(&csv)?,
    }
    Ok(())
}

fn cmd_adversarial(
    d: usize,
    k: usize,
    delta: f64,
    epsilon: f64,
    t0: Option<f64>,
    out_dir: &Path,
) -> bomp_core::Result<()> {
    let params = AdversarialParams::new(d, k, delta, epsilon, t0)?;
    let inst = build_adversarial_instance(&params)?;
    let report = demonstrate_failure(&params)?;
    std::fs::create_dir_all(out_dir)?;
    save_blocked_matrix(
        inst.problem.matrix(),
        out_dir.join("A.csv"),
        out_dir.join("layout.json"),
    )?;
    write_vector_csv(out_dir.join("y.csv"), inst.problem.observation())?;
    write_vector_csv(out_dir.join("truth.csv"), inst.truth.values())?;
    write_json(&out_dir.join("report.json"), &report)?;
    print_json(&report)
}

fn cmd_experiment(
    config: &Path,
    out: Option<&Path>,
    trials: Option<usize>,
    seed: Option<u64>,
    noise_norm: Option<f64>,
    min_block_norm: Option<f64>,
) -> bomp_core::Result<()> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| BompError::InvalidInput(format!("{}: {e}", config.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| BompError::Parse(format!("{}: {e}", config.display())))?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = noise_norm {
        cfg.noise_norm = n;
    }
    if let Some(b) = min_block_norm {
        cfg.min_block_norm = b;
    }
    let result = Experiment::prepare(cfg)?.run(threads_from_env())?;
    if let Some(path) = out {
        write_json(path, &result)?;
    }
    print_json(&json!({
        "recovery_rate": result.recovery_rate,
        "avg_iterations": result.avg_iterations,
        "trials": result.records.len(),
        "errors": result.errors,
    }))
}

fn dispatch(cli: Cli) -> bomp_core::Result<()> {
    match cli.command {
        Command::Run {
            matrix,
            layout,
            obs,
            epsilon,
            max_iter,
            stop,
            trace,
        } => cmd_run(
            &matrix,
            &layout,
            &obs,
            epsilon,
            max_iter,
            stop,
            trace.as_deref(),
        ),
        Command::Rip {
            matrix,
            layout,
            order,
            exact: _,
            sample,
            seed,
            budget,
        } => cmd_rip(&matrix, &layout, order, sample, seed, budget),
        Command::Bounds {
            k,
            delta,
            epsilon,
            min_block_norm,
        } => cmd_bounds(k, delta, epsilon, min_block_norm),
        Command::Figure1 { k, points, out } => cmd_figure1(&k, points, out.as_deref()),
        Command::Adversarial {
            d,
            k,
            delta,
            epsilon,
            t0,
            out_dir,
        } => cmd_adversarial(d, k, delta, epsilon, t0, &out_dir),
        Command::VerifyProofs { trials, seed } => {
            let summary = verify_proofs(trials, seed, &SamplerLimits::default());
            print_json(&json!({ "all_passed": summary.all_passed(), "summary": summary }))
        }
        Command::Experiment {
            config,
            out,
            trials,
            seed,
            noise_norm,
            min_block_norm,
        } => cmd_experiment(
            &config,
            out.as_deref(),
            trials,
            seed,
            noise_norm,
            min_block_norm,
        ),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
