use bomp_core::experiment::{generate_instance, ExperimentConfig, MatrixEnsemble};
use bomp_core::{run_bomp, StoppingRule};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn config(m: usize, num_blocks: usize, d: usize, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        m,
        num_blocks,
        d,
        k,
        noise_norm: 0.05,
        min_block_norm: 1.0,
        trials: 1,
        seed: 7,
        matrix_ensemble: MatrixEnsemble::Gaussian,
        stopping: None,
    }
}

fn bench_run_bomp(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_bomp");
    for &(m, num_blocks, d, k) in &[(64, 32, 2, 4), (128, 64, 4, 8), (256, 128, 4, 16)] {
        let inst = generate_instance(&config(m, num_blocks, d, k), 0).unwrap();
        let rule = StoppingRule::fixed_iterations(k).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("m{m}_M{num_blocks}_d{d}_K{k}")),
            &inst.problem,
            |b, problem| b.iter(|| run_bomp(problem, &rule).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_run_bomp);
criterion_main!(benches);
