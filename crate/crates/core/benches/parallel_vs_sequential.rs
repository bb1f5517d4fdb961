//! Sequential versus rayon-parallel execution of the hot paths: batch cost
//! evaluation, one full optimization, and a small Monte Carlo campaign.
//! Without the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskroute::codec::PriorityVector;
use taskroute::evaluation::CostConfig;
use taskroute::exec::{map_slice, Execution};
use taskroute::experiment::{load_terrain, run_monte_carlo, scenario_for_run, ExperimentConfig};
use taskroute::planning::{Algorithm, PlanningProblem};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        cost: CostConfig { phi1: 0.95, phi2: 0.05, ..CostConfig::default() },
        ..ExperimentConfig::default()
    }
}

fn batch_evaluation(c: &mut Criterion) {
    let cfg = base_config();
    let terrain = load_terrain(&cfg).expect("terrain");
    let net = scenario_for_run(&cfg, &terrain, 0).expect("scenario");
    let problem = PlanningProblem::new(&net, cfg.cost).expect("problem");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let population: Vec<PriorityVector> = (0..150).map(|_| PriorityVector::random(net.len(), &mut rng)).collect();

    let mut group = c.benchmark_group("evaluate_150_vectors");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map_slice(exec, black_box(&population), |pv| problem.cost(pv)))
        });
    }
    group.finish();
}

fn single_optimization(c: &mut Criterion) {
    let mut cfg = base_config();
    cfg.pso.particles = 60;
    cfg.pso.iterations = 30;
    cfg.bbo.habitats = 40;
    cfg.bbo.iterations = 30;
    let terrain = load_terrain(&cfg).expect("terrain");
    let net = scenario_for_run(&cfg, &terrain, 0).expect("scenario");
    let problem = PlanningProblem::new(&net, cfg.cost).expect("problem");

    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    for algorithm in [Algorithm::Pso, Algorithm::Bbo] {
        for (name, exec) in MODES {
            cfg.execution = exec;
            let optimizer = cfg.optimizer(algorithm);
            group.bench_function(BenchmarkId::new(algorithm.to_string(), name), |b| {
                b.iter(|| {
                    let mut rng = ChaCha8Rng::seed_from_u64(2);
                    optimizer.optimize(&problem, &mut rng, &[]).expect("optimizes").metrics.cost
                })
            });
        }
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut cfg = base_config();
    cfg.runs = 8;
    cfg.scenario.waypoints = 15;
    cfg.pso.particles = 30;
    cfg.pso.iterations = 20;
    cfg.bbo.habitats = 20;
    cfg.bbo.iterations = 20;
    let terrain = load_terrain(&cfg).expect("terrain");

    let mut group = c.benchmark_group("monte_carlo_8_runs");
    group.sample_size(10);
    for (name, exec) in MODES {
        cfg.execution = exec;
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_monte_carlo(black_box(&cfg), &terrain).records.len())
        });
    }
    group.finish();
}

criterion_group!(benches, batch_evaluation, single_optimization, monte_carlo);
criterion_main!(benches);
