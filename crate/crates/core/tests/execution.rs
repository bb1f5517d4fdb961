//! Parallel and sequential execution must produce the same results.

use taskroute::evaluation::CostConfig;
use taskroute::exec::Execution;
use taskroute::experiment::{load_terrain, run_monte_carlo, ExperimentConfig, RunMode};

fn small(mode: RunMode, execution: Execution) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        cost: CostConfig { phi1: 0.95, phi2: 0.05, t_available: 12_000.0, ..CostConfig::default() },
        runs: 6,
        mode,
        execution,
        ..ExperimentConfig::default()
    };
    cfg.scenario.waypoints = 10;
    cfg.pso.particles = 16;
    cfg.pso.iterations = 12;
    cfg.bbo.habitats = 16;
    cfg.bbo.kept_habitats = 4;
    cfg.bbo.iterations = 12;
    cfg
}

#[test]
fn campaigns_match_across_execution_modes() {
    for mode in [RunMode::Plan, RunMode::Mission] {
        let seq = small(mode, Execution::Sequential);
        let terrain = load_terrain(&seq).unwrap();
        let a = run_monte_carlo(&seq, &terrain);
        let b = run_monte_carlo(&small(mode, Execution::Parallel), &terrain);
        assert_eq!(a.records.len(), 12);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.run, x.optimizer, x.status, x.metrics, x.replans), (y.run, y.optimizer, y.status, y.metrics, y.replans));
        }
        for (x, y) in a.traces.iter().zip(&b.traces) {
            assert_eq!(x.history, y.history);
        }
    }
}
