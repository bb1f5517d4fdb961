//! Seeded Monte Carlo campaigns.
//!
//! Every random stream is a ChaCha8 generator seeded with
//! `child_seed(master_seed, run, stream)`, so a run's outcome depends only
//! on the configuration, the master seed and its index. Runs execute in
//! parallel and are joined in index order.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{ExperimentConfig, RunMode, ScenarioMode, TerrainSource};
use crate::evaluation::RouteMetrics;
use crate::exec::map_range;
use crate::mission::{run_mission, MissionError};
use crate::network::{sample_static_waypoints, NetworkError, OperationNetwork};
use crate::planning::{Algorithm, PlanError, PlanningProblem};
use crate::terrain::{kmeans_cluster, GrayGrid, TerrainError, TerrainGrid};

/// Stream tags mixed into child seeds.
pub mod stream {
    /// Waypoint placement, topology and tasks.
    pub const SCENARIO: u64 = 1;
    /// Drift realization (initial drift and arrivals during a mission).
    pub const DRIFT: u64 = 2;
    /// Drift at arrival events during a mission.
    pub const MISSION_DRIFT: u64 = 3;
    /// Optimizer streams are `OPTIMIZER + algorithm index`.
    pub const OPTIMIZER: u64 = 16;
    /// Run index used for the campaign-wide layout in fixed-scenario mode.
    pub const FIXED_LAYOUT_RUN: u64 = u64::MAX;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ run) ^ stream)`.
pub fn child_seed(master_seed: u64, run: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ run) ^ stream)
}

pub fn child_rng(master_seed: u64, run: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master_seed, run, stream))
}

pub fn algorithm_stream(algorithm: Algorithm) -> u64 {
    stream::OPTIMIZER
        + match algorithm {
            Algorithm::Pso => 0,
            Algorithm::Bbo => 1,
        }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Mission(#[from] MissionError),
}

/// Loads or synthesizes the grayscale map and binarizes it; files with an
/// `OCC` header are taken as already binarized.
pub fn load_terrain(cfg: &ExperimentConfig) -> Result<TerrainGrid, TerrainError> {
    let s = &cfg.scenario;
    let gray = match &s.terrain {
        TerrainSource::Synthetic { width, height, seed } => GrayGrid::synthetic_coastline(*width, *height, *seed),
        TerrainSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| TerrainError::Io { path: path.display().to_string(), source })?;
            if text.trim_start().starts_with("OCC") {
                return TerrainGrid::parse(&text);
            }
            GrayGrid::parse(&text)?
        }
    };
    kmeans_cluster(&gray, s.clusters, s.kmeans_iterations, cfg.master_seed, s.cell_size_m)
}

/// Base layout: waypoints on valid cells, start `0`, goal `n - 1`, a
/// random share of the interior waypoints dynamic, k-NN topology and tasks.
pub fn generate_layout(
    cfg: &ExperimentConfig,
    terrain: &TerrainGrid,
    rng: &mut ChaCha8Rng,
) -> Result<OperationNetwork, NetworkError> {
    let s = &cfg.scenario;
    let n = s.waypoints;
    let waypoints = sample_static_waypoints(n, terrain, s.extent, rng)?;
    let mut net = OperationNetwork::with_knn_topology(waypoints, s.k_neighbors, s.task_ranges, 0, n - 1, s.speed, rng)?;
    let interior = n.saturating_sub(2);
    let count = ((s.dynamic_fraction * interior as f64).round() as usize).min(interior);
    let mut ids: Vec<usize> = sample(rng, interior, count).into_iter().map(|i| i + 1).collect();
    ids.sort_unstable();
    net.make_dynamic(&ids, s.sigma, s.confidence)?;
    Ok(net)
}

/// The network a run plans over: layout for the run (fresh or shared),
/// one drift realization, and the topology rebuilt on drifted positions.
pub fn scenario_for_run(
    cfg: &ExperimentConfig,
    terrain: &TerrainGrid,
    run: usize,
) -> Result<OperationNetwork, NetworkError> {
    let layout_run = match cfg.scenario.mode {
        ScenarioMode::Regenerate => run as u64,
        ScenarioMode::Fixed => stream::FIXED_LAYOUT_RUN,
    };
    let mut net = generate_layout(cfg, terrain, &mut child_rng(cfg.master_seed, layout_run, stream::SCENARIO))?;
    let mut drift = child_rng(cfg.master_seed, run as u64, stream::DRIFT);
    net.perturb_dynamic(terrain, &mut drift);
    net.rebuild_adjacency(&mut drift)?;
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Failed,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        })
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(RunStatus::Ok),
            "failed" => Ok(RunStatus::Failed),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// One optimizer's result on one run. Real-valued fields are rounded to
/// six decimals so the record survives its CSV form unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub optimizer: Algorithm,
    pub status: RunStatus,
    pub metrics: RouteMetrics,
    pub wall_clock_s: f64,
    pub replans: usize,
}

pub fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

impl RunRecord {
    pub fn new(run: usize, optimizer: Algorithm, metrics: RouteMetrics, wall_clock_s: f64, replans: usize) -> Self {
        let metrics = RouteMetrics {
            cost: quantize(metrics.cost),
            weight: quantize(metrics.weight),
            travel_time: quantize(metrics.travel_time),
            distance: quantize(metrics.distance),
            violation: quantize(metrics.violation),
            ..metrics
        };
        Self { run, optimizer, status: RunStatus::Ok, metrics, wall_clock_s: quantize(wall_clock_s), replans }
    }

    pub fn failed(run: usize, optimizer: Algorithm) -> Self {
        Self {
            run,
            optimizer,
            status: RunStatus::Failed,
            metrics: RouteMetrics::default(),
            wall_clock_s: 0.0,
            replans: 0,
        }
    }
}

/// Per-run detail kept alongside the records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub run: usize,
    pub optimizer: Algorithm,
    /// Best cost after each iteration (plan mode; the initial plan in
    /// mission mode is not traced).
    pub history: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub records: Vec<RunRecord>,
    pub traces: Vec<RunTrace>,
}

impl Campaign {
    /// Histories of the last run, per optimizer, for plotting.
    pub fn last_histories(&self) -> Vec<(Algorithm, &[f64])> {
        let Some(last) = self.traces.iter().map(|t| t.run).max() else { return Vec::new() };
        self.traces
            .iter()
            .filter(|t| t.run == last && !t.history.is_empty())
            .map(|t| (t.optimizer, t.history.as_slice()))
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunTrace> {
        self.traces.iter().filter(|t| t.error.is_some())
    }
}

fn execute(cfg: &ExperimentConfig, terrain: &TerrainGrid, run: usize, algorithm: Algorithm, net: &OperationNetwork) -> Result<(RunRecord, Vec<f64>), CampaignError> {
    let mut rng = child_rng(cfg.master_seed, run as u64, algorithm_stream(algorithm));
    match cfg.mode {
        RunMode::Plan => {
            let problem = PlanningProblem::new(net, cfg.cost)?;
            let outcome = cfg.optimizer(algorithm).optimize(&problem, &mut rng, &[])?;
            Ok((RunRecord::new(run, algorithm, outcome.metrics, outcome.wall_clock_s, 0), outcome.history))
        }
        RunMode::Mission => {
            // Both optimizers face the same arrival-time drift stream.
            let mut drift = child_rng(cfg.master_seed, run as u64, stream::MISSION_DRIFT);
            let log = run_mission(net, terrain, &cfg.mission_config(algorithm), &mut rng, &mut drift)?;
            Ok((RunRecord::new(run, algorithm, log.metrics, log.optimizer_wall_clock_s, log.replan_count()), Vec::new()))
        }
    }
}

/// Runs one index: builds its scenario once, then every selected optimizer
/// on it. Failures become `failed` records.
pub fn run_single(cfg: &ExperimentConfig, terrain: &TerrainGrid, run: usize) -> Vec<(RunRecord, RunTrace)> {
    let scenario = scenario_for_run(cfg, terrain, run);
    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let result = match &scenario {
                Ok(net) => execute(cfg, terrain, run, algorithm, net).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            match result {
                Ok((record, history)) => (record, RunTrace { run, optimizer: algorithm, history, error: None }),
                Err(e) => (
                    RunRecord::failed(run, algorithm),
                    RunTrace { run, optimizer: algorithm, history: Vec::new(), error: Some(e) },
                ),
            }
        })
        .collect()
}

pub fn run_monte_carlo(cfg: &ExperimentConfig, terrain: &TerrainGrid) -> Campaign {
    let per_run = map_range(cfg.execution, cfg.runs, |run| run_single(cfg, terrain, run));
    let (records, traces) = per_run.into_iter().flatten().unzip();
    Campaign { records, traces }
}
