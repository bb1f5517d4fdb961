//! Command-line front end. Exit codes: 0 success, 1 usage or
//! configuration error, 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::evaluation::RouteMetrics;
use crate::experiment::campaign::{algorithm_stream, stream};
use crate::experiment::report::ReportError;
use crate::experiment::{
    child_rng, emit_campaign, load_terrain, records_csv, run_monte_carlo, scenario_for_run, ConfigError,
    ExperimentConfig, RunRecord,
};
use crate::mission::{describe_route, run_mission};
use crate::planning::{history_csv, Algorithm, PlanningProblem};
use crate::terrain::{kmeans_cluster, GrayGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "taskroute", version, about = "Time-budgeted task routing over a drifting waypoint network")]
pub struct Cli {
    /// Overrides the configuration's master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Binarize a GG grayscale map into an OCC occupancy grid.
    ClusterMap {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[arg(long, default_value_t = 50.0)]
        cell_size: f64,
    },
    /// Generate the run-0 scenario network and save it as JSON.
    GenNetwork { config: PathBuf, output: PathBuf },
    /// Optimize one route on the run-0 scenario and print its metrics.
    Plan {
        config: PathBuf,
        /// Also write records.csv and history CSVs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fly one mission with replanning on the run-0 scenario.
    Simulate {
        config: PathBuf,
        /// Optimizer to fly with (defaults to the first configured one).
        #[arg(long)]
        optimizer: Option<Algorithm>,
        /// Directory for mission.log, mission_metrics.csv and records.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured Monte Carlo campaign.
    Montecarlo {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn print_metrics(label: &str, route: &str, m: &RouteMetrics, wall_clock_s: f64) {
    println!("{label}: {route}");
    println!("  {},wall_clock_s", RouteMetrics::CSV_HEADER);
    println!("  {},{wall_clock_s:.6}", m.to_csv_row());
}

fn cluster_map(input: &Path, output: &Path, clusters: usize, iterations: usize, cell: f64, seed: u64) -> Result<(), Failure> {
    let gray = GrayGrid::load(input).map_err(|e| Failure::Config(e.to_string()))?;
    let grid = kmeans_cluster(&gray, clusters, iterations, seed, cell).map_err(runtime)?;
    write(output, &grid.to_text())?;
    println!(
        "{}: {} of {} cells valid",
        output.display(),
        grid.valid_count(),
        grid.width() * grid.height()
    );
    Ok(())
}

fn gen_network(cfg: &ExperimentConfig, output: &Path) -> Result<(), Failure> {
    let terrain = load_terrain(cfg).map_err(runtime)?;
    let net = scenario_for_run(cfg, &terrain, 0).map_err(runtime)?;
    net.save(output).map_err(runtime)?;
    println!("{}: {} waypoints, {} edges", output.display(), net.len(), net.edges().len());
    Ok(())
}

fn plan(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), Failure> {
    let terrain = load_terrain(cfg).map_err(runtime)?;
    let net = scenario_for_run(cfg, &terrain, 0).map_err(runtime)?;
    let problem = PlanningProblem::new(&net, cfg.cost).map_err(runtime)?;
    let mut records = Vec::new();
    let mut histories = Vec::new();
    for &algorithm in &cfg.algorithms {
        let mut rng = child_rng(cfg.master_seed, 0, algorithm_stream(algorithm));
        let outcome = cfg.optimizer(algorithm).optimize(&problem, &mut rng, &[]).map_err(runtime)?;
        print_metrics(&algorithm.to_string(), &describe_route(&outcome.route), &outcome.metrics, outcome.wall_clock_s);
        records.push(RunRecord::new(0, algorithm, outcome.metrics, outcome.wall_clock_s, 0));
        histories.push((algorithm, outcome.history));
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("records.csv"), &records_csv(&records))?;
        for (algorithm, history) in &histories {
            write(&dir.join(format!("history_{algorithm}.csv")), &history_csv(history))?;
        }
    }
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, optimizer: Option<Algorithm>, out: Option<&Path>) -> Result<(), Failure> {
    let algorithm = optimizer.unwrap_or(cfg.algorithms[0]);
    let terrain = load_terrain(cfg).map_err(runtime)?;
    let net = scenario_for_run(cfg, &terrain, 0).map_err(runtime)?;
    let mut rng = child_rng(cfg.master_seed, 0, algorithm_stream(algorithm));
    let mut drift = child_rng(cfg.master_seed, 0, stream::MISSION_DRIFT);
    let log = run_mission(&net, &terrain, &cfg.mission_config(algorithm), &mut rng, &mut drift).map_err(runtime)?;
    let text = log.to_text();
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write(&dir.join("mission.log"), &text)?;
            write(&dir.join("mission_metrics.csv"), &log.metrics_csv())?;
            let record = RunRecord::new(0, algorithm, log.metrics, log.optimizer_wall_clock_s, log.replan_count());
            write(&dir.join("records.csv"), &records_csv(&[record]))?;
        }
        None => print!("{text}"),
    }
    let flown: Vec<String> = log.flown_nodes().iter().map(usize::to_string).collect();
    println!("{algorithm} mission {}: {} replans", log.outcome, log.replan_count());
    print_metrics("flown", &flown.join("-"), &log.metrics, log.optimizer_wall_clock_s);
    Ok(())
}

fn montecarlo(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let terrain = load_terrain(cfg).map_err(runtime)?;
    let campaign = run_monte_carlo(cfg, &terrain);
    for f in campaign.failures() {
        eprintln!("run {} {}: {}", f.run, f.optimizer, f.error.as_deref().unwrap_or(""));
    }
    let summary = emit_campaign(&campaign, cfg.cost.t_available, out)?;
    println!("{} records written to {}", campaign.records.len(), out.display());
    for (tag, s) in &summary.optimizers {
        let cost = s.metrics.get("cost").map_or(f64::NAN, |c| c.mean);
        println!(
            "{tag}: runs={} feasible_rate={:.6} mean_violation_s={:.6} mean_cost={cost:.6}",
            s.runs, s.feasibility_rate, s.mean_violation_s
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ClusterMap { input, output, clusters, iterations, cell_size } => {
            cluster_map(&input, &output, clusters, iterations, cell_size, cli.seed.unwrap_or(1))
        }
        Command::GenNetwork { config, output } => gen_network(&load_config(&config, cli.seed)?, &output),
        Command::Plan { config, out } => plan(&load_config(&config, cli.seed)?, out.as_deref()),
        Command::Simulate { config, optimizer, out } => {
            simulate(&load_config(&config, cli.seed)?, optimizer, out.as_deref())
        }
        Command::Montecarlo { config, out } => montecarlo(&load_config(&config, cli.seed)?, &out),
    }
}

/// Parses `argv` (program name first) and runs the selected subcommand.
pub fn cli_main<S: AsRef<str>>(argv: &[S]) -> i32 {
    let cli = match Cli::try_parse_from(argv.iter().map(|s| s.as_ref())) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}
