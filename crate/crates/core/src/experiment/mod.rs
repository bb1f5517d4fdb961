//! Configuration-driven experiments: scenario generation, Monte Carlo
//! campaigns and their reports.

pub mod campaign;
pub mod config;
pub mod report;

pub use campaign::{
    child_rng, child_seed, load_terrain, run_monte_carlo, run_single, scenario_for_run, splitmix64, Campaign,
    CampaignError, RunRecord, RunStatus, RunTrace,
};
pub use config::{ConfigError, ExperimentConfig, RunMode, ScenarioMode, TerrainSource};
pub use report::{emit_campaign, emit_reports, read_records, read_summary, records_csv, Stats, Summary};
