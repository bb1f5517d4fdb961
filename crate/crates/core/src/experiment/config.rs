//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers. Every key is optional; unknown sections or keys are
//! rejected so typos surface immediately.
//!
//! ```text
//! [scenario]
//! terrain = synthetic          # or a path to a GG grayscale / OCC occupancy file
//! synthetic_width = 100
//! synthetic_height = 200
//! synthetic_seed = 7
//! clusters = 2
//! kmeans_iterations = 100
//! cell_size_m = 50
//! waypoints = 40
//! dynamic_fraction = 0.25
//! sigma_x = 50
//! sigma_y = 50
//! sigma_z = 10
//! confidence = 0.98
//! k_neighbors = 5
//! priority_min = 1
//! priority_max = 10
//! risk_min = 5
//! risk_max = 100
//! duration_min = 60
//! duration_max = 600
//! speed = 1.5
//! extent_x = 5000
//! extent_y = 10000
//! extent_z = 1000
//! mode = regenerate            # or fixed
//!
//! [cost]
//! phi1 = 0.5
//! phi2 = 0.5
//! t_available = 31000
//! infeasible_penalty = 1000000
//!
//! [optimizer]
//! algorithms = pso,bbo
//! execution = parallel         # or sequential
//!
//! [pso]
//! particles = 150
//! iterations = 150
//! c1 = 2.0
//! c2 = 2.5
//! inertia_start = 1.4
//! inertia_end = 0.5
//! v_max = 60
//!
//! [bbo]
//! habitats = 50
//! kept_habitats = 10
//! iterations = 150
//! max_mutation = 0.1
//! max_immigration = 1
//! max_emigration = 1
//!
//! [mission]
//! drift_threshold_fraction = 0.1   # or drift_threshold_m = 25
//! replan_on_adjacency_change = true
//! drift_on_visit = true
//! check_only_at_dynamic = false
//!
//! [experiment]
//! runs = 200
//! master_seed = 20240501
//! mode = plan                  # or mission
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::bbo::BboConfig;
use crate::evaluation::CostConfig;
use crate::exec::Execution;
use crate::mission::{DriftThreshold, MissionConfig};
use crate::network::{Position3, TaskRanges};
use crate::planning::{Algorithm, OptimizerConfig};
use crate::pso::PsoConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("{path}: unknown section [{section}]")]
    UnknownSection { path: String, section: String },
    #[error("{path}: unknown key `{key}` in [{section}]")]
    UnknownKey { path: String, section: String, key: String },
    #[error("{path}: [{section}] {key} = {value:?}: {reason}")]
    BadValue { path: String, section: String, key: String, value: String, reason: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: referenced file {file} does not exist")]
    MissingFile { path: String, file: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerrainSource {
    Synthetic { width: usize, height: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    /// Fresh waypoints, topology, tasks and drift every run.
    Regenerate,
    /// One layout for the whole campaign; only the drift is redrawn.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// One optimization per run on the drifted network.
    Plan,
    /// A full mission with drift at arrivals and replanning.
    Mission,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Plan => "plan",
            RunMode::Mission => "mission",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub terrain: TerrainSource,
    pub clusters: usize,
    pub kmeans_iterations: usize,
    pub cell_size_m: f64,
    pub waypoints: usize,
    pub dynamic_fraction: f64,
    pub sigma: Position3,
    pub confidence: f64,
    pub k_neighbors: usize,
    pub task_ranges: TaskRanges,
    pub speed: f64,
    pub extent: Position3,
    pub mode: ScenarioMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            terrain: TerrainSource::Synthetic { width: 100, height: 200, seed: 7 },
            clusters: 2,
            kmeans_iterations: 100,
            cell_size_m: 50.0,
            waypoints: 40,
            dynamic_fraction: 0.25,
            sigma: Position3::new(50.0, 50.0, 10.0),
            confidence: 0.98,
            k_neighbors: 5,
            task_ranges: TaskRanges::default(),
            speed: 1.5,
            extent: Position3::new(5000.0, 10000.0, 1000.0),
            mode: ScenarioMode::Regenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionSettings {
    pub drift_threshold: DriftThreshold,
    pub replan_on_adjacency_change: bool,
    pub drift_on_visit: bool,
    pub check_only_at_dynamic: bool,
}

impl Default for MissionSettings {
    fn default() -> Self {
        Self {
            drift_threshold: DriftThreshold::default(),
            replan_on_adjacency_change: true,
            drift_on_visit: true,
            check_only_at_dynamic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub cost: CostConfig,
    pub algorithms: Vec<Algorithm>,
    pub execution: Execution,
    pub pso: PsoConfig,
    pub bbo: BboConfig,
    pub mission: MissionSettings,
    pub runs: usize,
    pub master_seed: u64,
    pub mode: RunMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            cost: CostConfig::default(),
            algorithms: vec![Algorithm::Pso, Algorithm::Bbo],
            execution: Execution::default(),
            pso: PsoConfig::default(),
            bbo: BboConfig::default(),
            mission: MissionSettings::default(),
            runs: 200,
            master_seed: 1,
            mode: RunMode::Plan,
        }
    }
}

impl ExperimentConfig {
    pub fn optimizer(&self, algorithm: Algorithm) -> OptimizerConfig {
        match algorithm {
            Algorithm::Pso => OptimizerConfig::Pso(PsoConfig { execution: self.execution, ..self.pso.clone() }),
            Algorithm::Bbo => OptimizerConfig::Bbo(BboConfig { execution: self.execution, ..self.bbo.clone() }),
        }
    }

    pub fn mission_config(&self, algorithm: Algorithm) -> MissionConfig {
        MissionConfig {
            optimizer: self.optimizer(algorithm),
            cost: self.cost,
            drift_threshold: self.mission.drift_threshold,
            replan_on_adjacency_change: self.mission.replan_on_adjacency_change,
            drift_on_visit: self.mission.drift_on_visit,
            check_only_at_dynamic: self.mission.check_only_at_dynamic,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::parse_named(&text, &path.display().to_string())?;
        if let TerrainSource::File(file) = &cfg.scenario.terrain {
            let resolved = if file.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(file)
            } else {
                file.clone()
            };
            if !resolved.is_file() {
                return Err(ConfigError::MissingFile {
                    path: path.display().to_string(),
                    file: resolved.display().to_string(),
                });
            }
            cfg.scenario.terrain = TerrainSource::File(resolved);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_named(text, "<config>")
    }

    fn parse_named(text: &str, name: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text)
            .map_err(|e| ConfigError::Syntax { path: name.to_string(), message: e.to_string() })?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                let value = strip_comment(value);
                let field = Field { path: name, section, key, value };
                cfg.apply(&field)?;
            }
        }
        cfg.validate(name)?;
        Ok(cfg)
    }

    fn apply(&mut self, f: &Field<'_>) -> Result<(), ConfigError> {
        let s = &mut self.scenario;
        match (f.section, f.key) {
            ("scenario", "terrain") => {
                s.terrain = if f.value == "synthetic" {
                    match s.terrain {
                        TerrainSource::Synthetic { .. } => s.terrain.clone(),
                        TerrainSource::File(_) => ScenarioConfig::default().terrain,
                    }
                } else {
                    TerrainSource::File(PathBuf::from(f.value))
                }
            }
            ("scenario", "synthetic_width" | "synthetic_height" | "synthetic_seed") => {
                let (mut width, mut height, mut seed) = match s.terrain {
                    TerrainSource::Synthetic { width, height, seed } => (width, height, seed),
                    TerrainSource::File(_) => {
                        return Err(f.bad("synthetic_* keys need terrain = synthetic (set it first)"));
                    }
                };
                match f.key {
                    "synthetic_width" => width = f.parse()?,
                    "synthetic_height" => height = f.parse()?,
                    _ => seed = f.parse()?,
                }
                s.terrain = TerrainSource::Synthetic { width, height, seed };
            }
            ("scenario", "clusters") => s.clusters = f.parse()?,
            ("scenario", "kmeans_iterations") => s.kmeans_iterations = f.parse()?,
            ("scenario", "cell_size_m") => s.cell_size_m = f.parse()?,
            ("scenario", "waypoints") => s.waypoints = f.parse()?,
            ("scenario", "dynamic_fraction") => s.dynamic_fraction = f.parse()?,
            ("scenario", "sigma_x") => s.sigma.x = f.parse()?,
            ("scenario", "sigma_y") => s.sigma.y = f.parse()?,
            ("scenario", "sigma_z") => s.sigma.z = f.parse()?,
            ("scenario", "confidence") => s.confidence = f.parse()?,
            ("scenario", "k_neighbors") => s.k_neighbors = f.parse()?,
            ("scenario", "priority_min") => s.task_ranges.priority.0 = f.parse()?,
            ("scenario", "priority_max") => s.task_ranges.priority.1 = f.parse()?,
            ("scenario", "risk_min") => s.task_ranges.risk.0 = f.parse()?,
            ("scenario", "risk_max") => s.task_ranges.risk.1 = f.parse()?,
            ("scenario", "duration_min") => s.task_ranges.duration.0 = f.parse()?,
            ("scenario", "duration_max") => s.task_ranges.duration.1 = f.parse()?,
            ("scenario", "speed") => s.speed = f.parse()?,
            ("scenario", "extent_x") => s.extent.x = f.parse()?,
            ("scenario", "extent_y") => s.extent.y = f.parse()?,
            ("scenario", "extent_z") => s.extent.z = f.parse()?,
            ("scenario", "mode") => {
                s.mode = match f.value {
                    "regenerate" => ScenarioMode::Regenerate,
                    "fixed" => ScenarioMode::Fixed,
                    _ => return Err(f.bad("expected regenerate or fixed")),
                }
            }
            ("cost", "phi1") => self.cost.phi1 = f.parse()?,
            ("cost", "phi2") => self.cost.phi2 = f.parse()?,
            ("cost", "t_available") => self.cost.t_available = f.parse()?,
            ("cost", "infeasible_penalty") => self.cost.infeasible_penalty = f.parse()?,
            ("optimizer", "algorithms") => {
                let mut algorithms = Vec::new();
                for tag in f.value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    let a: Algorithm = tag.parse().map_err(|_| f.bad("expected a list of pso, bbo"))?;
                    if !algorithms.contains(&a) {
                        algorithms.push(a);
                    }
                }
                self.algorithms = algorithms;
            }
            ("optimizer", "execution") => self.execution = f.parse()?,
            ("pso", "particles") => self.pso.particles = f.parse()?,
            ("pso", "iterations") => self.pso.iterations = f.parse()?,
            ("pso", "c1") => self.pso.c1 = f.parse()?,
            ("pso", "c2") => self.pso.c2 = f.parse()?,
            ("pso", "inertia_start") => self.pso.inertia_start = f.parse()?,
            ("pso", "inertia_end") => self.pso.inertia_end = f.parse()?,
            ("pso", "v_max") => self.pso.v_max = f.parse()?,
            ("bbo", "habitats") => self.bbo.habitats = f.parse()?,
            ("bbo", "kept_habitats") => self.bbo.kept_habitats = f.parse()?,
            ("bbo", "iterations") => self.bbo.iterations = f.parse()?,
            ("bbo", "max_mutation") => self.bbo.max_mutation = f.parse()?,
            ("bbo", "max_immigration") => self.bbo.max_immigration = f.parse()?,
            ("bbo", "max_emigration") => self.bbo.max_emigration = f.parse()?,
            ("bbo", "s_max") => self.bbo.s_max = Some(f.parse()?),
            ("mission", "drift_threshold_m") => self.mission.drift_threshold = DriftThreshold::Absolute(f.parse()?),
            ("mission", "drift_threshold_fraction") => {
                self.mission.drift_threshold = DriftThreshold::BoundFraction(f.parse()?)
            }
            ("mission", "replan_on_adjacency_change") => self.mission.replan_on_adjacency_change = f.parse()?,
            ("mission", "drift_on_visit") => self.mission.drift_on_visit = f.parse()?,
            ("mission", "check_only_at_dynamic") => self.mission.check_only_at_dynamic = f.parse()?,
            ("experiment", "runs") => self.runs = f.parse()?,
            ("experiment", "master_seed") => self.master_seed = f.parse()?,
            ("experiment", "mode") => {
                self.mode = match f.value {
                    "plan" => RunMode::Plan,
                    "mission" => RunMode::Mission,
                    _ => return Err(f.bad("expected plan or mission")),
                }
            }
            (section @ ("scenario" | "cost" | "optimizer" | "pso" | "bbo" | "mission" | "experiment"), key) => {
                return Err(ConfigError::UnknownKey { path: f.path.to_string(), section: section.to_string(), key: key.to_string() });
            }
            (section, _) => {
                return Err(ConfigError::UnknownSection { path: f.path.to_string(), section: section.to_string() });
            }
        }
        Ok(())
    }

    fn validate(&self, name: &str) -> Result<(), ConfigError> {
        let invalid = |message: String| ConfigError::Invalid { path: name.to_string(), message };
        let s = &self.scenario;
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("no optimizer selected".into()));
        }
        if s.waypoints < 2 {
            return Err(invalid("need at least two waypoints".into()));
        }
        if !(0.0..=1.0).contains(&s.dynamic_fraction) {
            return Err(invalid(format!("dynamic_fraction {} not in [0, 1]", s.dynamic_fraction)));
        }
        if !(s.confidence > 0.0 && s.confidence < 1.0) {
            return Err(invalid(format!("confidence {} not in (0, 1)", s.confidence)));
        }
        if s.k_neighbors == 0 || s.clusters < 2 || s.kmeans_iterations == 0 {
            return Err(invalid("k_neighbors >= 1, clusters >= 2 and kmeans_iterations >= 1 required".into()));
        }
        if !(s.speed > 0.0 && s.cell_size_m > 0.0) {
            return Err(invalid("speed and cell_size_m must be positive".into()));
        }
        if !(s.sigma.is_finite() && s.sigma.x >= 0.0 && s.sigma.y >= 0.0 && s.sigma.z >= 0.0) {
            return Err(invalid("sigma must be non-negative".into()));
        }
        if !(s.extent.is_finite() && s.extent.x > 0.0 && s.extent.y > 0.0 && s.extent.z >= 0.0) {
            return Err(invalid("extent_x and extent_y must be positive, extent_z non-negative".into()));
        }
        if let TerrainSource::Synthetic { width, height, .. } = s.terrain {
            if width == 0 || height == 0 {
                return Err(invalid("synthetic terrain needs positive dimensions".into()));
            }
        }
        s.task_ranges.validate().map_err(|e| invalid(e.to_string()))?;
        self.cost.validate().map_err(|e| invalid(e.to_string()))?;
        self.pso.validate().map_err(|e| invalid(e.to_string()))?;
        self.bbo.validate().map_err(|e| invalid(e.to_string()))?;
        self.mission_config(self.algorithms[0]).validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}

/// Drops a trailing `# comment` from a value.
fn strip_comment(value: &str) -> &str {
    value.split_once(" #").map_or(value, |(v, _)| v).trim()
}

struct Field<'a> {
    path: &'a str,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

impl Field<'_> {
    fn bad(&self, reason: &str) -> ConfigError {
        ConfigError::BadValue {
            path: self.path.to_string(),
            section: self.section.to_string(),
            key: self.key.to_string(),
            value: self.value.to_string(),
            reason: reason.to_string(),
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value.parse().map_err(|e: T::Err| self.bad(&e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sections_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# campaign\n[scenario]\nwaypoints = 8\nk_neighbors = 3 # sparse\nmode = fixed\n\n[cost]\nt_available = 15000\n\
             [optimizer]\nalgorithms = bbo, pso\nexecution = sequential\n[mission]\ndrift_threshold_m = 12.5\n\
             [experiment]\nruns = 5\nmaster_seed = 42\nmode = mission\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.waypoints, 8);
        assert_eq!(cfg.scenario.k_neighbors, 3);
        assert_eq!(cfg.scenario.mode, ScenarioMode::Fixed);
        assert_eq!(cfg.cost.t_available, 15000.0);
        assert_eq!(cfg.algorithms, vec![Algorithm::Bbo, Algorithm::Pso]);
        assert_eq!(cfg.execution, Execution::Sequential);
        assert_eq!(cfg.mission.drift_threshold, DriftThreshold::Absolute(12.5));
        assert_eq!((cfg.runs, cfg.master_seed, cfg.mode), (5, 42, RunMode::Mission));
    }

    #[test]
    fn rejects_unknown_and_bad_entries() {
        assert!(matches!(ExperimentConfig::parse("[scenario]\nwaypionts = 8\n"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(ExperimentConfig::parse("[nope]\na = 1\n"), Err(ConfigError::UnknownSection { .. })));
        assert!(matches!(ExperimentConfig::parse("[pso]\nparticles = many\n"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(ExperimentConfig::parse("[experiment]\nruns = 0\n"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(ExperimentConfig::parse("[mission]\ndrift_threshold_m = -1\n"), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn missing_terrain_file_names_it() {
        let dir = std::env::temp_dir().join(format!("taskroute-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "[scenario]\nterrain = nowhere.gg\n").unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("nowhere.gg"), "{err}");
        let err = ExperimentConfig::load(dir.join("absent.cfg")).unwrap_err();
        assert!(err.to_string().contains("absent.cfg"), "{err}");
        std::fs::remove_dir_all(dir).unwrap();
    }
}
