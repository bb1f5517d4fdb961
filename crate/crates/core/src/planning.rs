//! The planning problem both optimizers search, and their shared result.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::{decode_with, CodecError, PlanRequest, PriorityVector, Route};
use crate::evaluation::{cost_from_parts, metrics, CostConfig, EvalError, RouteMetrics};
use crate::network::OperationNetwork;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("seed vector {index} has length {found}, expected {expected}")]
    SeedLength { index: usize, expected: usize, found: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("iteration {iteration} outside 0..{iterations}")]
    IterationOutOfRange { iteration: usize, iterations: usize },
    #[error("maximum species probability is zero")]
    DegenerateProbability,
}

/// A frozen network plus where to go and within what budget.
#[derive(Debug, Clone)]
pub struct PlanningProblem<'a> {
    network: &'a OperationNetwork,
    request: PlanRequest,
    cost: CostConfig,
}

impl<'a> PlanningProblem<'a> {
    /// Plans between the network's own endpoints with `cost.t_available`.
    pub fn new(network: &'a OperationNetwork, cost: CostConfig) -> Result<Self, PlanError> {
        Self::with_request(network, PlanRequest::new(network, cost.t_available), cost)
    }

    /// The request's budget overrides `cost.t_available`.
    pub fn with_request(network: &'a OperationNetwork, request: PlanRequest, cost: CostConfig) -> Result<Self, PlanError> {
        request.validate(network)?;
        let cost = cost.with_budget(request.t_available);
        cost.validate()?;
        Ok(Self { network, request, cost })
    }

    pub fn network(&self) -> &'a OperationNetwork {
        self.network
    }

    pub fn request(&self) -> &PlanRequest {
        &self.request
    }

    pub fn cost_config(&self) -> &CostConfig {
        &self.cost
    }

    pub fn dimension(&self) -> usize {
        self.network.len()
    }

    pub fn decode(&self, pv: &PriorityVector) -> Route {
        decode_with(pv, self.network, &self.request).expect("problem and vector validated")
    }

    /// Fitness of a priority vector (lower is better).
    pub fn cost(&self, pv: &PriorityVector) -> f64 {
        let route = self.decode(pv);
        let feasible = route.feasible;
        let mean_ratio = if route.edges.is_empty() {
            0.0
        } else {
            route.edges.iter().map(|&i| self.network.edge(i).task.risk_ratio()).sum::<f64>() / route.edges.len() as f64
        };
        cost_from_parts(feasible, route.elapsed, mean_ratio, &self.cost)
    }

    pub fn metrics(&self, route: &Route) -> Result<RouteMetrics, PlanError> {
        Ok(metrics(route, self.network, &self.cost)?)
    }

    pub fn check_seeds(&self, seeds: &[PriorityVector]) -> Result<(), PlanError> {
        let expected = self.dimension();
        match seeds.iter().position(|s| s.len() != expected) {
            Some(index) => Err(PlanError::SeedLength { index, expected, found: seeds[index].len() }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Pso,
    Bbo,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Pso => "pso",
            Algorithm::Bbo => "bbo",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pso" => Ok(Algorithm::Pso),
            "bbo" => Ok(Algorithm::Bbo),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

/// Best solution found by an optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub route: Route,
    pub vector: PriorityVector,
    pub metrics: RouteMetrics,
    /// Best cost after each iteration.
    pub history: Vec<f64>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerConfig {
    Pso(crate::pso::PsoConfig),
    Bbo(crate::bbo::BboConfig),
}

impl OptimizerConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            OptimizerConfig::Pso(_) => Algorithm::Pso,
            OptimizerConfig::Bbo(_) => Algorithm::Bbo,
        }
    }

    pub fn optimize<R: rand::Rng + ?Sized>(
        &self,
        problem: &PlanningProblem<'_>,
        rng: &mut R,
        seeds: &[PriorityVector],
    ) -> Result<Outcome, PlanError> {
        match self {
            OptimizerConfig::Pso(cfg) => crate::pso::pso_optimize(cfg, problem, rng, seeds),
            OptimizerConfig::Bbo(cfg) => crate::bbo::bbo_optimize(cfg, problem, rng, seeds),
        }
    }
}

/// History as `iteration,best_cost` CSV.
pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,best_cost\n");
    for (i, c) in history.iter().enumerate() {
        out.push_str(&format!("{i},{c:.6}\n"));
    }
    out
}
