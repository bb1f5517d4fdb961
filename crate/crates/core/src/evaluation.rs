//! Route metrics and the time-budget / risk-priority cost.
//!
//! For a feasible route
//!
//! ```text
//! cost = phi1 * |T - T_avail| / T_avail + phi2 * mean(xi / rho)
//! ```
//!
//! and for an infeasible one `penalty + phi1 * |T - T_avail| / T_avail`,
//! so routes closer to the budget still rank better among the infeasible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Route, Termination};
use crate::network::OperationNetwork;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("route references edge {0}, network has {1} edges")]
    StaleEdge(usize, usize),
    #[error("route edge {index} does not join nodes {from} and {to}")]
    Disconnected { index: usize, from: usize, to: usize },
    #[error("feasible route without edges")]
    EmptyFeasibleRoute,
    #[error("invalid cost configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub phi1: f64,
    pub phi2: f64,
    pub t_available: f64,
    pub infeasible_penalty: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self { phi1: 0.5, phi2: 0.5, t_available: 3.1e4, infeasible_penalty: 1.0e6 }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = self.phi1 >= 0.0
            && self.phi2 >= 0.0
            && self.phi1 + self.phi2 > 0.0
            && self.t_available > 0.0
            && self.t_available.is_finite()
            && self.infeasible_penalty > 0.0;
        if ok {
            Ok(())
        } else {
            Err(EvalError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn with_budget(&self, t_available: f64) -> Self {
        Self { t_available, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RouteMetrics {
    pub feasible: bool,
    pub cost: f64,
    pub weight: f64,
    pub tasks_completed: usize,
    pub travel_time: f64,
    pub distance: f64,
    pub violation: f64,
}

impl RouteMetrics {
    pub const CSV_HEADER: &'static str = "feasible,cost,weight,tasks,time_s,distance_m,violation_s";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{},{:.6},{:.6},{:.6}",
            self.feasible, self.cost, self.weight, self.tasks_completed, self.travel_time, self.distance, self.violation
        )
    }
}

fn checked_edges<'a>(route: &'a Route, network: &OperationNetwork) -> Result<&'a [usize], EvalError> {
    let m = network.edges().len();
    for (k, &idx) in route.edges.iter().enumerate() {
        if idx >= m {
            return Err(EvalError::StaleEdge(idx, m));
        }
        let (a, b) = (route.nodes[k], route.nodes[k + 1]);
        let e = network.edge(idx);
        if !((e.from == a && e.to == b) || (e.from == b && e.to == a)) {
            return Err(EvalError::Disconnected { index: idx, from: a, to: b });
        }
    }
    Ok(&route.edges)
}

/// Sum of leg times at current positions.
pub fn route_time(route: &Route, network: &OperationNetwork) -> Result<f64, EvalError> {
    Ok(checked_edges(route, network)?.iter().map(|&i| network.edge_time(i)).sum())
}

/// Sum of rho / xi over route edges.
pub fn route_weight(route: &Route, network: &OperationNetwork) -> Result<f64, EvalError> {
    Ok(checked_edges(route, network)?.iter().map(|&i| network.edge(i).task.weight()).sum())
}

pub fn route_distance(route: &Route, network: &OperationNetwork) -> Result<f64, EvalError> {
    Ok(checked_edges(route, network)?.iter().map(|&i| network.edge_length(i)).sum())
}

fn mean_risk_ratio(route: &Route, network: &OperationNetwork) -> f64 {
    if route.edges.is_empty() {
        return 0.0;
    }
    route.edges.iter().map(|&i| network.edge(i).task.risk_ratio()).sum::<f64>() / route.edges.len() as f64
}

/// Whether the route reaches the goal within the configured budget.
pub fn is_feasible(route: &Route, travel_time: f64, cfg: &CostConfig) -> bool {
    route.termination == Termination::ReachedGoal && travel_time <= cfg.t_available
}

pub fn cost_from_parts(feasible: bool, travel_time: f64, mean_risk_ratio: f64, cfg: &CostConfig) -> f64 {
    let slack = cfg.phi1 * (travel_time - cfg.t_available).abs() / cfg.t_available;
    if feasible {
        slack + cfg.phi2 * mean_risk_ratio
    } else {
        cfg.infeasible_penalty + slack
    }
}

pub fn route_cost(route: &Route, network: &OperationNetwork, cfg: &CostConfig) -> Result<f64, EvalError> {
    let t = route_time(route, network)?;
    let feasible = is_feasible(route, t, cfg);
    if feasible && route.edges.is_empty() {
        return Err(EvalError::EmptyFeasibleRoute);
    }
    Ok(cost_from_parts(feasible, t, mean_risk_ratio(route, network), cfg))
}

/// Time over budget; routes that stop short report the overrun of the time
/// they did accumulate.
pub fn route_violation(route: &Route, network: &OperationNetwork, cfg: &CostConfig) -> Result<f64, EvalError> {
    Ok((route_time(route, network)? - cfg.t_available).max(0.0))
}

pub fn metrics(route: &Route, network: &OperationNetwork, cfg: &CostConfig) -> Result<RouteMetrics, EvalError> {
    let travel_time = route_time(route, network)?;
    let feasible = is_feasible(route, travel_time, cfg);
    if feasible && route.edges.is_empty() {
        return Err(EvalError::EmptyFeasibleRoute);
    }
    Ok(RouteMetrics {
        feasible,
        cost: cost_from_parts(feasible, travel_time, mean_risk_ratio(route, network), cfg),
        weight: route_weight(route, network)?,
        tasks_completed: route.edges.len(),
        travel_time,
        distance: route_distance(route, network)?,
        violation: (travel_time - cfg.t_available).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_route, PriorityVector};
    use crate::network::{Edge, Position3, Task, Waypoint};

    fn chain(tasks: &[Task], spacing: f64, speed: f64) -> (OperationNetwork, Route) {
        let n = tasks.len() + 1;
        let wps = (0..n).map(|i| Waypoint::fixed(i, Position3::new(i as f64 * spacing, 0.0, 0.0))).collect();
        let edges = tasks.iter().enumerate().map(|(i, &task)| Edge { from: i, to: i + 1, task }).collect();
        let net = OperationNetwork::from_parts(wps, edges, 0, n - 1, speed).unwrap();
        let route = decode_route(&PriorityVector::new(vec![0.0; n]), &net, 1e12).unwrap();
        (net, route)
    }

    #[test]
    fn empty_route_metrics() {
        let (net, _) = chain(&[Task::new(1.0, 10.0, 0.0)], 10.0, 1.0);
        let r = Route { nodes: vec![0], edges: vec![], feasible: false, termination: Termination::DeadEnd, elapsed: 0.0 };
        assert_eq!(route_time(&r, &net).unwrap(), 0.0);
        assert_eq!(route_weight(&r, &net).unwrap(), 0.0);
        let m = metrics(&r, &net, &CostConfig::default()).unwrap();
        assert!(!m.feasible);
        assert_eq!(m.tasks_completed, 0);
        assert_eq!(m.weight, 0.0);
    }

    #[test]
    fn single_edge_time() {
        let (net, r) = chain(&[Task::new(1.0, 10.0, 100.0)], 1500.0, 1.5);
        assert!((route_time(&r, &net).unwrap() - 1100.0).abs() < 1e-9);
        assert_eq!(metrics(&r, &net, &CostConfig::default()).unwrap().tasks_completed, 1);
    }

    #[test]
    fn weight_arithmetic() {
        let (net, r) = chain(&[Task::new(4.0, 2.0, 0.0), Task::new(9.0, 3.0, 0.0)], 10.0, 1.0);
        assert!((route_weight(&r, &net).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cost_at_exact_budget() {
        let (net, r) = chain(&[Task::new(4.0, 2.0, 0.0), Task::new(9.0, 3.0, 0.0)], 10.0, 1.0);
        let cfg = CostConfig { t_available: 20.0, ..CostConfig::default() };
        let expected = 0.5 * (0.5 + 1.0 / 3.0) / 2.0;
        assert!((route_cost(&r, &net, &cfg).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cost_time_term_only() {
        let (net, r) = chain(&[Task::new(4.0, 2.0, 0.0)], 90.0, 1.0);
        let cfg = CostConfig { phi1: 1.0, phi2: 0.0, t_available: 100.0, infeasible_penalty: 1e6 };
        assert!((route_cost(&r, &net, &cfg).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn violation_and_over_budget_penalty() {
        let (net, r) = chain(&[Task::new(4.0, 2.0, 0.0)], 150.0, 1.0);
        let cfg = CostConfig { t_available: 100.0, ..CostConfig::default() };
        assert!((route_violation(&r, &net, &cfg).unwrap() - 50.0).abs() < 1e-12);
        let cost = route_cost(&r, &net, &cfg).unwrap();
        assert!((cost - (1e6 + 0.25)).abs() < 1e-9);
        let loose = CostConfig { t_available: 1000.0, ..cfg };
        assert_eq!(route_violation(&r, &net, &loose).unwrap(), 0.0);
    }

    #[test]
    fn stale_edges_are_rejected() {
        let (net, r) = chain(&[Task::new(4.0, 2.0, 0.0)], 10.0, 1.0);
        let stale = Route { edges: vec![7], ..r.clone() };
        assert_eq!(route_time(&stale, &net), Err(EvalError::StaleEdge(7, 1)));
        let (net2, _) = chain(&[Task::new(4.0, 2.0, 0.0), Task::new(4.0, 2.0, 0.0)], 10.0, 1.0);
        let wrong = Route { nodes: vec![0, 1], edges: vec![1], ..r };
        assert!(matches!(route_time(&wrong, &net2), Err(EvalError::Disconnected { .. })));
    }

    #[test]
    fn csv_row_format() {
        let m = RouteMetrics {
            feasible: true,
            cost: 0.25,
            weight: 1.5,
            tasks_completed: 3,
            travel_time: 10.0,
            distance: 12.5,
            violation: 0.0,
        };
        assert_eq!(m.to_csv_row(), "true,0.250000,1.500000,3,10.000000,12.500000,0.000000");
    }

    #[test]
    fn invalid_configs() {
        assert!(CostConfig { phi1: 0.0, phi2: 0.0, ..CostConfig::default() }.validate().is_err());
        assert!(CostConfig { t_available: 0.0, ..CostConfig::default() }.validate().is_err());
        assert!(CostConfig::default().validate().is_ok());
    }
}
