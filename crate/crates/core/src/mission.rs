//! Mission simulation: fly the planned route leg by leg, let dynamic
//! waypoints drift at arrival events, and re-optimize from the current
//! waypoint when the network has deformed enough.
//!
//! Legs are flown atomically at the positions current at departure. After
//! each arrival the network is compared against the snapshot taken when the
//! route in force was planned; a replan is triggered when some dynamic
//! waypoint moved further than the drift threshold, when the k-NN topology
//! changed (if enabled), or when the remaining route is no longer flyable
//! (an edge vanished or it no longer fits the remaining budget). Replans
//! seed the optimizer with the incumbent priority vector.

use std::fmt::{self, Write as _};

use rand::Rng;
use thiserror::Error;

use crate::codec::{PlanRequest, PriorityVector, Route};
use crate::evaluation::{cost_from_parts, CostConfig, RouteMetrics};
use crate::network::{NetworkError, OperationNetwork, Task};
use crate::planning::{OptimizerConfig, Outcome, PlanError, PlanningProblem};
use crate::terrain::TerrainGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftThreshold {
    /// Fixed distance in meters.
    Absolute(f64),
    /// Fraction of each waypoint's own bound norm.
    BoundFraction(f64),
}

impl Default for DriftThreshold {
    fn default() -> Self {
        DriftThreshold::BoundFraction(0.1)
    }
}

impl DriftThreshold {
    fn value(&self) -> f64 {
        match *self {
            DriftThreshold::Absolute(v) | DriftThreshold::BoundFraction(v) => v,
        }
    }

    pub fn for_waypoint(&self, network: &OperationNetwork, id: usize) -> f64 {
        match *self {
            DriftThreshold::Absolute(m) => m,
            DriftThreshold::BoundFraction(f) => f * network.waypoint(id).bound.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub optimizer: OptimizerConfig,
    pub cost: CostConfig,
    pub drift_threshold: DriftThreshold,
    pub replan_on_adjacency_change: bool,
    pub drift_on_visit: bool,
    /// Evaluate the drift and adjacency triggers only on arrival at a
    /// dynamic waypoint. A broken remaining route forces a replan anywhere.
    pub check_only_at_dynamic: bool,
}

impl MissionConfig {
    pub fn new(optimizer: OptimizerConfig, cost: CostConfig) -> Self {
        Self {
            optimizer,
            cost,
            drift_threshold: DriftThreshold::default(),
            replan_on_adjacency_change: true,
            drift_on_visit: true,
            check_only_at_dynamic: false,
        }
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let t = self.drift_threshold.value();
        if !(t >= 0.0 && t.is_finite()) {
            return Err(MissionError::InvalidConfig(format!("drift threshold {t} must be non-negative")));
        }
        self.cost.validate().map_err(|e| MissionError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplanReason {
    Drift { id: usize, magnitude: f64, threshold: f64 },
    AdjacencyChanged,
    RouteBroken { from: usize, to: usize },
    BudgetAtRisk { remaining_route_s: f64, remaining_budget_s: f64 },
}

impl fmt::Display for ReplanReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplanReason::Drift { id, magnitude, threshold } => {
                write!(f, "reason=drift id={id} magnitude_m={magnitude:.6} threshold_m={threshold:.6}")
            }
            ReplanReason::AdjacencyChanged => write!(f, "reason=adjacency"),
            ReplanReason::RouteBroken { from, to } => write!(f, "reason=route_broken from={from} to={to}"),
            ReplanReason::BudgetAtRisk { remaining_route_s, remaining_budget_s } => write!(
                f,
                "reason=budget remaining_route_s={remaining_route_s:.6} remaining_budget_s={remaining_budget_s:.6}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    NoFeasibleInitialRoute,
    NoFeasibleReplan,
    BudgetExhausted,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortReason::NoFeasibleInitialRoute => "no_feasible_initial_route",
            AbortReason::NoFeasibleReplan => "no_feasible_replan",
            AbortReason::BudgetExhausted => "budget_exhausted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionOutcome {
    GoalReached,
    DeadEnd,
    Aborted(AbortReason),
}

impl fmt::Display for MissionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissionOutcome::GoalReached => f.write_str("goal_reached"),
            MissionOutcome::DeadEnd => f.write_str("dead_end"),
            MissionOutcome::Aborted(r) => write!(f, "aborted:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MissionEvent {
    Planned { route: Vec<usize>, cost: f64, wall_clock_s: f64 },
    Departed { from: usize, to: usize, leg_time_s: f64 },
    ArrivedWaypoint { id: usize },
    DriftApplied { moved: usize, max_drift_m: f64 },
    AdjacencyRebuilt { edges: usize },
    ReplanTriggered(ReplanReason),
    Replanned { old_route: Vec<usize>, new_route: Vec<usize>, cost: f64, incumbent_cost: f64, wall_clock_s: f64 },
    Finished(MissionOutcome),
}

fn route_field(nodes: &[usize]) -> String {
    nodes.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

impl MissionEvent {
    pub fn tag(&self) -> &'static str {
        match self {
            MissionEvent::Planned { .. } => "Planned",
            MissionEvent::Departed { .. } => "Departed",
            MissionEvent::ArrivedWaypoint { .. } => "ArrivedWaypoint",
            MissionEvent::DriftApplied { .. } => "DriftApplied",
            MissionEvent::AdjacencyRebuilt { .. } => "AdjacencyRebuilt",
            MissionEvent::ReplanTriggered(_) => "ReplanTriggered",
            MissionEvent::Replanned { .. } => "Replanned",
            MissionEvent::Finished(_) => "Finished",
        }
    }

    pub fn payload(&self) -> String {
        match self {
            MissionEvent::Planned { route, cost, wall_clock_s } => {
                format!("route={} cost={cost:.6} wall_clock_s={wall_clock_s:.6}", route_field(route))
            }
            MissionEvent::Departed { from, to, leg_time_s } => format!("from={from} to={to} leg_time_s={leg_time_s:.6}"),
            MissionEvent::ArrivedWaypoint { id } => format!("id={id}"),
            MissionEvent::DriftApplied { moved, max_drift_m } => format!("moved={moved} max_drift_m={max_drift_m:.6}"),
            MissionEvent::AdjacencyRebuilt { edges } => format!("edges={edges}"),
            MissionEvent::ReplanTriggered(reason) => reason.to_string(),
            MissionEvent::Replanned { old_route, new_route, cost, incumbent_cost, wall_clock_s } => format!(
                "old={} new={} cost={cost:.6} incumbent_cost={incumbent_cost:.6} wall_clock_s={wall_clock_s:.6}",
                route_field(old_route),
                route_field(new_route)
            ),
            MissionEvent::Finished(outcome) => format!("outcome={outcome}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub timestamp_s: f64,
    pub event: MissionEvent,
}

/// One leg as actually flown, measured at departure positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlownLeg {
    pub from: usize,
    pub to: usize,
    pub task: Task,
    pub distance_m: f64,
    pub time_s: f64,
}

/// Everything a replan saw and produced, for later inspection.
#[derive(Debug, Clone)]
pub struct ReplanRecord {
    pub timestamp_s: f64,
    pub reasons: Vec<ReplanReason>,
    /// Network state the replan optimized over.
    pub network: OperationNetwork,
    pub request: PlanRequest,
    /// The vector the population was seeded with.
    pub incumbent: PriorityVector,
    pub incumbent_cost: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct MissionLog {
    pub events: Vec<TimedEvent>,
    pub legs: Vec<FlownLeg>,
    pub replans: Vec<ReplanRecord>,
    pub outcome: MissionOutcome,
    pub metrics: RouteMetrics,
    pub remaining_budget_s: f64,
    /// Optimizer wall-clock summed over the initial plan and every replan.
    pub optimizer_wall_clock_s: f64,
    pub final_network: OperationNetwork,
}

impl MissionLog {
    pub fn flown_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.legs.first().map(|l| vec![l.from]).unwrap_or_default();
        nodes.extend(self.legs.iter().map(|l| l.to));
        nodes
    }

    pub fn replan_count(&self) -> usize {
        self.replans.len()
    }

    pub fn count(&self, tag: &str) -> usize {
        self.events.iter().filter(|e| e.event.tag() == tag).count()
    }

    /// One `timestamp_s<TAB>tag<TAB>payload` line per event.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{:.6}\t{}\t{}", e.timestamp_s, e.event.tag(), e.event.payload());
        }
        out
    }

    /// Flown-path metrics as a header plus one row.
    pub fn metrics_csv(&self) -> String {
        format!("{}\n{}\n", RouteMetrics::CSV_HEADER, self.metrics.to_csv_row())
    }
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid mission configuration: {0}")]
    InvalidConfig(String),
    #[error("optimizer failed: {source}")]
    Optimizer {
        #[source]
        source: PlanError,
        partial: Box<MissionLog>,
    },
    #[error("network update failed: {0}")]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone)]
pub enum ReplanResult {
    Replanned { outcome: Box<Outcome>, incumbent_cost: f64, request: PlanRequest },
    Abort(AbortReason),
}

/// Re-optimizes from `current` over `remaining_budget`, treating `visited`
/// as off limits and seeding the population with `incumbent`. An
/// exhausted budget or an infeasible best route is an abort, not an error.
#[allow(clippy::too_many_arguments)]
pub fn replan<R: Rng + ?Sized>(
    current: usize,
    remaining_budget: f64,
    visited: &[usize],
    network: &OperationNetwork,
    cfg: &MissionConfig,
    incumbent: &PriorityVector,
    rng: &mut R,
) -> Result<ReplanResult, PlanError> {
    if remaining_budget.is_nan() || remaining_budget <= 0.0 {
        return Ok(ReplanResult::Abort(AbortReason::BudgetExhausted));
    }
    let goal = network.goal_id();
    let blocked = visited.iter().copied().filter(|&v| v != current && v != goal).collect();
    let request = PlanRequest { start: current, goal, t_available: remaining_budget, blocked };
    let problem = PlanningProblem::with_request(network, request.clone(), cfg.cost)?;
    let incumbent_cost = problem.cost(incumbent);
    let outcome = cfg.optimizer.optimize(&problem, rng, std::slice::from_ref(incumbent))?;
    if !outcome.route.feasible {
        return Ok(ReplanResult::Abort(AbortReason::NoFeasibleReplan));
    }
    Ok(ReplanResult::Replanned { outcome: Box::new(outcome), incumbent_cost, request })
}

/// Time to fly `nodes` on the current network, or the first missing leg.
fn remaining_route_time(network: &OperationNetwork, nodes: &[usize]) -> Result<f64, (usize, usize)> {
    nodes.windows(2).try_fold(0.0, |acc, w| match network.edge_between(w[0], w[1]) {
        Some(idx) => Ok(acc + network.edge_time(idx)),
        None => Err((w[0], w[1])),
    })
}

struct Flight {
    events: Vec<TimedEvent>,
    legs: Vec<FlownLeg>,
    replans: Vec<ReplanRecord>,
    elapsed: f64,
    wall_clock: f64,
}

impl Flight {
    fn log(&mut self, event: MissionEvent) {
        self.events.push(TimedEvent { timestamp_s: self.elapsed, event });
    }

    fn finish(mut self, outcome: MissionOutcome, cost: &CostConfig, network: OperationNetwork) -> MissionLog {
        self.log(MissionEvent::Finished(outcome));
        let feasible = outcome == MissionOutcome::GoalReached && self.elapsed <= cost.t_available;
        let mean_ratio = if self.legs.is_empty() {
            0.0
        } else {
            self.legs.iter().map(|l| l.task.risk_ratio()).sum::<f64>() / self.legs.len() as f64
        };
        let metrics = RouteMetrics {
            feasible,
            cost: cost_from_parts(feasible, self.elapsed, mean_ratio, cost),
            weight: self.legs.iter().map(|l| l.task.weight()).sum(),
            tasks_completed: self.legs.len(),
            travel_time: self.elapsed,
            distance: self.legs.iter().map(|l| l.distance_m).sum(),
            violation: (self.elapsed - cost.t_available).max(0.0),
        };
        MissionLog {
            events: self.events,
            legs: self.legs,
            replans: self.replans,
            outcome,
            metrics,
            remaining_budget_s: cost.t_available - self.elapsed,
            optimizer_wall_clock_s: self.wall_clock,
            final_network: network,
        }
    }

    fn fail(self, source: PlanError, cost: &CostConfig, network: OperationNetwork) -> MissionError {
        let partial = self.finish(MissionOutcome::Aborted(AbortReason::NoFeasibleReplan), cost, network);
        MissionError::Optimizer { source, partial: Box::new(partial) }
    }
}

/// Flies one mission from the network's start to its goal within
/// `cfg.cost.t_available`. `rng` drives the optimizer; `drift_rng` drives
/// waypoint drift and any tasks drawn for new edges.
pub fn run_mission<R: Rng + ?Sized, D: Rng + ?Sized>(
    network: &OperationNetwork,
    terrain: &TerrainGrid,
    cfg: &MissionConfig,
    rng: &mut R,
    drift_rng: &mut D,
) -> Result<MissionLog, MissionError> {
    cfg.validate()?;
    let mut net = network.clone();
    let budget = cfg.cost.t_available;
    let goal = net.goal_id();
    let mut flight = Flight { events: Vec::new(), legs: Vec::new(), replans: Vec::new(), elapsed: 0.0, wall_clock: 0.0 };

    let initial = match PlanningProblem::new(&net, cfg.cost).and_then(|p| cfg.optimizer.optimize(&p, rng, &[])) {
        Ok(outcome) => outcome,
        Err(e) => return Err(flight.fail(e, &cfg.cost, net)),
    };
    flight.wall_clock += initial.wall_clock_s;
    flight.log(MissionEvent::Planned {
        route: initial.route.nodes.clone(),
        cost: initial.metrics.cost,
        wall_clock_s: initial.wall_clock_s,
    });
    if !initial.route.feasible {
        return Ok(flight.finish(MissionOutcome::Aborted(AbortReason::NoFeasibleInitialRoute), &cfg.cost, net));
    }

    let mut plan: Vec<usize> = initial.route.nodes;
    let mut incumbent = initial.vector;
    let mut reference = net.snapshot();
    let mut current = net.start_id();
    let mut visited = vec![current];

    let outcome = loop {
        if current == goal {
            break MissionOutcome::GoalReached;
        }
        let Some(&next) = plan.get(1) else { break MissionOutcome::DeadEnd };
        let Some(idx) = net.edge_between(current, next) else { break MissionOutcome::DeadEnd };
        let leg_time = net.edge_time(idx);
        flight.log(MissionEvent::Departed { from: current, to: next, leg_time_s: leg_time });
        flight.legs.push(FlownLeg {
            from: current,
            to: next,
            task: net.edge(idx).task,
            distance_m: net.edge_length(idx),
            time_s: leg_time,
        });
        flight.elapsed += leg_time;
        current = next;
        visited.push(current);
        plan.remove(0);
        flight.log(MissionEvent::ArrivedWaypoint { id: current });
        if current == goal {
            break MissionOutcome::GoalReached;
        }

        if cfg.drift_on_visit {
            let summary = net.perturb_dynamic(terrain, drift_rng);
            if !summary.drifts.is_empty() {
                let moved = summary.drifts.iter().filter(|d| d.magnitude > 0.0).count();
                flight.log(MissionEvent::DriftApplied { moved, max_drift_m: summary.max() });
            }
        }
        let deformation = net.deformation_since(&reference)?;
        if deformation.adjacency_changed && net.rebuild_adjacency(drift_rng)? {
            flight.log(MissionEvent::AdjacencyRebuilt { edges: net.edges().len() });
        }

        let check = !cfg.check_only_at_dynamic || net.waypoint(current).is_dynamic();
        let mut reasons = Vec::new();
        if check {
            if let Some(d) = deformation
                .drifts
                .iter()
                .find(|d| d.magnitude > cfg.drift_threshold.for_waypoint(&net, d.id))
            {
                let threshold = cfg.drift_threshold.for_waypoint(&net, d.id);
                reasons.push(ReplanReason::Drift { id: d.id, magnitude: d.magnitude, threshold });
            }
            if deformation.adjacency_changed && cfg.replan_on_adjacency_change {
                reasons.push(ReplanReason::AdjacencyChanged);
            }
        }
        let remaining_budget = budget - flight.elapsed;
        match remaining_route_time(&net, &plan) {
            Err((from, to)) => reasons.push(ReplanReason::RouteBroken { from, to }),
            Ok(t) if t > remaining_budget => reasons.push(ReplanReason::BudgetAtRisk {
                remaining_route_s: t,
                remaining_budget_s: remaining_budget,
            }),
            Ok(_) => {}
        }
        if reasons.is_empty() {
            continue;
        }
        for r in &reasons {
            flight.log(MissionEvent::ReplanTriggered(r.clone()));
        }
        match replan(current, remaining_budget, &visited, &net, cfg, &incumbent, rng) {
            Err(e) => return Err(flight.fail(e, &cfg.cost, net)),
            Ok(ReplanResult::Abort(reason)) => break MissionOutcome::Aborted(reason),
            Ok(ReplanResult::Replanned { outcome, incumbent_cost, request }) => {
                flight.wall_clock += outcome.wall_clock_s;
                flight.log(MissionEvent::Replanned {
                    old_route: plan.clone(),
                    new_route: outcome.route.nodes.clone(),
                    cost: outcome.metrics.cost,
                    incumbent_cost,
                    wall_clock_s: outcome.wall_clock_s,
                });
                plan = outcome.route.nodes.clone();
                let seed = std::mem::replace(&mut incumbent, outcome.vector.clone());
                reference = net.snapshot();
                flight.replans.push(ReplanRecord {
                    timestamp_s: flight.elapsed,
                    reasons,
                    network: net.clone(),
                    request,
                    incumbent: seed,
                    incumbent_cost,
                    outcome: *outcome,
                });
            }
        }
    };
    Ok(flight.finish(outcome, &cfg.cost, net))
}

/// Decodes and times a route for display without running a mission.
pub fn describe_route(route: &Route) -> String {
    format!("{} ({}, {:.6} s)", route_field(&route.nodes), route.termination, route.elapsed)
}
