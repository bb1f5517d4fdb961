//! Priority-vector genotype and the greedy adjacency-guided decoder that
//! turns it into a route.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::OperationNetwork;

pub const PRIORITY_MIN: f64 = -200.0;
pub const PRIORITY_MAX: f64 = 100.0;
/// Working priority given to visited nodes; below every legal priority.
pub const VISITED_PRIORITY: f64 = -1.0e6;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("priority vector has {found} entries, network has {expected} waypoints")]
    LengthMismatch { expected: usize, found: usize },
    #[error("time budget {0} must be positive")]
    InvalidBudget(f64),
    #[error("invalid plan request: {0}")]
    InvalidRequest(String),
    #[error("malformed route line: {0}")]
    MalformedRoute(String),
}

/// One priority per waypoint, each in `[-200, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector(Vec<f64>);

impl PriorityVector {
    /// Wraps raw values, clamping each into range.
    pub fn new(values: Vec<f64>) -> Self {
        let mut pv = Self(values);
        pv.clamp_in_place();
        pv
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| random_priority(rng)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn clamped(&self) -> Self {
        let mut c = self.clone();
        c.clamp_in_place();
        c
    }

    pub fn clamp_in_place(&mut self) {
        for v in &mut self.0 {
            *v = clamp_priority(*v);
        }
    }

    pub fn in_range(&self) -> bool {
        self.0.iter().all(|v| (PRIORITY_MIN..=PRIORITY_MAX).contains(v))
    }
}

pub fn random_priority<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(PRIORITY_MIN..PRIORITY_MAX)
}

pub fn clamp_priority(v: f64) -> f64 {
    if v.is_nan() {
        PRIORITY_MIN
    } else {
        v.clamp(PRIORITY_MIN, PRIORITY_MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    ReachedGoal,
    DeadEnd,
    TimeExceeded,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ReachedGoal => "ReachedGoal",
            Termination::DeadEnd => "DeadEnd",
            Termination::TimeExceeded => "TimeExceeded",
        })
    }
}

impl FromStr for Termination {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ReachedGoal" => Ok(Termination::ReachedGoal),
            "DeadEnd" => Ok(Termination::DeadEnd),
            "TimeExceeded" => Ok(Termination::TimeExceeded),
            other => Err(CodecError::MalformedRoute(format!("unknown termination {other:?}"))),
        }
    }
}

/// A decoded waypoint sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub feasible: bool,
    pub termination: Termination,
    /// Time accumulated while decoding, in seconds.
    pub elapsed: f64,
}

impl Route {
    /// `0,4,7|ReachedGoal|true`
    pub fn to_line(&self) -> String {
        let nodes: Vec<String> = self.nodes.iter().map(usize::to_string).collect();
        format!("{}|{}|{}", nodes.join(","), self.termination, self.feasible)
    }

    /// Parses a route line, recovering edges from `network`. Elapsed time is
    /// recomputed from current positions.
    pub fn from_line(line: &str, network: &OperationNetwork) -> Result<Self, CodecError> {
        let bad = || CodecError::MalformedRoute(line.to_string());
        let mut parts = line.trim().split('|');
        let (nodes, term, feasible) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(t), Some(f), None) => (n, t, f),
            _ => return Err(bad()),
        };
        let nodes: Vec<usize> = nodes
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let termination: Termination = term.parse()?;
        let feasible: bool = feasible.parse().map_err(|_| bad())?;
        let mut edges = Vec::with_capacity(nodes.len().saturating_sub(1));
        let mut elapsed = 0.0;
        for w in nodes.windows(2) {
            let idx = network.edge_between(w[0], w[1]).ok_or_else(bad)?;
            elapsed += network.edge_time(idx);
            edges.push(idx);
        }
        Ok(Self { nodes, edges, feasible, termination, elapsed })
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn last(&self) -> usize {
        *self.nodes.last().expect("route has a start node")
    }
}

/// Where to plan from and within what budget. Blocked nodes are treated as
/// already visited.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub start: usize,
    pub goal: usize,
    pub t_available: f64,
    pub blocked: Vec<usize>,
}

impl PlanRequest {
    pub fn new(network: &OperationNetwork, t_available: f64) -> Self {
        Self { start: network.start_id(), goal: network.goal_id(), t_available, blocked: Vec::new() }
    }

    pub fn validate(&self, network: &OperationNetwork) -> Result<(), CodecError> {
        let n = network.len();
        if self.t_available.is_nan() || self.t_available <= 0.0 {
            return Err(CodecError::InvalidBudget(self.t_available));
        }
        if self.start >= n || self.goal >= n || self.start == self.goal {
            return Err(CodecError::InvalidRequest(format!("start {} / goal {}", self.start, self.goal)));
        }
        if let Some(b) = self.blocked.iter().find(|&&b| b >= n || b == self.goal || b == self.start) {
            return Err(CodecError::InvalidRequest(format!("cannot block waypoint {b}")));
        }
        Ok(())
    }
}

/// Decodes from the network's own start and goal.
pub fn decode_route(pv: &PriorityVector, network: &OperationNetwork, t_available: f64) -> Result<Route, CodecError> {
    decode_with(pv, network, &PlanRequest::new(network, t_available))
}

/// Greedy walk: from the current node, consider unvisited neighbours over
/// untraversed edges; keep those that could still reach the goal in time
/// by straight line; take the goal if every other survivor is a one-step
/// dead end, otherwise the highest working priority (ties to lower id).
/// When nothing survives but the goal is adjacent the walk ends there,
/// over budget.
pub fn decode_with(pv: &PriorityVector, network: &OperationNetwork, request: &PlanRequest) -> Result<Route, CodecError> {
    let n = network.len();
    if pv.len() != n {
        return Err(CodecError::LengthMismatch { expected: n, found: pv.len() });
    }
    request.validate(network)?;
    let goal = request.goal;
    let budget = request.t_available;
    let speed = network.vehicle_speed();
    let goal_pos = network.position(goal);
    let lower_bound: Vec<f64> = (0..n).map(|i| network.position(i).distance(&goal_pos) / speed).collect();

    let mut priority = pv.values().to_vec();
    for &b in &request.blocked {
        priority[b] = VISITED_PRIORITY;
    }
    priority[request.start] = VISITED_PRIORITY;
    let mut traversed = vec![false; network.edges().len()];

    let mut current = request.start;
    let mut elapsed = 0.0;
    let mut nodes = vec![current];
    let mut edges = Vec::new();
    let mut survivors: Vec<(usize, usize, f64)> = Vec::new();

    let termination = loop {
        if current == goal {
            break Termination::ReachedGoal;
        }
        survivors.clear();
        let mut any_candidate = false;
        let mut goal_edge = None;
        for &(next, idx) in network.neighbors(current) {
            if traversed[idx] || priority[next] <= VISITED_PRIORITY {
                continue;
            }
            any_candidate = true;
            let t = network.edge_time(idx);
            if next == goal {
                goal_edge = Some((idx, t));
            }
            if elapsed + t + lower_bound[next] <= budget {
                survivors.push((next, idx, t));
            }
        }
        if !any_candidate {
            break Termination::DeadEnd;
        }
        let choice = if survivors.is_empty() {
            match goal_edge {
                Some((idx, t)) => (goal, idx, t),
                None => break Termination::TimeExceeded,
            }
        } else {
            let goal_survives = survivors.iter().any(|&(m, _, _)| m == goal);
            let others_doomed = goal_survives
                && survivors.iter().filter(|&&(m, _, _)| m != goal).all(|&(m, _, t)| {
                    let reach = elapsed + t;
                    !network.neighbors(m).iter().any(|&(onward, oidx)| {
                        onward != current
                            && !traversed[oidx]
                            && priority[onward] > VISITED_PRIORITY
                            && reach + network.edge_time(oidx) + lower_bound[onward] <= budget
                    })
                });
            if others_doomed {
                *survivors.iter().find(|&&(m, _, _)| m == goal).expect("goal survives")
            } else {
                // Neighbours are visited in ascending id, so strict > keeps the lower id on ties.
                let mut best = survivors[0];
                for &s in &survivors[1..] {
                    if priority[s.0] > priority[best.0] {
                        best = s;
                    }
                }
                best
            }
        };
        let (next, idx, t) = choice;
        traversed[idx] = true;
        priority[next] = VISITED_PRIORITY;
        elapsed += t;
        nodes.push(next);
        edges.push(idx);
        current = next;
    };

    let feasible = termination == Termination::ReachedGoal && elapsed <= budget;
    Ok(Route { nodes, edges, feasible, termination, elapsed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, Position3, Task, Waypoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(points: &[(f64, f64)], pairs: &[(usize, usize)], goal: usize) -> OperationNetwork {
        let wps = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Waypoint::fixed(i, Position3::new(x, y, 0.0)))
            .collect();
        let edges = pairs.iter().map(|&(from, to)| Edge { from, to, task: Task::new(2.0, 10.0, 10.0) }).collect();
        OperationNetwork::from_parts(wps, edges, 0, goal, 1.0).unwrap()
    }

    #[test]
    fn clamping() {
        let pv = PriorityVector(vec![350.0, -1000.0, 5.0]);
        assert_eq!(pv.clamped().values(), &[100.0, -200.0, 5.0]);
        let inside = PriorityVector(vec![-200.0, 0.0, 100.0]);
        assert_eq!(inside.clamped(), inside);
        assert_eq!(PriorityVector::new(vec![f64::NAN]).values(), &[-200.0]);
    }

    #[test]
    fn random_vectors() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let pa = PriorityVector::random(5, &mut a);
        assert_eq!(pa.len(), 5);
        assert!(pa.in_range());
        assert_eq!(pa, PriorityVector::random(5, &mut b));
        let big = PriorityVector::random(10_000, &mut a);
        let mean = big.values().iter().sum::<f64>() / 10_000.0;
        assert!((mean + 50.0).abs() < 3.0, "mean {mean}");
    }

    #[test]
    fn two_node_network() {
        let n = net(&[(0.0, 0.0), (10.0, 0.0)], &[(0, 1)], 1);
        let r = decode_route(&PriorityVector(vec![-7.0, 3.0]), &n, 1000.0).unwrap();
        assert_eq!(r.nodes, vec![0, 1]);
        assert!(r.feasible);
        assert_eq!(r.termination, Termination::ReachedGoal);
        assert_eq!(r.elapsed, 20.0);
    }

    #[test]
    fn line_network() {
        let n = net(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], &[(0, 1), (1, 2)], 2);
        let r = decode_route(&PriorityVector(vec![0.0, -150.0, 90.0]), &n, 100.0).unwrap();
        assert_eq!(r.nodes, vec![0, 1, 2]);
        assert_eq!(r.edges, vec![0, 1]);
        assert!(r.feasible);
    }

    #[test]
    fn diamond_follows_priority() {
        // 0 -> {1, 2} -> 3
        let n = net(&[(0.0, 0.0), (10.0, 10.0), (10.0, -10.0), (20.0, 0.0)], &[(0, 1), (0, 2), (1, 3), (2, 3)], 3);
        let r = decode_route(&PriorityVector(vec![0.0, 50.0, -100.0, 0.0]), &n, 1000.0).unwrap();
        assert_eq!(r.nodes, vec![0, 1, 3]);
        let r = decode_route(&PriorityVector(vec![0.0, -100.0, 50.0, 0.0]), &n, 1000.0).unwrap();
        assert_eq!(r.nodes, vec![0, 2, 3]);
    }

    #[test]
    fn prefers_goal_when_others_are_doomed() {
        // 0 - 1 (goal) direct, and 0 - 2 - 3 with 3 a leaf: 2 can still go to 3
        // in time, so the walk takes 2 by priority, then dead-ends.
        let n = net(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (0.0, 20.0)], &[(0, 1), (0, 2), (2, 3)], 1);
        let r = decode_route(&PriorityVector(vec![0.0, -100.0, 50.0, 0.0]), &n, 1000.0).unwrap();
        assert_eq!(r.nodes, vec![0, 2, 3]);
        assert_eq!(r.termination, Termination::DeadEnd);
        assert!(!r.feasible);

        // Tight budget: going to 2 leaves no time for 2 -> 3 -> ... so the goal wins.
        let r = decode_route(&PriorityVector(vec![0.0, -100.0, 50.0, 0.0]), &n, 45.0).unwrap();
        assert_eq!(r.nodes, vec![0, 1]);
        assert!(r.feasible);
    }

    #[test]
    fn time_exceeded_and_over_budget_goal() {
        let n = net(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], &[(0, 1), (1, 2)], 2);
        let r = decode_route(&PriorityVector(vec![0.0, 0.0, 0.0]), &n, 5.0).unwrap();
        assert_eq!(r.termination, Termination::TimeExceeded);
        assert_eq!(r.nodes, vec![0]);

        let n = net(&[(0.0, 0.0), (10.0, 0.0)], &[(0, 1)], 1);
        let r = decode_route(&PriorityVector(vec![0.0, 0.0]), &n, 5.0).unwrap();
        assert_eq!(r.nodes, vec![0, 1]);
        assert_eq!(r.termination, Termination::ReachedGoal);
        assert!(!r.feasible);
    }

    #[test]
    fn input_vector_untouched_and_errors() {
        let n = net(&[(0.0, 0.0), (10.0, 0.0)], &[(0, 1)], 1);
        let pv = PriorityVector(vec![1.0, 2.0]);
        let copy = pv.clone();
        decode_route(&pv, &n, 100.0).unwrap();
        assert_eq!(pv, copy);
        assert_eq!(
            decode_route(&PriorityVector(vec![1.0]), &n, 100.0),
            Err(CodecError::LengthMismatch { expected: 2, found: 1 })
        );
        assert_eq!(decode_route(&pv, &n, 0.0), Err(CodecError::InvalidBudget(0.0)));
    }

    #[test]
    fn blocked_nodes_are_skipped() {
        let n = net(&[(0.0, 0.0), (10.0, 10.0), (10.0, -10.0), (20.0, 0.0)], &[(0, 1), (0, 2), (1, 3), (2, 3)], 3);
        let mut req = PlanRequest::new(&n, 1000.0);
        req.blocked = vec![1];
        let r = decode_with(&PriorityVector(vec![0.0, 50.0, -100.0, 0.0]), &n, &req).unwrap();
        assert_eq!(r.nodes, vec![0, 2, 3]);
        req.blocked = vec![3];
        assert!(decode_with(&PriorityVector(vec![0.0; 4]), &n, &req).is_err());
    }

    #[test]
    fn route_line_round_trip() {
        let n = net(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], &[(0, 1), (1, 2)], 2);
        let r = decode_route(&PriorityVector(vec![0.0, 0.0, 0.0]), &n, 100.0).unwrap();
        assert_eq!(r.to_line(), "0,1,2|ReachedGoal|true");
        assert_eq!(Route::from_line(&r.to_line(), &n).unwrap(), r);
        assert!(Route::from_line("0,2|ReachedGoal|true", &n).is_err());
        assert!(Route::from_line("0,1|Nope|true", &n).is_err());
    }
}
