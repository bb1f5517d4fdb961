//! Operation network: waypoints, task-bearing edges and bounded drift of the
//! dynamic (sensor) waypoints.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use petgraph::unionfind::UnionFind;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use thiserror::Error;

use crate::terrain::TerrainGrid;

/// Rejection attempts per waypoint before giving up (sampling) or keeping
/// the previous position (drift).
pub const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("no valid terrain position found after {attempts} attempts for waypoint {id}")]
    InfeasibleTerrain { id: usize, attempts: usize },
    #[error("no edge between waypoints {0} and {1}")]
    NoSuchEdge(usize, usize),
    #[error("unknown waypoint id {0}")]
    UnknownWaypoint(usize),
    #[error("snapshot has {found} positions, network has {expected} waypoints")]
    InvalidSnapshot { expected: usize, found: usize },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("network document {path}: {message}")]
    Document { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const ZERO: Position3 = Position3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.distance(&Position3::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn axes(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn from_axes(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaypointKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: usize,
    pub base: Position3,
    pub current: Position3,
    pub kind: WaypointKind,
    /// Per-axis standard deviation of the drift process.
    pub sigma: Position3,
    /// Per-axis drift half-widths; zero for static waypoints.
    pub bound: Position3,
}

impl Waypoint {
    pub fn fixed(id: usize, position: Position3) -> Self {
        Self {
            id,
            base: position,
            current: position,
            kind: WaypointKind::Static,
            sigma: Position3::ZERO,
            bound: Position3::ZERO,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        self.kind == WaypointKind::Dynamic
    }
}

/// Edge task: priority `rho`, risk percentage `xi`, completion time `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub priority: f64,
    pub risk: f64,
    pub duration: f64,
}

impl Task {
    pub fn new(priority: f64, risk: f64, duration: f64) -> Self {
        Self { priority, risk, duration }
    }

    /// Benefit ratio rho / xi.
    pub fn weight(&self) -> f64 {
        self.priority / self.risk
    }

    /// Risk ratio xi / rho.
    pub fn risk_ratio(&self) -> f64 {
        self.risk / self.priority
    }

    fn validate(&self) -> Result<(), String> {
        let ok = self.priority > 0.0
            && self.priority.is_finite()
            && self.risk > 0.0
            && self.risk <= 100.0
            && self.duration >= 0.0
            && self.duration.is_finite();
        if ok {
            Ok(())
        } else {
            Err(format!("task {self:?} out of range"))
        }
    }
}

impl Default for Task {
    fn default() -> Self {
        Self::new(1.0, 100.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub task: Task,
}

impl Edge {
    pub fn other(&self, id: usize) -> usize {
        if self.from == id {
            self.to
        } else {
            self.from
        }
    }

    fn key(&self) -> (usize, usize) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRanges {
    pub priority: (f64, f64),
    pub risk: (f64, f64),
    pub duration: (f64, f64),
}

impl Default for TaskRanges {
    fn default() -> Self {
        Self { priority: (1.0, 10.0), risk: (5.0, 100.0), duration: (60.0, 600.0) }
    }
}

impl TaskRanges {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let ok = ordered(self.priority)
            && ordered(self.risk)
            && ordered(self.duration)
            && self.priority.0 > 0.0
            && self.risk.0 > 0.0
            && self.risk.1 <= 100.0
            && self.duration.0 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(NetworkError::InvalidParameter(format!("task ranges {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Task {
        Task::new(uniform(rng, self.priority), uniform(rng, self.risk), uniform(rng, self.duration))
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Graph of waypoints and task edges with a fixed start and goal.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationNetwork {
    waypoints: Vec<Waypoint>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    start_id: usize,
    goal_id: usize,
    vehicle_speed: f64,
    k_neighbors: usize,
    task_ranges: TaskRanges,
}

/// Serialized form of [`OperationNetwork`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkDocument {
    start: usize,
    goal: usize,
    vehicle_speed: f64,
    k_neighbors: usize,
    task_ranges: TaskRanges,
    waypoints: Vec<Waypoint>,
    edges: Vec<Edge>,
}

impl OperationNetwork {
    /// Assembles a network from explicit edges, checking every structural
    /// invariant. Edges are canonicalized to `from < to` and sorted.
    pub fn from_parts(
        waypoints: Vec<Waypoint>,
        edges: Vec<Edge>,
        start_id: usize,
        goal_id: usize,
        vehicle_speed: f64,
    ) -> Result<Self, NetworkError> {
        let mut net = Self {
            waypoints,
            edges: Vec::new(),
            adjacency: Vec::new(),
            start_id,
            goal_id,
            vehicle_speed,
            k_neighbors: 5,
            task_ranges: TaskRanges::default(),
        };
        net.validate_nodes()?;
        net.set_edges(edges)?;
        if !net.reachable(start_id, goal_id) {
            return Err(NetworkError::Invalid(format!("goal {goal_id} unreachable from start {start_id}")));
        }
        Ok(net)
    }

    /// kNN + spanning-repair topology over the current positions, with
    /// tasks drawn from `task_ranges`.
    pub fn with_knn_topology<R: Rng + ?Sized>(
        waypoints: Vec<Waypoint>,
        k_neighbors: usize,
        task_ranges: TaskRanges,
        start_id: usize,
        goal_id: usize,
        vehicle_speed: f64,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if waypoints.len() < 2 || k_neighbors == 0 {
            return Err(NetworkError::InvalidParameter("need >= 2 waypoints and k >= 1".into()));
        }
        task_ranges.validate()?;
        let positions: Vec<Position3> = waypoints.iter().map(|w| w.current).collect();
        let edges = build_adjacency(&positions, k_neighbors)
            .into_iter()
            .map(|(from, to)| Edge { from, to, task: Task::default() })
            .collect();
        let mut net = Self::from_parts(waypoints, edges, start_id, goal_id, vehicle_speed)?;
        net.k_neighbors = k_neighbors;
        net.task_ranges = task_ranges;
        net.assign_tasks(task_ranges, rng)?;
        Ok(net)
    }

    fn validate_nodes(&self) -> Result<(), NetworkError> {
        let n = self.waypoints.len();
        if n < 2 {
            return Err(NetworkError::Invalid("fewer than two waypoints".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if w.id != i {
                return Err(NetworkError::Invalid(format!("waypoint at index {i} has id {}", w.id)));
            }
            if !(w.base.is_finite() && w.current.is_finite() && w.bound.is_finite() && w.sigma.is_finite()) {
                return Err(NetworkError::Invalid(format!("waypoint {i} has non-finite coordinates")));
            }
            if w.kind == WaypointKind::Static && w.current != w.base {
                return Err(NetworkError::Invalid(format!("static waypoint {i} moved off its base")));
            }
        }
        if self.start_id >= n || self.goal_id >= n || self.start_id == self.goal_id {
            return Err(NetworkError::Invalid(format!(
                "start {} / goal {} invalid for {n} waypoints",
                self.start_id, self.goal_id
            )));
        }
        if !(self.vehicle_speed > 0.0 && self.vehicle_speed.is_finite()) {
            return Err(NetworkError::Invalid(format!("vehicle speed {} must be positive", self.vehicle_speed)));
        }
        Ok(())
    }

    fn set_edges(&mut self, edges: Vec<Edge>) -> Result<(), NetworkError> {
        let n = self.waypoints.len();
        let mut seen = BTreeSet::new();
        let mut canonical = Vec::with_capacity(edges.len());
        for e in edges {
            if e.from >= n || e.to >= n {
                return Err(NetworkError::UnknownWaypoint(e.from.max(e.to)));
            }
            if e.from == e.to {
                return Err(NetworkError::Invalid(format!("self-loop at {}", e.from)));
            }
            e.task.validate().map_err(NetworkError::Invalid)?;
            let (from, to) = e.key();
            if !seen.insert((from, to)) {
                return Err(NetworkError::Invalid(format!("duplicate edge {from}-{to}")));
            }
            canonical.push(Edge { from, to, task: e.task });
        }
        canonical.sort_by_key(|e| (e.from, e.to));
        let mut adjacency = vec![Vec::new(); n];
        for (idx, e) in canonical.iter().enumerate() {
            adjacency[e.from].push((e.to, idx));
            adjacency[e.to].push((e.from, idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        self.edges = canonical;
        self.adjacency = adjacency;
        Ok(())
    }

    fn reachable(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.waypoints.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn waypoint(&self, id: usize) -> &Waypoint {
        &self.waypoints[id]
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    /// `(neighbor id, edge index)` pairs, sorted by neighbor id.
    pub fn neighbors(&self, id: usize) -> &[(usize, usize)] {
        &self.adjacency[id]
    }

    pub fn start_id(&self) -> usize {
        self.start_id
    }

    pub fn goal_id(&self) -> usize {
        self.goal_id
    }

    pub fn vehicle_speed(&self) -> f64 {
        self.vehicle_speed
    }

    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub fn task_ranges(&self) -> TaskRanges {
        self.task_ranges
    }

    pub fn position(&self, id: usize) -> Position3 {
        self.waypoints[id].current
    }

    pub fn set_endpoints(&mut self, start_id: usize, goal_id: usize) -> Result<(), NetworkError> {
        let (old_start, old_goal) = (self.start_id, self.goal_id);
        self.start_id = start_id;
        self.goal_id = goal_id;
        let ok = self.validate_nodes().and_then(|_| {
            if self.reachable(start_id, goal_id) {
                Ok(())
            } else {
                Err(NetworkError::Invalid(format!("goal {goal_id} unreachable from {start_id}")))
            }
        });
        if ok.is_err() {
            self.start_id = old_start;
            self.goal_id = old_goal;
        }
        ok
    }

    pub fn set_topology_params(&mut self, k_neighbors: usize, task_ranges: TaskRanges) -> Result<(), NetworkError> {
        if k_neighbors == 0 {
            return Err(NetworkError::InvalidParameter("k_neighbors must be >= 1".into()));
        }
        task_ranges.validate()?;
        self.k_neighbors = k_neighbors;
        self.task_ranges = task_ranges;
        Ok(())
    }

    pub fn edge_between(&self, i: usize, j: usize) -> Option<usize> {
        let list = self.adjacency.get(i)?;
        list.binary_search_by_key(&j, |&(n, _)| n).ok().map(|k| list[k].1)
    }

    pub fn edge_distance(&self, i: usize, j: usize) -> Result<f64, NetworkError> {
        self.edge_between(i, j)
            .map(|_| self.position(i).distance(&self.position(j)))
            .ok_or(NetworkError::NoSuchEdge(i, j))
    }

    /// Leg time: distance over vehicle speed plus the edge's task duration.
    pub fn edge_traversal_time(&self, i: usize, j: usize) -> Result<f64, NetworkError> {
        let idx = self.edge_between(i, j).ok_or(NetworkError::NoSuchEdge(i, j))?;
        Ok(self.edge_time(idx))
    }

    pub fn edge_length(&self, idx: usize) -> f64 {
        let e = &self.edges[idx];
        self.position(e.from).distance(&self.position(e.to))
    }

    pub fn edge_time(&self, idx: usize) -> f64 {
        self.edge_length(idx) / self.vehicle_speed + self.edges[idx].task.duration
    }

    /// Redraws every edge's task independently from `ranges`.
    pub fn assign_tasks<R: Rng + ?Sized>(&mut self, ranges: TaskRanges, rng: &mut R) -> Result<(), NetworkError> {
        ranges.validate()?;
        for e in &mut self.edges {
            e.task = ranges.sample(rng);
        }
        Ok(())
    }

    /// Marks `ids` as dynamic with drift half-width `z_c * sigma` per axis,
    /// where `z_c` is the two-sided standard-normal quantile of
    /// `confidence`.
    pub fn make_dynamic(&mut self, ids: &[usize], sigma: Position3, confidence: f64) -> Result<(), NetworkError> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.waypoints.len()) {
            return Err(NetworkError::UnknownWaypoint(bad));
        }
        make_dynamic(&mut self.waypoints, ids, sigma, confidence)
    }

    /// Current positions, for later [`deformation_since`](Self::deformation_since) checks.
    pub fn snapshot(&self) -> Vec<Position3> {
        self.waypoints.iter().map(|w| w.current).collect()
    }

    /// Redraws every dynamic waypoint's offset from its base.
    pub fn perturb_dynamic<R: Rng + ?Sized>(&mut self, terrain: &TerrainGrid, rng: &mut R) -> DriftSummary {
        let mut drifts = Vec::new();
        for w in self.waypoints.iter_mut().filter(|w| w.is_dynamic()) {
            let previous = w.current;
            for _ in 0..REJECTION_CAP {
                let offset = Position3::from_axes(
                    [0, 1, 2].map(|a| sample_truncated_normal(w.sigma.axes()[a], w.bound.axes()[a], rng)),
                );
                let candidate = Position3::new(w.base.x + offset.x, w.base.y + offset.y, w.base.z + offset.z);
                if terrain.is_valid_position(candidate.x, candidate.y) {
                    w.current = candidate;
                    break;
                }
            }
            drifts.push(Drift { id: w.id, magnitude: previous.distance(&w.current) });
        }
        DriftSummary { drifts }
    }

    /// Moves one dynamic waypoint to an explicit offset from its base.
    /// The offset must respect the waypoint's bound.
    pub fn displace(&mut self, id: usize, offset: Position3) -> Result<f64, NetworkError> {
        let w = self.waypoints.get_mut(id).ok_or(NetworkError::UnknownWaypoint(id))?;
        if !w.is_dynamic() {
            return Err(NetworkError::InvalidParameter(format!("waypoint {id} is static")));
        }
        let within = offset.x.abs() <= w.bound.x && offset.y.abs() <= w.bound.y && offset.z.abs() <= w.bound.z;
        if !within {
            return Err(NetworkError::InvalidParameter(format!("offset {offset:?} exceeds bound {:?}", w.bound)));
        }
        let previous = w.current;
        w.current = Position3::new(w.base.x + offset.x, w.base.y + offset.y, w.base.z + offset.z);
        Ok(previous.distance(&w.current))
    }

    pub fn deformation_since(&self, reference: &[Position3]) -> Result<Deformation, NetworkError> {
        if reference.len() != self.waypoints.len() {
            return Err(NetworkError::InvalidSnapshot { expected: self.waypoints.len(), found: reference.len() });
        }
        let drifts: Vec<Drift> = self
            .waypoints
            .iter()
            .filter(|w| w.is_dynamic())
            .map(|w| Drift { id: w.id, magnitude: reference[w.id].distance(&w.current) })
            .collect();
        let max_drift = drifts.iter().map(|d| d.magnitude).fold(0.0, f64::max);
        let adjacency_changed =
            max_drift > 0.0 && build_adjacency(reference, self.k_neighbors) != build_adjacency(&self.snapshot(), self.k_neighbors);
        Ok(Deformation { max_drift, drifts, adjacency_changed })
    }

    /// Rebuilds the kNN topology on current positions. Surviving pairs keep
    /// their tasks; new pairs draw fresh ones. Returns whether the edge set
    /// changed.
    pub fn rebuild_adjacency<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool, NetworkError> {
        let pairs = build_adjacency(&self.snapshot(), self.k_neighbors);
        let old: BTreeMap<(usize, usize), Task> = self.edges.iter().map(|e| (e.key(), e.task)).collect();
        if pairs.len() == old.len() && pairs.iter().all(|p| old.contains_key(p)) {
            return Ok(false);
        }
        let edges = pairs
            .into_iter()
            .map(|(from, to)| {
                let task = old.get(&(from, to)).copied().unwrap_or_else(|| self.task_ranges.sample(rng));
                Edge { from, to, task }
            })
            .collect();
        self.set_edges(edges)?;
        Ok(true)
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDocument {
            start: self.start_id,
            goal: self.goal_id,
            vehicle_speed: self.vehicle_speed,
            k_neighbors: self.k_neighbors,
            task_ranges: self.task_ranges,
            waypoints: self.waypoints.clone(),
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let doc: NetworkDocument = serde_json::from_str(text)
            .map_err(|e| NetworkError::Document { path: "<memory>".into(), message: e.to_string() })?;
        let mut net = Self::from_parts(doc.waypoints, doc.edges, doc.start, doc.goal, doc.vehicle_speed)?;
        net.set_topology_params(doc.k_neighbors, doc.task_ranges)?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| NetworkError::Document { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::Document { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text).map_err(|e| match e {
            NetworkError::Document { message, .. } => {
                NetworkError::Document { path: path.display().to_string(), message }
            }
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub id: usize,
    pub magnitude: f64,
}

/// Per-waypoint displacement produced by one drift event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftSummary {
    pub drifts: Vec<Drift>,
}

impl DriftSummary {
    pub fn max(&self) -> f64 {
        self.drifts.iter().map(|d| d.magnitude).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub max_drift: f64,
    pub drifts: Vec<Drift>,
    pub adjacency_changed: bool,
}

/// Two-sided standard-normal quantile: `z` with `P(|Z| <= z) = confidence`.
pub fn two_sided_quantile(confidence: f64) -> Result<f64, NetworkError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(NetworkError::InvalidParameter(format!("confidence {confidence} not in (0, 1)")));
    }
    let std = StdNormal::new(0.0, 1.0).expect("unit normal");
    Ok(std.inverse_cdf(0.5 + confidence / 2.0))
}

pub fn make_dynamic(
    waypoints: &mut [Waypoint],
    ids: &[usize],
    sigma: Position3,
    confidence: f64,
) -> Result<(), NetworkError> {
    if !(sigma.is_finite() && sigma.x >= 0.0 && sigma.y >= 0.0 && sigma.z >= 0.0) {
        return Err(NetworkError::InvalidParameter(format!("sigma {sigma:?} must be non-negative")));
    }
    let z = two_sided_quantile(confidence)?;
    for &id in ids {
        let w = waypoints
            .iter_mut()
            .find(|w| w.id == id)
            .ok_or(NetworkError::UnknownWaypoint(id))?;
        w.kind = WaypointKind::Dynamic;
        w.sigma = sigma;
        w.bound = Position3::new(z * sigma.x, z * sigma.y, z * sigma.z);
    }
    Ok(())
}

/// Draws from N(0, sigma^2) restricted to `[-bound, bound]` by rejection.
pub fn sample_truncated_normal<R: Rng + ?Sized>(sigma: f64, bound: f64, rng: &mut R) -> f64 {
    if sigma <= 0.0 || bound <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for _ in 0..REJECTION_CAP {
        let v = normal.sample(rng);
        if v.abs() <= bound {
            return v;
        }
    }
    0.0
}

/// Static waypoints with each axis uniform on `[0, extent)`, rejected until
/// the planar position lies on water.
pub fn sample_static_waypoints<R: Rng + ?Sized>(
    count: usize,
    terrain: &TerrainGrid,
    extent: Position3,
    rng: &mut R,
) -> Result<Vec<Waypoint>, NetworkError> {
    if count < 2 {
        return Err(NetworkError::InvalidParameter("need at least two waypoints".into()));
    }
    if !(extent.is_finite() && extent.x > 0.0 && extent.y > 0.0 && extent.z >= 0.0) {
        return Err(NetworkError::InvalidParameter(format!("extent {extent:?}")));
    }
    let axis = |rng: &mut R, e: f64| if e > 0.0 { rng.random_range(0.0..e) } else { 0.0 };
    (0..count)
        .map(|id| {
            for _ in 0..REJECTION_CAP {
                let p = Position3::new(axis(rng, extent.x), axis(rng, extent.y), axis(rng, extent.z));
                if terrain.is_valid_position(p.x, p.y) {
                    return Ok(Waypoint::fixed(id, p));
                }
            }
            Err(NetworkError::InfeasibleTerrain { id, attempts: REJECTION_CAP })
        })
        .collect()
}

/// Undirected k-nearest-neighbor pairs `(i, j)` with `i < j`, sorted.
/// Disconnected components are joined Kruskal-style with the shortest
/// bridging pairs.
pub fn build_adjacency(positions: &[Position3], k_neighbors: usize) -> Vec<(usize, usize)> {
    let n = positions.len();
    let mut pairs = BTreeSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let d = |j: &usize| positions[i].distance(&positions[*j]);
        order.sort_by(|a, b| d(a).total_cmp(&d(b)).then(a.cmp(b)));
        for &j in order.iter().take(k_neighbors) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }

    let mut uf = UnionFind::<usize>::new(n);
    let mut components = n;
    for &(i, j) in &pairs {
        if uf.union(i, j) {
            components -= 1;
        }
    }
    if components > 1 {
        let mut bridges: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !uf.equiv(i, j))
            .map(|(i, j)| (positions[i].distance(&positions[j]), i, j))
            .collect();
        bridges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for (_, i, j) in bridges {
            if components == 1 {
                break;
            }
            if uf.union(i, j) {
                pairs.insert((i, j));
                components -= 1;
            }
        }
    }
    pairs.into_iter().collect()
}
