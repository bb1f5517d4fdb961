//! Independent reference computations shared by the integration tests.
//! Nothing here calls the crate's decoder or cost code; positions, tasks
//! and edges are read straight off the network.

#![allow(dead_code)]

use rand::Rng;
use taskroute::network::{OperationNetwork, Position3, TaskRanges, Waypoint};

pub fn euclid(a: Position3, b: Position3) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

/// Edge `{a, b}` looked up by scanning the edge list.
pub fn find_edge(net: &OperationNetwork, a: usize, b: usize) -> Option<usize> {
    net.edges().iter().position(|e| (e.from == a && e.to == b) || (e.from == b && e.to == a))
}

/// Flight time of a node sequence at current positions, or `None` if a leg
/// has no edge.
pub fn path_time(net: &OperationNetwork, nodes: &[usize]) -> Option<f64> {
    let mut t = 0.0;
    for w in nodes.windows(2) {
        let e = &net.edges()[find_edge(net, w[0], w[1])?];
        let d = euclid(net.waypoints()[w[0]].current, net.waypoints()[w[1]].current);
        t += d / net.vehicle_speed() + e.task.duration;
    }
    Some(t)
}

pub fn mean_risk_ratio(net: &OperationNetwork, nodes: &[usize]) -> f64 {
    let ratios: Vec<f64> = nodes
        .windows(2)
        .map(|w| {
            let task = net.edges()[find_edge(net, w[0], w[1]).expect("edge")].task;
            task.risk / task.priority
        })
        .collect();
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

/// Cost of a feasible route: `phi1 |T - Ta| / Ta + phi2 mean(xi / rho)`.
pub fn feasible_cost(net: &OperationNetwork, nodes: &[usize], phi1: f64, phi2: f64, t_available: f64) -> f64 {
    let t = path_time(net, nodes).expect("connected path");
    phi1 * (t - t_available).abs() / t_available + phi2 * mean_risk_ratio(net, nodes)
}

/// Every simple path from `start` to `goal` whose flight time is within
/// `budget`, by depth-first search.
pub fn simple_paths(net: &OperationNetwork, start: usize, goal: usize, budget: f64) -> Vec<Vec<usize>> {
    fn dfs(net: &OperationNetwork, goal: usize, budget: f64, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let here = *path.last().expect("non-empty");
        if here == goal {
            out.push(path.clone());
            return;
        }
        for next in 0..net.len() {
            if on[next] || find_edge(net, here, next).is_none() {
                continue;
            }
            path.push(next);
            if path_time(net, path).expect("edges exist") <= budget {
                on[next] = true;
                dfs(net, goal, budget, path, on, out);
                on[next] = false;
            }
            path.pop();
        }
    }
    let mut on = vec![false; net.len()];
    on[start] = true;
    let mut out = Vec::new();
    dfs(net, goal, budget, &mut vec![start], &mut on, &mut out);
    out
}

/// Random k-NN network on an open square, start 0 and goal n - 1.
pub fn random_network<R: Rng>(rng: &mut R, n: usize, k: usize, side: f64, speed: f64) -> OperationNetwork {
    let wps = (0..n)
        .map(|i| {
            Waypoint::fixed(
                i,
                Position3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side / 10.0)),
            )
        })
        .collect();
    OperationNetwork::with_knn_topology(wps, k, TaskRanges::default(), 0, n - 1, speed, rng).expect("valid network")
}

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(|Z| <= z)` by composite Simpson quadrature of the density.
pub fn central_mass(z: f64) -> f64 {
    let n = 20_000;
    let h = z / n as f64;
    let mut s = phi(0.0) + phi(z);
    for i in 1..n {
        s += phi(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * s * h / 3.0
}

/// `z` with `P(|Z| <= z) = confidence`, by bisection on the quadrature.
pub fn two_sided_z(confidence: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if central_mass(mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard deviation of N(0, sigma^2) truncated to `[-z sigma, z sigma]`.
pub fn truncated_std(sigma: f64, z: f64) -> f64 {
    sigma * (1.0 - 2.0 * z * phi(z) / central_mass(z)).sqrt()
}
