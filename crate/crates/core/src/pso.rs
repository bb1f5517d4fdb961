//! Particle swarm optimization over priority vectors.
//!
//! Velocity update per component `j` of particle `i`:
//!
//! ```text
//! v = w(t) * v + c1 * r1 * (pbest_j - x_j) + c2 * r2 * (gbest_j - x_j)
//! x = x + v
//! ```
//!
//! with `r1, r2 ~ U(0, 1)` drawn once per particle per step, the inertia
//! `w(t)` decreasing linearly, velocities clamped to `±v_max` and
//! positions clamped to the priority range. Fitness evaluation runs in
//! parallel; every random draw happens in the serial update phase.

use std::time::Instant;

use rand::Rng;

use crate::codec::{clamp_priority, PriorityVector};
use crate::exec::{map_slice, Execution};
use crate::planning::{Outcome, PlanError, PlanningProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub v_max: f64,
    pub execution: Execution,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            particles: 150,
            iterations: 150,
            c1: 2.0,
            c2: 2.5,
            inertia_start: 1.4,
            inertia_end: 0.5,
            v_max: 60.0,
            execution: Execution::default(),
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.particles >= 1
            && self.iterations >= 1
            && self.c1 >= 0.0
            && self.c2 >= 0.0
            && self.inertia_start >= self.inertia_end
            && self.v_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlanError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: PriorityVector,
    pub velocity: Vec<f64>,
    pub cost: f64,
    pub best_position: PriorityVector,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: PriorityVector,
    pub global_best_cost: f64,
    pub iteration: usize,
    pub history: Vec<f64>,
}

/// Linearly interpolated inertia weight for `iteration` in `0..iterations`.
pub fn inertia_at(cfg: &PsoConfig, iteration: usize) -> Result<f64, PlanError> {
    if iteration >= cfg.iterations {
        return Err(PlanError::IterationOutOfRange { iteration, iterations: cfg.iterations });
    }
    if cfg.iterations == 1 {
        return Ok(cfg.inertia_start);
    }
    let frac = iteration as f64 / (cfg.iterations - 1) as f64;
    Ok(cfg.inertia_start + (cfg.inertia_end - cfg.inertia_start) * frac)
}

pub fn pso_init<R: Rng + ?Sized>(
    cfg: &PsoConfig,
    problem: &PlanningProblem<'_>,
    rng: &mut R,
    seeds: &[PriorityVector],
) -> Result<SwarmState, PlanError> {
    cfg.validate()?;
    problem.check_seeds(seeds)?;
    let dim = problem.dimension();
    let mut positions: Vec<PriorityVector> = seeds.iter().take(cfg.particles).map(PriorityVector::clamped).collect();
    while positions.len() < cfg.particles {
        positions.push(PriorityVector::random(dim, rng));
    }
    let velocities: Vec<Vec<f64>> = (0..cfg.particles)
        .map(|_| (0..dim).map(|_| rng.random_range(-cfg.v_max..=cfg.v_max)).collect())
        .collect();
    let costs = map_slice(cfg.execution, &positions, |p| problem.cost(p));

    let particles: Vec<Particle> = positions
        .into_iter()
        .zip(velocities)
        .zip(costs)
        .map(|((position, velocity), cost)| Particle {
            best_position: position.clone(),
            best_cost: cost,
            position,
            velocity,
            cost,
        })
        .collect();
    let mut best = 0;
    for (i, p) in particles.iter().enumerate().skip(1) {
        if p.best_cost < particles[best].best_cost {
            best = i;
        }
    }
    Ok(SwarmState {
        global_best: particles[best].best_position.clone(),
        global_best_cost: particles[best].best_cost,
        particles,
        iteration: 0,
        history: Vec::new(),
    })
}

pub fn pso_step<R: Rng + ?Sized>(state: &mut SwarmState, cfg: &PsoConfig, problem: &PlanningProblem<'_>, rng: &mut R) {
    let inertia = inertia_at(cfg, state.iteration.min(cfg.iterations - 1)).expect("iteration clamped into range");
    let gbest = state.global_best.values().to_vec();
    for p in &mut state.particles {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let pbest = p.best_position.values();
        let x = p.position.as_mut_slice();
        for j in 0..x.len() {
            let v = inertia * p.velocity[j] + cfg.c1 * r1 * (pbest[j] - x[j]) + cfg.c2 * r2 * (gbest[j] - x[j]);
            let v = v.clamp(-cfg.v_max, cfg.v_max);
            p.velocity[j] = v;
            x[j] = clamp_priority(x[j] + v);
        }
    }

    let costs = map_slice(cfg.execution, &state.particles, |p| problem.cost(&p.position));
    for (p, cost) in state.particles.iter_mut().zip(costs) {
        p.cost = cost;
        if cost < p.best_cost {
            p.best_cost = cost;
            p.best_position = p.position.clone();
        }
        if cost < state.global_best_cost {
            state.global_best_cost = cost;
            state.global_best = p.position.clone();
        }
    }
    state.iteration += 1;
    state.history.push(state.global_best_cost);
}

pub fn pso_optimize<R: Rng + ?Sized>(
    cfg: &PsoConfig,
    problem: &PlanningProblem<'_>,
    rng: &mut R,
    seeds: &[PriorityVector],
) -> Result<Outcome, PlanError> {
    let started = Instant::now();
    let mut state = pso_init(cfg, problem, rng, seeds)?;
    for _ in 0..cfg.iterations {
        pso_step(&mut state, cfg, problem, rng);
    }
    let route = problem.decode(&state.global_best);
    let metrics = problem.metrics(&route)?;
    Ok(Outcome {
        route,
        vector: state.global_best,
        metrics,
        history: state.history,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CostConfig;
    use crate::network::{Edge, OperationNetwork, Position3, Task, Waypoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diamond() -> OperationNetwork {
        let pts = [(0.0, 0.0), (500.0, 500.0), (500.0, -500.0), (1000.0, 0.0), (1500.0, 0.0)];
        let wps = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Waypoint::fixed(i, Position3::new(x, y, 0.0)))
            .collect();
        let e = |from, to, rho, xi| Edge { from, to, task: Task::new(rho, xi, 30.0) };
        let edges = vec![e(0, 1, 5.0, 10.0), e(0, 2, 2.0, 60.0), e(1, 3, 8.0, 20.0), e(2, 3, 3.0, 50.0), e(3, 4, 4.0, 40.0)];
        OperationNetwork::from_parts(wps, edges, 0, 4, 1.5).unwrap()
    }

    #[test]
    fn inertia_schedule() {
        let cfg = PsoConfig::default();
        assert!((inertia_at(&cfg, 0).unwrap() - 1.4).abs() < 1e-12);
        assert!((inertia_at(&cfg, 149).unwrap() - 0.5).abs() < 1e-12);
        assert!((inertia_at(&cfg, 74).unwrap() - (1.4 - 0.9 * 74.0 / 149.0)).abs() < 1e-12);
        assert!((inertia_at(&cfg, 74).unwrap() - 0.9530).abs() < 1e-4);
        assert!(inertia_at(&cfg, 150).is_err());
        let one = PsoConfig { iterations: 1, ..cfg };
        assert_eq!(inertia_at(&one, 0).unwrap(), 1.4);
    }

    #[test]
    fn single_particle_init() {
        let net = diamond();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let cfg = PsoConfig { particles: 1, ..PsoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = pso_init(&cfg, &problem, &mut rng, &[]).unwrap();
        assert_eq!(s.global_best_cost, s.particles[0].cost);
        assert!(s.particles[0].velocity.iter().all(|v| v.abs() <= cfg.v_max));
    }

    #[test]
    fn seeded_init_is_no_worse_than_seed() {
        let net = diamond();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let seed = PriorityVector::new(vec![0.0, 90.0, -150.0, 50.0, 0.0]);
        let cfg = PsoConfig { particles: 4, ..PsoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = pso_init(&cfg, &problem, &mut rng, std::slice::from_ref(&seed)).unwrap();
        assert_eq!(s.particles[0].position, seed);
        assert!(s.global_best_cost <= problem.cost(&seed));
        let bad = PriorityVector::new(vec![0.0; 3]);
        assert!(matches!(pso_init(&cfg, &problem, &mut rng, &[bad]), Err(PlanError::SeedLength { .. })));
    }

    #[test]
    fn init_is_deterministic() {
        let net = diamond();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let cfg = PsoConfig { particles: 10, ..PsoConfig::default() };
        let a = pso_init(&cfg, &problem, &mut ChaCha8Rng::seed_from_u64(8), &[]).unwrap();
        let b = pso_init(&cfg, &problem, &mut ChaCha8Rng::seed_from_u64(8), &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_inertia_translates() {
        let net = diamond();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let cfg = PsoConfig {
            particles: 3,
            iterations: 1,
            c1: 0.0,
            c2: 0.0,
            inertia_start: 1.0,
            inertia_end: 1.0,
            v_max: 60.0,
            execution: Execution::Sequential,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = pso_init(&cfg, &problem, &mut rng, &[]).unwrap();
        for p in &mut s.particles {
            p.position = PriorityVector::new(vec![0.0; 5]);
            p.velocity = vec![1.0, -2.0, 3.0, -4.0, 5.0];
        }
        pso_step(&mut s, &cfg, &problem, &mut rng);
        for p in &s.particles {
            assert_eq!(p.velocity, vec![1.0, -2.0, 3.0, -4.0, 5.0]);
            assert_eq!(p.position.values(), &[1.0, -2.0, 3.0, -4.0, 5.0]);
        }
    }

    #[test]
    fn resting_particle_stays_put() {
        let net = diamond();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let cfg = PsoConfig { particles: 1, iterations: 20, ..PsoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = pso_init(&cfg, &problem, &mut rng, &[]).unwrap();
        s.particles[0].velocity = vec![0.0; 5];
        let start = s.particles[0].position.clone();
        for _ in 0..20 {
            pso_step(&mut s, &cfg, &problem, &mut rng);
        }
        assert_eq!(s.particles[0].position, start);
        assert_eq!(s.global_best, start);
    }

    #[test]
    fn two_node_network_has_one_route() {
        let wps = vec![Waypoint::fixed(0, Position3::ZERO), Waypoint::fixed(1, Position3::new(100.0, 0.0, 0.0))];
        let edges = vec![Edge { from: 0, to: 1, task: Task::new(3.0, 30.0, 10.0) }];
        let net = OperationNetwork::from_parts(wps, edges, 0, 1, 1.0).unwrap();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 500.0, ..CostConfig::default() }).unwrap();
        let cfg = PsoConfig { particles: 5, iterations: 5, ..PsoConfig::default() };
        let out = pso_optimize(&cfg, &problem, &mut ChaCha8Rng::seed_from_u64(0), &[]).unwrap();
        assert_eq!(out.route.nodes, vec![0, 1]);
        assert!(out.metrics.feasible);
        assert_eq!(out.history.len(), 5);
    }
}
