//! Biogeography-based optimization over priority vectors.
//!
//! Habitats are ranked by cost; rank sets the species count `S` (best gets
//! `S_max`, worst gets 1), which sets the linear migration rates
//!
//! ```text
//! lambda_S = I * (1 - S / S_max)      mu_S = E * S / S_max
//! ```
//!
//! A species-count distribution `p` is stepped once per generation with
//! the birth-death recursion
//!
//! ```text
//! p_S' = p_S (1 - lambda_S - mu_S) + p_{S-1} lambda_{S-1} + p_{S+1} mu_{S+1}
//! ```
//!
//! and scales the per-component mutation rate
//! `m(S) = m_max * (1 - p_S) / p_max`. The `kept_habitats` best habitats
//! are never touched by migration or mutation.

use std::time::Instant;

use rand::Rng;

use crate::codec::{random_priority, PriorityVector};
use crate::exec::{map_slice, Execution};
use crate::planning::{Outcome, PlanError, PlanningProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct BboConfig {
    pub habitats: usize,
    pub kept_habitats: usize,
    pub iterations: usize,
    pub max_immigration: f64,
    pub max_emigration: f64,
    pub max_mutation: f64,
    /// Largest species count; defaults to the population size.
    pub s_max: Option<usize>,
    pub execution: Execution,
}

impl Default for BboConfig {
    fn default() -> Self {
        Self {
            habitats: 50,
            kept_habitats: 10,
            iterations: 150,
            max_immigration: 1.0,
            max_emigration: 1.0,
            max_mutation: 0.1,
            s_max: None,
            execution: Execution::default(),
        }
    }
}

impl BboConfig {
    pub fn species_max(&self) -> usize {
        self.s_max.unwrap_or(self.habitats)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.kept_habitats > 0
            && self.kept_habitats < self.habitats
            && self.iterations >= 1
            && (0.0..=1.0).contains(&self.max_mutation)
            && self.max_immigration > 0.0
            && self.max_emigration > 0.0
            && self.species_max() >= 1;
        if ok {
            Ok(())
        } else {
            Err(PlanError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Habitat {
    pub siv: PriorityVector,
    /// Cost of the decoded route; lower is more suitable.
    pub hsi: f64,
    pub species_count: usize,
    pub lambda: f64,
    pub mu: f64,
    pub p_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcosystemState {
    /// Sorted by `hsi`, best first.
    pub habitats: Vec<Habitat>,
    /// Species-count probabilities indexed by `S = 0..=S_max`.
    pub probabilities: Vec<f64>,
    pub iteration: usize,
    pub best: PriorityVector,
    pub best_cost: f64,
    pub history: Vec<f64>,
}

/// Immigration and emigration rates for species count `s`.
pub fn migration_rates(s: usize, cfg: &BboConfig) -> (f64, f64) {
    let ratio = s as f64 / cfg.species_max() as f64;
    (cfg.max_immigration * (1.0 - ratio), cfg.max_emigration * ratio)
}

/// One step of the species-count recursion, clamped non-negative and
/// renormalized.
pub fn species_prob_step(p: &[f64], cfg: &BboConfig) -> Vec<f64> {
    let rates: Vec<(f64, f64)> = (0..p.len()).map(|s| migration_rates(s, cfg)).collect();
    let mut next: Vec<f64> = (0..p.len())
        .map(|s| {
            let (lambda, mu) = rates[s];
            let mut v = p[s] * (1.0 - lambda - mu);
            if s > 0 {
                v += p[s - 1] * rates[s - 1].0;
            }
            if s + 1 < p.len() {
                v += p[s + 1] * rates[s + 1].1;
            }
            v.max(0.0)
        })
        .collect();
    let total: f64 = next.iter().sum();
    if total > 0.0 {
        for v in &mut next {
            *v /= total;
        }
    }
    next
}

pub fn mutation_rate(p_s: f64, p_max: f64, cfg: &BboConfig) -> Result<f64, PlanError> {
    if p_max.is_nan() || p_max <= 0.0 {
        return Err(PlanError::DegenerateProbability);
    }
    Ok((cfg.max_mutation * (1.0 - p_s) / p_max).clamp(0.0, 1.0))
}

/// Rank-linear species count: rank 0 gets `S_max`, the last rank gets 1.
pub fn species_for_rank(rank: usize, population: usize, s_max: usize) -> usize {
    if population <= 1 {
        return s_max;
    }
    let step = (s_max as f64 - 1.0) / (population as f64 - 1.0);
    (s_max as f64 - rank as f64 * step).round() as usize
}

fn assign_rates(state: &mut EcosystemState, cfg: &BboConfig) {
    let n = state.habitats.len();
    let s_max = cfg.species_max();
    for (rank, h) in state.habitats.iter_mut().enumerate() {
        h.species_count = species_for_rank(rank, n, s_max);
        let (lambda, mu) = migration_rates(h.species_count, cfg);
        h.lambda = lambda;
        h.mu = mu;
        h.p_s = state.probabilities[h.species_count];
    }
}

fn sort_habitats(habitats: &mut [Habitat]) {
    habitats.sort_by(|a, b| a.hsi.total_cmp(&b.hsi));
}

pub fn bbo_init<R: Rng + ?Sized>(
    cfg: &BboConfig,
    problem: &PlanningProblem<'_>,
    rng: &mut R,
    seeds: &[PriorityVector],
) -> Result<EcosystemState, PlanError> {
    cfg.validate()?;
    problem.check_seeds(seeds)?;
    let dim = problem.dimension();
    let mut sivs: Vec<PriorityVector> = seeds.iter().take(cfg.habitats).map(PriorityVector::clamped).collect();
    while sivs.len() < cfg.habitats {
        sivs.push(PriorityVector::random(dim, rng));
    }
    let costs = map_slice(cfg.execution, &sivs, |s| problem.cost(s));
    let mut habitats: Vec<Habitat> = sivs
        .into_iter()
        .zip(costs)
        .map(|(siv, hsi)| Habitat { siv, hsi, species_count: 0, lambda: 0.0, mu: 0.0, p_s: 0.0 })
        .collect();
    sort_habitats(&mut habitats);
    let s_max = cfg.species_max();
    let mut state = EcosystemState {
        best: habitats[0].siv.clone(),
        best_cost: habitats[0].hsi,
        habitats,
        probabilities: vec![1.0 / (s_max + 1) as f64; s_max + 1],
        iteration: 0,
        history: Vec::new(),
    };
    assign_rates(&mut state, cfg);
    Ok(state)
}

/// Immigration into every non-elite habitat, one SIV at a time, with the
/// source chosen by roulette over the other habitats' emigration rates.
/// Sources are read from the population as it stood before migration.
pub fn migrate<R: Rng + ?Sized>(state: &mut EcosystemState, cfg: &BboConfig, rng: &mut R) {
    let source: Vec<(Vec<f64>, f64)> = state.habitats.iter().map(|h| (h.siv.values().to_vec(), h.mu)).collect();
    let total_mu: f64 = source.iter().map(|s| s.1).sum();
    let kept = cfg.kept_habitats.min(state.habitats.len());
    for (i, h) in state.habitats.iter_mut().enumerate().skip(kept) {
        let pool = total_mu - source[i].1;
        if pool <= 0.0 {
            continue;
        }
        let lambda = h.lambda;
        let siv = h.siv.as_mut_slice();
        for (j, value) in siv.iter_mut().enumerate() {
            if rng.random::<f64>() >= lambda {
                continue;
            }
            let mut pick = rng.random::<f64>() * pool;
            let mut chosen = None;
            for (k, (_, mu)) in source.iter().enumerate() {
                if k == i || *mu <= 0.0 {
                    continue;
                }
                chosen = Some(k);
                if pick < *mu {
                    break;
                }
                pick -= mu;
            }
            if let Some(k) = chosen {
                *value = source[k].0[j];
            }
        }
    }
}

/// Redraws non-elite SIVs with probability `m(S)`.
pub fn mutate<R: Rng + ?Sized>(state: &mut EcosystemState, cfg: &BboConfig, rng: &mut R) -> Result<(), PlanError> {
    let p_max = state.probabilities.iter().copied().fold(0.0, f64::max);
    let kept = cfg.kept_habitats.min(state.habitats.len());
    for h in state.habitats.iter_mut().skip(kept) {
        let m = mutation_rate(h.p_s, p_max, cfg)?;
        if m == 0.0 {
            continue;
        }
        for value in h.siv.as_mut_slice() {
            if rng.random::<f64>() < m {
                *value = random_priority(rng);
            }
        }
    }
    Ok(())
}

/// One generation: rates, probability step, migration, mutation,
/// re-evaluation of the non-elites and re-sort.
pub fn bbo_step<R: Rng + ?Sized>(
    state: &mut EcosystemState,
    cfg: &BboConfig,
    problem: &PlanningProblem<'_>,
    rng: &mut R,
) -> Result<(), PlanError> {
    assign_rates(state, cfg);
    state.probabilities = species_prob_step(&state.probabilities, cfg);
    for h in &mut state.habitats {
        h.p_s = state.probabilities[h.species_count];
    }
    migrate(state, cfg, rng);
    mutate(state, cfg, rng)?;

    let kept = cfg.kept_habitats.min(state.habitats.len());
    let costs = map_slice(cfg.execution, &state.habitats[kept..], |h| problem.cost(&h.siv));
    for (h, cost) in state.habitats[kept..].iter_mut().zip(costs) {
        h.hsi = cost;
    }
    sort_habitats(&mut state.habitats);
    if state.habitats[0].hsi < state.best_cost {
        state.best_cost = state.habitats[0].hsi;
        state.best = state.habitats[0].siv.clone();
    }
    state.iteration += 1;
    state.history.push(state.best_cost);
    Ok(())
}

pub fn bbo_optimize<R: Rng + ?Sized>(
    cfg: &BboConfig,
    problem: &PlanningProblem<'_>,
    rng: &mut R,
    seeds: &[PriorityVector],
) -> Result<Outcome, PlanError> {
    let started = Instant::now();
    let mut state = bbo_init(cfg, problem, rng, seeds)?;
    for _ in 0..cfg.iterations {
        bbo_step(&mut state, cfg, problem, rng)?;
    }
    let route = problem.decode(&state.best);
    let metrics = problem.metrics(&route)?;
    Ok(Outcome {
        route,
        vector: state.best,
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

    fn small_net() -> OperationNetwork {
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

    fn cfg(habitats: usize, kept: usize) -> BboConfig {
        BboConfig { habitats, kept_habitats: kept, iterations: 10, execution: Execution::Sequential, ..BboConfig::default() }
    }

    #[test]
    fn rate_endpoints() {
        let c = cfg(50, 10);
        assert_eq!(migration_rates(50, &c), (0.0, 1.0));
        assert_eq!(migration_rates(0, &c), (1.0, 0.0));
        for s in 0..=50 {
            let (l, m) = migration_rates(s, &c);
            assert!((l + m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probability_step_examples() {
        let c = BboConfig { s_max: Some(1), ..cfg(2, 1) };
        let p = species_prob_step(&[0.5, 0.5], &c);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        // Vanishing rates leave p unchanged.
        let frozen = BboConfig { max_immigration: 1e-300, max_emigration: 1e-300, ..cfg(4, 1) };
        let p0 = [0.1, 0.2, 0.3, 0.25, 0.15];
        let p1 = species_prob_step(&p0, &frozen);
        for (a, b) in p0.iter().zip(&p1) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = cfg(8, 2);
        let mut p = vec![1.0 / 9.0; 9];
        for _ in 0..25 {
            p = species_prob_step(&p, &c);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn mutation_rate_examples() {
        let c = BboConfig::default();
        assert_eq!(mutation_rate(1.0, 1.0, &c).unwrap(), 0.0);
        assert!((mutation_rate(0.5, 0.5, &c).unwrap() - 0.1).abs() < 1e-15);
        assert!((mutation_rate(0.0, 0.25, &c).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(mutation_rate(0.0, 0.01, &c).unwrap(), 1.0);
        assert_eq!(mutation_rate(0.3, 0.0, &c), Err(PlanError::DegenerateProbability));
    }

    #[test]
    fn rank_species_counts() {
        assert_eq!(species_for_rank(0, 2, 2), 2);
        assert_eq!(species_for_rank(1, 2, 2), 1);
        assert_eq!((0..50).map(|r| species_for_rank(r, 50, 50)).collect::<Vec<_>>(), (1..=50).rev().collect::<Vec<_>>());
        let net = small_net();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let s = bbo_init(&cfg(2, 1), &problem, &mut ChaCha8Rng::seed_from_u64(1), &[]).unwrap();
        assert_eq!(s.habitats[0].species_count, 2);
        assert_eq!(s.habitats[1].species_count, 1);
        assert!(s.habitats[0].hsi <= s.habitats[1].hsi);
    }

    #[test]
    fn forced_migration_copies_best() {
        let net = small_net();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let c = cfg(2, 1);
        let mut s = bbo_init(&c, &problem, &mut ChaCha8Rng::seed_from_u64(4), &[]).unwrap();
        s.habitats[1].lambda = 1.0;
        migrate(&mut s, &c, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(s.habitats[1].siv, s.habitats[0].siv);
    }

    #[test]
    fn no_immigration_no_change() {
        let net = small_net();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let c = cfg(6, 2);
        let mut s = bbo_init(&c, &problem, &mut ChaCha8Rng::seed_from_u64(4), &[]).unwrap();
        for h in &mut s.habitats {
            h.lambda = 0.0;
        }
        let before = s.clone();
        migrate(&mut s, &c, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(s, before);
    }

    #[test]
    fn mutation_limits_and_elitism() {
        let net = small_net();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let none = BboConfig { max_mutation: 0.0, ..cfg(6, 2) };
        let mut s = bbo_init(&none, &problem, &mut ChaCha8Rng::seed_from_u64(4), &[]).unwrap();
        let before = s.clone();
        mutate(&mut s, &none, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(s, before);

        let all = BboConfig { max_mutation: 1.0, ..cfg(6, 2) };
        let mut s = bbo_init(&all, &problem, &mut ChaCha8Rng::seed_from_u64(4), &[]).unwrap();
        for h in &mut s.habitats {
            h.p_s = 0.0;
        }
        let before = s.clone();
        mutate(&mut s, &all, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        for (a, b) in s.habitats.iter().zip(&before.habitats).take(2) {
            assert_eq!(a.siv, b.siv);
        }
        for (a, b) in s.habitats.iter().zip(&before.habitats).skip(2) {
            assert!(a.siv.values().iter().zip(b.siv.values()).all(|(x, y)| x != y));
            assert!(a.siv.in_range());
        }
    }

    #[test]
    fn generations_preserve_elites_and_order() {
        let net = small_net();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 5000.0, ..CostConfig::default() }).unwrap();
        let c = cfg(12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = bbo_init(&c, &problem, &mut rng, &[]).unwrap();
        for _ in 0..10 {
            let elites: Vec<_> = s.habitats[..3].iter().map(|h| (h.siv.clone(), h.hsi)).collect();
            let best = s.best_cost;
            bbo_step(&mut s, &c, &problem, &mut rng).unwrap();
            for (siv, hsi) in elites {
                assert!(s.habitats.iter().any(|h| h.siv == siv && h.hsi == hsi));
            }
            assert!(s.best_cost <= best);
            assert!(s.habitats.windows(2).all(|w| w[0].hsi <= w[1].hsi));
            assert!(s.habitats.iter().all(|h| s.best_cost <= h.hsi && h.siv.in_range()));
        }
    }

    #[test]
    fn two_node_network_has_one_route() {
        let wps = vec![Waypoint::fixed(0, Position3::ZERO), Waypoint::fixed(1, Position3::new(100.0, 0.0, 0.0))];
        let edges = vec![Edge { from: 0, to: 1, task: Task::new(3.0, 30.0, 10.0) }];
        let net = OperationNetwork::from_parts(wps, edges, 0, 1, 1.0).unwrap();
        let problem = PlanningProblem::new(&net, CostConfig { t_available: 500.0, ..CostConfig::default() }).unwrap();
        let out = bbo_optimize(&cfg(4, 1), &problem, &mut ChaCha8Rng::seed_from_u64(0), &[]).unwrap();
        assert_eq!(out.route.nodes, vec![0, 1]);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
