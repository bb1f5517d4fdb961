//! Time-budgeted, risk-aware task routing for an autonomous vehicle over a
//! drifting waypoint network.
//!
//! The pipeline: cluster a gray-scale terrain map into valid and forbidden
//! cells ([`terrain`]), sample a waypoint network on the valid cells
//! ([`network`]), encode routes as node-priority vectors decoded greedily
//! under a time budget ([`codec`]), score them ([`evaluation`]), search the
//! priority space with particle swarm or biogeography-based optimization
//! ([`pso`], [`bbo`]), fly and replan as waypoints drift ([`mission`]), and
//! run seeded Monte Carlo campaigns ([`experiment`]).

pub mod bbo;
pub mod cli;
pub mod codec;
pub mod evaluation;
pub mod exec;
pub mod experiment;
pub mod mission;
pub mod network;
pub mod planning;
pub mod pso;
pub mod terrain;
