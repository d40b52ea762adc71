//! Mobility-aware service chain placement on vehicular fog clusters.

pub mod mobility;
pub mod rng;
pub mod traffic_flow;
pub mod cluster;
pub mod experiments;
pub mod placement_eval;
pub mod routing;
pub mod service_model;
pub mod solver;
