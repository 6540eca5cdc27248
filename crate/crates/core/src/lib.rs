//! Distributed primal-dual methods for conic resource-sharing problems over
//! static and time-varying networks.

pub mod baseline;
pub mod cones;
pub mod dualbound;
pub mod error;
pub mod graphs;
pub mod metrics;
pub mod mixing;
pub mod problems;
pub mod prox;
pub mod seed;
pub mod solver;

pub use cones::Cone;
pub use error::{Error, Result};
pub use graphs::{GraphRound, GraphSchedule};
pub use prox::ProxOracle;
