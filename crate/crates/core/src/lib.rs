//! Simulation and learning toolkit for three-tier maritime edge offloading:
//! MIoT devices send tasks to UAVs, which compute them or relay them to vessels.

pub mod channel;
pub mod env;
pub mod error;
pub mod experiment;
pub mod hasac;
pub mod lyapunov;
pub mod nn;
pub mod queueing;
pub mod scenario;
pub mod schedulers;

pub use error::{MecError, Result};
