//! Virtual-gang scheduling of parallel real-time tasks.
//!
//! Rigid gang tasks are grouped into virtual gangs that run one at a time
//! under fixed priorities. The crate forms gangs (exhaustively or greedily),
//! inflates WCETs for co-runner interference, analyzes schedulability with
//! response-time analysis, and simulates several gang and thread-level
//! schedulers on a discrete time line.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod gangform;
pub mod generator;
pub mod interference;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
