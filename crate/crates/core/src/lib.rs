//! Device-circuit-architecture co-exploration for crossbar compute-in-memory
//! neural accelerators.
//!
//! The crate searches neural architecture, per-layer fixed-point
//! quantization, and storage-device choice with a recurrent policy-gradient
//! controller, trains candidate networks with device-variation-aware
//! training, and scores them with an analytic crossbar cost model. Results
//! accumulate in a replayable history from which Pareto frontiers of
//! accuracy vs. latency/energy/area are extracted.

pub mod controller;
pub mod cost;
pub mod data;
pub mod device;
pub mod nn;
pub mod space;
pub mod error;
pub mod pareto;
pub mod quant;
pub mod search;
pub mod tensor;

pub use error::{Error, Result};
