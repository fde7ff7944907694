//! Simulation, control tuning and techno-economic evaluation of a
//! grid-connected hybrid PV and wind plant.

// Validation is written as `!(x >= lo)` on purpose so NaN fails it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod econ;
pub mod pso;
pub mod pv;
pub mod pv_chain;
pub mod sim;
pub mod tuning;
pub mod weather;
pub mod wind;
