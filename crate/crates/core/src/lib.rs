//! Tiltrotor VTOL flight model, control allocation with actuator-failure handling,
//! feasible wrench-set analysis and a closed-loop scenario simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allocator;
pub mod config;
pub mod model;
pub mod params;
pub mod wrench_space;
pub mod sim;
