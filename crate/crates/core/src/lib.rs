//! Planning and control for an autonomous vehicle: a kinematic-bicycle MPC
//! with a speed-dependent steering bound, PID low-level controllers, a
//! nine-degree-of-freedom plant and a deterministic multi-rate simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod integrate;
pub mod kinematic;
pub mod mpc;
pub mod obstacle;
pub mod path;
pub mod par;
pub mod plant;
pub mod sim;
pub mod track;
pub mod velocity;

/// Standard gravity (m/s^2).
pub const GRAVITY: f64 = 9.81;
