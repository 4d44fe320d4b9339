//! Funnel control of nonlinear systems with higher relative degree.
//!
//! The crate provides the controller ([`controller`]), a family of plants in
//! functional form ([`systems`]), analysis of linear prototypes ([`linear`]),
//! closed-loop simulation ([`sim`]), a-priori error bounds ([`bounds`]) and
//! numerical verification of hypotheses and conclusions ([`verify`]).
//! Scenario files ([`scenario`]) tie these together; [`report`] writes run
//! artifacts and [`cli`] backs the `funnel` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected; index loops
// mirror the matrix formulas in the numerical kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod cli;
pub mod controller;
pub mod design;
pub mod linear;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod systems;
mod util;
pub mod verify;

pub use controller::{
    baseline_control_r2, baseline_control_r3, build_info_vector, check_initial_condition,
    funnel_control, gamma, rho, ControlAction, ControlError, Controller, InfoVector, InitialCheck,
};
pub use design::{AlphaFn, DesignError, DesignParams, FunnelFn, SwitchingFn};
