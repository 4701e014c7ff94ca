//! Power-system dynamic simulation of the classical swing + network DAE
//! model, discretized by Backward Euler and solved three ways:
//!
//! * [`sim_di`]: direct integration, one full Newton solve per step;
//! * [`sim_wr`]: waveform relaxation over the whole horizon, Gauss-Jacobi
//!   or Gauss-Seidel;
//! * [`sim_wrw`]: waveform relaxation with windowing.
//!
//! The bundled IEEE New England 39-bus system is available through
//! [`grid_model::GridModel::ne39`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dae_core;
pub mod error;
pub mod grid_model;
pub mod metrics;
pub mod network;
pub mod newton;
pub mod powerflow;
pub mod scenario;
pub mod sim_di;
pub mod sim_wr;
pub mod sim_wrw;
pub mod trajectory;

pub use dae_core::{DaeModel, StatePoint, StepResidualContext};
pub use error::SimError;
pub use grid_model::{Disturbance, DisturbanceAction, GridModel, Partition};
pub use scenario::{Method, PartitionRef, PreparedCase, Scenario};
pub use sim_wr::{Mode, WrConfig};
pub use sim_wrw::WindowPlan;
pub use trajectory::Trajectory;
