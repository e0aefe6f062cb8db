//! Adaptive step skipping for flow-matching samplers.
//!
//! A flow-matching sampler integrates `dx/dt = v(x, t)` from noise at `t = 0`
//! to data at `t = 1` with forward Euler. Every velocity evaluation is a model
//! forward pass. This crate replaces some of those evaluations with a
//! first-order finite-difference extrapolation of past velocities, and lets a
//! per-timestep UCB bandit learn, across generations, how many steps may be
//! extrapolated before the next real evaluation.
//!
//! Modules:
//! - [`fields`]: velocity-field trait, analytic fixtures with known smoothness
//!   constants, evaluation counting, source/target samplers.
//! - [`toyfm`]: a small tanh MLP trained by conditional flow matching.
//! - [`solver`]: full Euler, the bandit-driven sampler, static baselines and
//!   the linear-multistep closed form.
//! - [`bandit`]: UCB agents, the per-timestep registry, rewards, regret and
//!   expected-skip analytics.
//! - [`analysis`]: global error bound, deviation metrics, rel-L1 diagnostics
//!   and adaptivity reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod bandit;
mod error;
pub mod fields;
pub mod solver;
pub mod toyfm;
pub(crate) mod vecops;

pub use error::{Error, Result};

pub use analysis::{BoundReport, RunMetrics};
pub use bandit::{BanditRegistry, RewardParams, UcbAgent};
pub use fields::{AnalyticField, CountingField, FieldKind, SmoothnessBounds, TimeDerivative, VelocityField};
pub use solver::{DeltaTSemantics, FastFlowConfig, JumpMode, TimeGrid, TrajectoryRecord};
pub use toyfm::{MlpField, TrainConfig};
