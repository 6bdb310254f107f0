//! Regularized Q-learning through robust averaging (2RA) together with the
//! classic baselines it is measured against, the benchmark environments, an
//! analysis toolkit for bias and asymptotic mean-squared error, and a seeded
//! experiment harness.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] and [`features`]: finite MDPs, exact reference quantities and
//!   linear feature maps.
//! * [`agents`]: the asynchronous learning rules and their step-size schedules.
//! * [`environments`]: Baird's example, random Dirichlet MDPs and CartPole.
//! * [`analysis`]: MSE/AMSE curves, bias measurement and the Lyapunov AMSE
//!   predictor.
//! * [`harness`]: configuration, parallel seeded runs and CSV/SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod analysis;
pub mod environments;
pub mod error;
pub mod features;
pub mod harness;
pub mod mdp;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use features::FeatureMap;
pub use mdp::{Policy, TabularMdp, Transition};
