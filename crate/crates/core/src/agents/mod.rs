//! Asynchronous learning rules driven by one [`Transition`](crate::Transition)
//! per call: Watkins, Double, Maxmin, Averaged, 2RA and the linearized 2RA
//! recursion used for asymptotic analysis.

mod agent;
mod robust;
mod schedule;

pub use agent::{Agent, AgentSpec, Init, SelectorDraw, Variant};
pub use robust::{penalized_scores, robust_target};
pub use schedule::{lr_at, rho_at, Decay, LearningRateSchedule, RhoMode, RhoSchedule};
