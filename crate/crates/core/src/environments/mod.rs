mod baird;
mod cartpole;
mod random_env;

pub use baird::{build_baird, BairdFeatures, BairdSpec};
pub use cartpole::{
    cartpole_step, epsilon_greedy_action, CartPole, CartPoleParams, CartPoleState, Discretizer,
};
pub use random_env::{build_random_env, RandomEnvSpec};
