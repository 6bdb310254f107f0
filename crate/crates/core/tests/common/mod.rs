#![allow(dead_code)]

use std::path::PathBuf;

use robustq::environments::{build_random_env, RandomEnvSpec};
use robustq::{FeatureMap, TabularMdp};

/// Seeded ergodic 5-state, 2-action MDP used across the integration tests.
pub fn reference_mdp() -> TabularMdp {
    build_random_env(&RandomEnvSpec {
        num_states: 5,
        num_actions: 2,
        dirichlet_alpha: 1.0,
        q: 0.1,
        p: 0.01,
        seed: 11,
        discount: 0.8,
    })
    .expect("reference MDP")
}

pub fn reference_features() -> FeatureMap {
    FeatureMap::canonical(5, 2)
}

/// Small random ergodic MDP with dense rows.
pub fn small_mdp(states: usize, actions: usize, seed: u64, discount: f64) -> TabularMdp {
    build_random_env(&RandomEnvSpec {
        num_states: states,
        num_actions: actions,
        dirichlet_alpha: 1.0,
        q: 0.1,
        p: 0.01,
        seed,
        discount,
    })
    .expect("random MDP")
}

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
