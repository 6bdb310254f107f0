use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{build_tabular_mdp, TabularMdp};
use crate::rng::stream;

pub const BAIRD_STATES: usize = 6;
pub const BAIRD_ACTIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum BairdFeatures {
    /// One-hot over the 12 state-action pairs.
    Canonical,
    /// Row-major `12 × 12` matrix, column `x = s·2 + a` is `φ(s, a)`.
    Custom { matrix: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BairdSpec {
    #[serde(default = "default_low")]
    pub reward_low: f64,
    #[serde(default = "default_high")]
    pub reward_high: f64,
    #[serde(default = "default_features")]
    pub features: BairdFeatures,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_low() -> f64 {
    -0.05
}
fn default_high() -> f64 {
    0.05
}
fn default_features() -> BairdFeatures {
    BairdFeatures::Canonical
}
fn default_discount() -> f64 {
    0.8
}

impl Default for BairdSpec {
    fn default() -> Self {
        BairdSpec {
            reward_low: default_low(),
            reward_high: default_high(),
            features: default_features(),
            seed: 0,
            discount: default_discount(),
        }
    }
}

/// Baird's six-state example: action 0 jumps to a uniformly random state,
/// action 1 always leads to the last state.
pub fn build_baird(spec: &BairdSpec) -> Result<(TabularMdp, FeatureMap)> {
    if !(spec.reward_low <= spec.reward_high) {
        return Err(Error::BadBounds {
            low: spec.reward_low,
            high: spec.reward_high,
        });
    }
    let mut kernel = Vec::with_capacity(BAIRD_STATES * BAIRD_ACTIONS);
    for _ in 0..BAIRD_STATES {
        kernel.push(vec![1.0 / BAIRD_STATES as f64; BAIRD_STATES]);
        let mut jump = vec![0.0; BAIRD_STATES];
        jump[BAIRD_STATES - 1] = 1.0;
        kernel.push(jump);
    }
    let mut rng = stream(spec.seed, "baird/rewards");
    let width = spec.reward_high - spec.reward_low;
    let reward: Vec<f64> = (0..BAIRD_STATES * BAIRD_ACTIONS)
        .map(|_| spec.reward_low + width * rng.random::<f64>())
        .collect();
    let initial = vec![1.0 / BAIRD_STATES as f64; BAIRD_STATES];
    let mdp = build_tabular_mdp(&kernel, &reward, spec.discount, &initial)?;
    let pairs = BAIRD_STATES * BAIRD_ACTIONS;
    let features = match &spec.features {
        BairdFeatures::Canonical => FeatureMap::canonical(BAIRD_STATES, BAIRD_ACTIONS),
        BairdFeatures::Custom { matrix } => {
            FeatureMap::from_row_major(pairs, pairs, matrix.clone())?
        }
    };
    Ok((mdp, features))
}
