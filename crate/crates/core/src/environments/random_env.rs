use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{build_tabular_mdp, TabularMdp};
use crate::rng::{stream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEnvSpec {
    #[serde(default = "default_states")]
    pub num_states: usize,
    #[serde(default = "default_actions")]
    pub num_actions: usize,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_states() -> usize {
    10
}
fn default_actions() -> usize {
    3
}
fn default_alpha() -> f64 {
    0.1
}
fn default_q() -> f64 {
    0.1
}
fn default_p() -> f64 {
    0.01
}
fn default_discount() -> f64 {
    0.9
}

impl Default for RandomEnvSpec {
    fn default() -> Self {
        RandomEnvSpec {
            num_states: default_states(),
            num_actions: default_actions(),
            dirichlet_alpha: default_alpha(),
            q: default_q(),
            p: default_p(),
            seed: 0,
            discount: default_discount(),
        }
    }
}

/// Symmetric Dirichlet draw as normalised Gamma variates.
fn dirichlet(len: usize, gamma: &Gamma<f64>, rng: &mut StreamRng) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            let mut row: Vec<f64> = draws.iter().map(|g| g / total).collect();
            // Absorb rounding so the row sums to 1 to machine precision.
            let drift: f64 = 1.0 - row.iter().sum::<f64>();
            let top = row
                .iter()
                .enumerate()
                .fold(0, |best, (k, &v)| if v > row[best] { k } else { best });
            row[top] += drift;
            return row;
        }
    }
}

/// Random MDP with Dirichlet transition rows and rewards
/// `r(s, a) = −q s² − p a²` over 1-based indices.
pub fn build_random_env(spec: &RandomEnvSpec) -> Result<TabularMdp> {
    if !(spec.p < spec.q) || spec.p < 0.0 {
        return Err(Error::BadCoefficients {
            p: spec.p,
            q: spec.q,
        });
    }
    if spec.num_states == 0 || spec.num_actions == 0 {
        return Err(Error::ShapeMismatch("empty state or action space".into()));
    }
    let gamma = Gamma::new(spec.dirichlet_alpha, 1.0).map_err(|e| {
        Error::EnvironmentBuild(format!("dirichlet_alpha {}: {e}", spec.dirichlet_alpha))
    })?;
    let mut rng = stream(spec.seed, "random-env/kernel");
    let (s_count, a_count) = (spec.num_states, spec.num_actions);
    let kernel: Vec<Vec<f64>> = (0..s_count * a_count)
        .map(|_| dirichlet(s_count, &gamma, &mut rng))
        .collect();
    let initial = dirichlet(s_count, &gamma, &mut rng);
    let mut reward = Vec::with_capacity(s_count * a_count);
    for s in 1..=s_count {
        for a in 1..=a_count {
            let (s, a) = (s as f64, a as f64);
            reward.push(-spec.q * s * s - spec.p * a * a);
        }
    }
    build_tabular_mdp(&kernel, &reward, spec.discount, &initial)
}
