//! Bias and AMSE studies driven by a config's optional sections.

use rayon::prelude::*;

use super::config::{BuiltEnvironment, ExperimentConfig};
use crate::agents::{AgentSpec, Decay, Init, Variant};
use crate::analysis::{
    build_asymptotic_model, lyapunov_amse, measure_bias, mse_to_optimal, watkins_amse,
    AsymptoticModel, BiasReport, BiasSetup,
};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{solve_optimal_q, Policy, TabularMdp};
use crate::rng::stream;
use crate::simulate::Trajectory;

/// `Q*` for canonical features; otherwise the fixed point `θ*` of the
/// projected equation under the uniform behaviour policy.
pub fn reference_parameters(mdp: &TabularMdp, features: &FeatureMap) -> Result<Vec<f64>> {
    if features.is_canonical() {
        return Ok(solve_optimal_q(mdp, 1e-13));
    }
    let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let noise = crate::analysis::sigma_b_series(mdp, &behavior, features, 1e-6)?;
    Ok(noise.theta_star.iter().copied().collect())
}

/// State whose optimal action values are closest together.
pub fn smallest_gap_state(mdp: &TabularMdp) -> usize {
    let q = solve_optimal_q(mdp, 1e-13);
    let na = mdp.num_actions();
    let gap = |row: &[f64]| {
        let mut sorted = row.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted.len() > 1 {
            sorted[0] - sorted[1]
        } else {
            f64::INFINITY
        }
    };
    q.chunks(na)
        .enumerate()
        .fold((0, f64::INFINITY), |best, (s, row)| {
            let g = gap(row);
            if g < best.1 {
                (s, g)
            } else {
                best
            }
        })
        .0
}

fn mdp_of(config: &ExperimentConfig) -> Result<(TabularMdp, FeatureMap)> {
    match config.environment.build(config.discount)? {
        BuiltEnvironment::Mdp { mdp, features } => Ok((mdp, features)),
        BuiltEnvironment::CartPole(_) => Err(Error::Validation(vec![
            "environment: this study needs a finite MDP".into(),
        ])),
    }
}

/// One [`BiasReport`] per configured agent.
pub fn run_bias(config: &ExperimentConfig) -> Result<Vec<BiasReport>> {
    let bias = config
        .bias
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["bias: section missing".into()]))?;
    let (mdp, features) = mdp_of(config)?;
    let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let next_state = bias.next_state.unwrap_or_else(|| smallest_gap_state(&mdp));
    config
        .agents
        .iter()
        .enumerate()
        .map(|(j, agent)| {
            let spec = agent.spec();
            let rho = bias.rho.unwrap_or_else(|| {
                if agent.variant == Variant::TwoRa {
                    agent.rho().at(bias.n_snapshot)
                } else {
                    0.0
                }
            });
            let setup = BiasSetup {
                mdp: &mdp,
                features: &features,
                behavior: &behavior,
                next_state,
                n_snapshot: bias.n_snapshot,
                rho,
                num_runs: bias.num_runs,
                master_seed: config.master_seed.wrapping_add(j as u64),
            };
            let mut report = measure_bias(&setup, |rng| {
                spec.build(features.dim(), mdp.num_actions(), mdp.discount(), rng)
            })?;
            report.method = agent.id.clone();
            Ok(report)
        })
        .collect()
}

/// Analytic and empirical asymptotic error of the averaged estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct AmseComparison {
    pub copies: usize,
    pub g: f64,
    pub g0: f64,
    pub predicted_trace: f64,
    /// The single-iterate equation's trace.
    pub watkins_trace: f64,
    pub empirical_trace: f64,
    pub empirical_se: f64,
    pub steps: u64,
    pub num_seeds: usize,
}

impl AmseComparison {
    pub const CSV_HEADER: &'static str = "method,N,rho,n,predicted_trace,empirical_trace";

    pub fn csv_rows(&self) -> String {
        format!(
            "twora-linearized,{},{:.16e},{},{:.16e},{:.16e}\nwatkins,1,{:.16e},{},{:.16e},\n",
            self.copies,
            0.0,
            self.steps,
            self.predicted_trace,
            self.empirical_trace,
            0.0,
            self.steps,
            self.watkins_trace
        )
    }
}

/// `n · mean ‖θ̂_n − θ*‖²` of the linearized recursion with
/// `α_n = N g / n`, started at `θ*` with the step counter at
/// `n₀ = ⌈2 N g⌉`. Returns `(value, standard error)`.
pub fn empirical_linearized_amse(
    mdp: &TabularMdp,
    features: &FeatureMap,
    model: &AsymptoticModel,
    steps: u64,
    num_seeds: usize,
    master_seed: u64,
) -> Result<(f64, f64)> {
    let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let theta_star: Vec<f64> = model.noise.theta_star.iter().copied().collect();
    let n = model.copies;
    let n0 = (2.0 * n as f64 * model.g).ceil() as u64;
    if steps <= n0 {
        return Err(Error::Validation(vec![format!(
            "amse.steps: must exceed the burn-in counter {n0}"
        )]));
    }
    let spec = AgentSpec::new(Variant::TwoRaLinearized, n, model.g, 1.0)
        .with_decay(Decay::Harmonic)
        .with_init(
            Init::Given {
                theta: theta_star.clone(),
            },
            true,
        )
        .with_pi_star(model.noise.pi_star.clone());
    let errors: Vec<f64> = (0..num_seeds)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut agent = spec
                .build(
                    features.dim(),
                    mdp.num_actions(),
                    mdp.discount(),
                    &mut stream(master_seed, "amse/init"),
                )?
                .with_step_counter(n0);
            let mut env_rng = stream(master_seed, &format!("amse/{k}/env"));
            let mut agent_rng = stream(master_seed, &format!("amse/{k}/agent"));
            let mut traj = Trajectory::start(mdp, &behavior, &mut env_rng);
            traj.train(
                &mut agent,
                features,
                steps - n0,
                &mut env_rng,
                &mut agent_rng,
            )?;
            mse_to_optimal(&agent.estimate(), &theta_star)
        })
        .collect::<Result<_>>()?;
    let runs = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / runs;
    let var = if errors.len() > 1 {
        errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (runs - 1.0)
    } else {
        0.0
    };
    Ok((steps as f64 * mean, steps as f64 * (var / runs).sqrt()))
}

pub fn run_amse(config: &ExperimentConfig) -> Result<AmseComparison> {
    let amse = config
        .amse
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["amse: section missing".into()]))?;
    let (mdp, features) = mdp_of(config)?;
    let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let g0 = build_asymptotic_model(&mdp, &behavior, &features, 1.0, 1)?.g0;
    let g = amse.gain_factor * g0;
    let model = build_asymptotic_model(&mdp, &behavior, &features, g, amse.copies)?;
    let single = build_asymptotic_model(&mdp, &behavior, &features, g, 1)?;
    let predicted = lyapunov_amse(&model)?;
    let watkins = watkins_amse(&single)?;
    let (empirical_trace, empirical_se) = empirical_linearized_amse(
        &mdp,
        &features,
        &model,
        amse.steps,
        amse.num_seeds,
        config.master_seed,
    )?;
    Ok(AmseComparison {
        copies: amse.copies,
        g,
        g0,
        predicted_trace: predicted.predicted_trace,
        watkins_trace: watkins.predicted_trace,
        empirical_trace,
        empirical_se,
        steps: amse.steps,
        num_seeds: amse.num_seeds,
    })
}
