use rayon::prelude::*;

use crate::agents::Agent;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{argmax, Policy, TabularMdp};
use crate::rng::{stream, StreamRng};
use crate::simulate::Trajectory;

pub const MIN_BIAS_RUNS: usize = 100;

/// Where and how to probe the bootstrap estimate.
#[derive(Debug, Clone)]
pub struct BiasSetup<'a> {
    pub mdp: &'a TabularMdp,
    pub features: &'a FeatureMap,
    pub behavior: &'a Policy,
    /// The `s'` at which the estimator is evaluated.
    pub next_state: usize,
    pub n_snapshot: u64,
    /// Radius used when evaluating the robust estimator.
    pub rho: f64,
    pub num_runs: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub method: String,
    pub copies: usize,
    pub rho: f64,
    pub n_snapshot: u64,
    pub num_runs: usize,
    /// Mean of the bootstrap estimate over runs.
    pub estimator_mean: f64,
    pub estimator_se: f64,
    /// `γ max_a' φ(s', a')ᵀ E[θ]` with the cross-run mean as `E[θ]`.
    pub reference: f64,
    /// `reference − estimator_mean`; positive means underestimation.
    pub bias: f64,
    pub se: f64,
    /// `√ρ · γ · max_a' ‖φ(s', a')‖`.
    pub band_hi: f64,
    /// Fraction of runs with `‖E[θ] − θ̂‖² ≤ ρ`.
    pub membership_freq: f64,
}

impl BiasReport {
    pub const CSV_HEADER: &'static str = "method,N,rho,n,bias,se,band_hi,membership_freq";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.method,
            self.copies,
            self.rho,
            self.n_snapshot,
            self.bias,
            self.se,
            self.band_hi,
            self.membership_freq
        )
    }

    /// `lo − k·se ≤ bias ≤ hi + k·se`.
    pub fn within(&self, lo: f64, hi: f64, k: f64) -> bool {
        self.bias >= lo - k * self.se && self.bias <= hi + k * self.se
    }
}

struct RunOutcome {
    estimate: f64,
    reference_params: Vec<f64>,
    point: Vec<f64>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Monte-Carlo estimate of the gap between `γ max_a' φ(s',a')ᵀE[θ]` and the
/// expected bootstrap estimate after `n_snapshot` steps.
///
/// `factory` builds a fresh agent from its initialisation stream. Run `r`
/// draws from streams keyed `bias/r/...`, so the report does not depend on
/// the thread count.
pub fn measure_bias<F>(setup: &BiasSetup<'_>, factory: F) -> Result<BiasReport>
where
    F: Fn(&mut StreamRng) -> Result<Agent> + Sync,
{
    if setup.num_runs < MIN_BIAS_RUNS {
        return Err(Error::InsufficientRuns {
            got: setup.num_runs,
            need: MIN_BIAS_RUNS,
        });
    }
    let na = setup.mdp.num_actions();
    if setup.next_state >= setup.mdp.num_states() {
        return Err(Error::DimensionMismatch {
            expected: setup.mdp.num_states(),
            found: setup.next_state + 1,
        });
    }
    let outcomes: Vec<RunOutcome> = (0..setup.num_runs)
        .into_par_iter()
        .map(|r| -> Result<RunOutcome> {
            let key = format!("bias/{r}");
            let mut agent = factory(&mut stream(setup.master_seed, &format!("{key}/init")))?;
            let mut env_rng = stream(setup.master_seed, &format!("{key}/env"));
            let mut agent_rng = stream(setup.master_seed, &format!("{key}/agent"));
            let mut traj = Trajectory::start(setup.mdp, setup.behavior, &mut env_rng);
            traj.train(
                &mut agent,
                setup.features,
                setup.n_snapshot,
                &mut env_rng,
                &mut agent_rng,
            )?;
            Ok(RunOutcome {
                estimate: agent.bootstrap_value(setup.features, setup.next_state, setup.rho)?,
                reference_params: agent.reference_params(),
                point: agent.estimate(),
            })
        })
        .collect::<Result<_>>()?;

    let probe = factory(&mut stream(setup.master_seed, "bias/0/init"))?;
    let gamma = probe.gamma();
    let runs = outcomes.len() as f64;
    let dim = setup.features.dim();
    let mut mean_params = vec![0.0; dim];
    for o in &outcomes {
        for (m, v) in mean_params.iter_mut().zip(&o.reference_params) {
            *m += v;
        }
    }
    mean_params.iter_mut().for_each(|m| *m /= runs);

    let base = setup.next_state * na;
    let scores: Vec<f64> = (0..na)
        .map(|a| setup.features.dot(base + a, &mean_params))
        .collect();
    let a_star = argmax(&scores);
    let reference = gamma * scores[a_star];

    let diffs: Vec<f64> = outcomes
        .iter()
        .map(|o| gamma * setup.features.dot(base + a_star, &o.reference_params) - o.estimate)
        .collect();
    let (bias, sd) = mean_sd(&diffs);
    let estimates: Vec<f64> = outcomes.iter().map(|o| o.estimate).collect();
    let (estimator_mean, est_sd) = mean_sd(&estimates);

    let max_norm = (0..na)
        .map(|a| setup.features.norm(base + a))
        .fold(0.0, f64::max);
    let inside = outcomes
        .iter()
        .filter(|o| {
            let dist: f64 = o
                .point
                .iter()
                .zip(&mean_params)
                .map(|(p, m)| (p - m).powi(2))
                .sum();
            dist <= setup.rho
        })
        .count();

    Ok(BiasReport {
        method: probe.variant().name().to_string(),
        copies: probe.copies().max(probe.window()),
        rho: setup.rho,
        n_snapshot: setup.n_snapshot,
        num_runs: setup.num_runs,
        estimator_mean,
        estimator_se: est_sd / runs.sqrt(),
        reference,
        bias,
        se: sd / runs.sqrt(),
        band_hi: setup.rho.sqrt() * gamma * max_norm,
        membership_freq: inside as f64 / runs,
    })
}
