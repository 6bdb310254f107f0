use std::time::Instant;

use rayon::prelude::*;

use super::config::{AgentConfig, BuiltEnvironment, ExperimentConfig};
use super::experiments::reference_parameters;
use super::hit_time::{evaluate_hit_time, HitTime};
use crate::analysis::mse_to_optimal;
use crate::error::{Error, Result};
use crate::mdp::Policy;
use crate::rng::stream;
use crate::simulate::Trajectory;

/// Output of one (seed, agent) training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: usize,
    pub agent: String,
    /// `mse` for MDP runs, `eval_reward` for episodic runs.
    pub metric_name: String,
    /// `(step or episode, value)`, strictly increasing in the first entry.
    pub series: Vec<(u64, f64)>,
    pub hit_time: Option<HitTime>,
    /// Seconds; not part of any emitted file.
    pub wall_clock: f64,
    pub params_digest: String,
}

struct Task<'a> {
    seed: usize,
    agent: &'a AgentConfig,
}

fn run_mdp(
    config: &ExperimentConfig,
    env: &BuiltEnvironment,
    theta_star: &[f64],
    task: &Task<'_>,
    hash: &str,
) -> Result<RunRecord> {
    let BuiltEnvironment::Mdp { mdp, features } = env else {
        unreachable!("dispatched on environment kind");
    };
    let start = Instant::now();
    let k = task.seed;
    let seed = config.master_seed;
    let mut agent = task.agent.spec().build(
        features.dim(),
        mdp.num_actions(),
        mdp.discount(),
        &mut stream(seed, &format!("seed/{k}/init")),
    )?;
    let mut env_rng = stream(seed, &format!("seed/{k}/env"));
    let mut agent_rng = stream(seed, &format!("seed/{k}/agent/{}", task.agent.id));
    let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let mut traj = Trajectory::start(mdp, &behavior, &mut env_rng);
    let mut series = vec![(0, mse_to_optimal(&agent.estimate(), theta_star)?)];
    let mut done = 0;
    while done < config.max_steps {
        let chunk = config.metric_every.min(config.max_steps - done);
        traj.train(&mut agent, features, chunk, &mut env_rng, &mut agent_rng)?;
        done += chunk;
        series.push((done, mse_to_optimal(&agent.estimate(), theta_star)?));
    }
    Ok(RunRecord {
        config_hash: hash.to_string(),
        seed: k,
        agent: task.agent.id.clone(),
        metric_name: "mse".into(),
        series,
        hit_time: None,
        wall_clock: start.elapsed().as_secs_f64(),
        params_digest: agent.digest(),
    })
}

fn run_episodic(
    config: &ExperimentConfig,
    env: &BuiltEnvironment,
    task: &Task<'_>,
    hash: &str,
) -> Result<RunRecord> {
    let BuiltEnvironment::CartPole(cartpole) = env else {
        unreachable!("dispatched on environment kind");
    };
    let start = Instant::now();
    let k = task.seed;
    let seed = config.master_seed;
    let mut agent = task.agent.spec().build(
        cartpole.discretizer.dim(2),
        2,
        config.discount,
        &mut stream(seed, &format!("seed/{k}/init")),
    )?;
    let outcome = evaluate_hit_time(
        &mut agent,
        cartpole,
        &config.evaluation,
        config.max_episodes,
        &mut stream(seed, &format!("seed/{k}/episodes/{}", task.agent.id)),
        &mut stream(seed, &format!("seed/{k}/agent/{}", task.agent.id)),
    )?;
    Ok(RunRecord {
        config_hash: hash.to_string(),
        seed: k,
        agent: task.agent.id.clone(),
        metric_name: "eval_reward".into(),
        series: outcome.evaluations,
        hit_time: Some(outcome.hit),
        wall_clock: start.elapsed().as_secs_f64(),
        params_digest: agent.digest(),
    })
}

/// Run every (seed, agent) pair on `parallelism` worker threads. Records
/// come back seed-major in agent order and do not depend on the thread
/// count.
pub fn run_experiment(config: &ExperimentConfig, parallelism: usize) -> Result<Vec<RunRecord>> {
    let env = config.environment.build(config.discount)?;
    let theta_star = match &env {
        BuiltEnvironment::Mdp { mdp, features } => Some(reference_parameters(mdp, features)?),
        BuiltEnvironment::CartPole(_) => None,
    };
    let hash = config.hash();
    let tasks: Vec<Task<'_>> = (0..config.num_seeds)
        .flat_map(|seed| config.agents.iter().map(move |agent| Task { seed, agent }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::EnvironmentBuild(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|task| match &theta_star {
                Some(theta) => run_mdp(config, &env, theta, task, &hash),
                None => run_episodic(config, &env, task, &hash),
            })
            .collect()
    })
}
