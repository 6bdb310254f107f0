use rand::Rng;

use super::config::{CartPoleConfig, EvalProtocol};
use crate::agents::Agent;
use crate::environments::{epsilon_greedy_action, CartPole};
use crate::error::Result;
use crate::features::FeatureMap;
use crate::mdp::{argmax, Transition};

const CARTPOLE_ACTIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitTime {
    /// Training episodes completed when the task was first solved.
    Solved(u64),
    NotSolved,
}

impl HitTime {
    pub fn episodes(self) -> Option<u64> {
        match self {
            HitTime::Solved(e) => Some(e),
            HitTime::NotSolved => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitOutcome {
    pub hit: HitTime,
    /// `(training episodes, mean evaluation reward)` at every checkpoint.
    pub evaluations: Vec<(u64, f64)>,
    pub train_steps: u64,
}

fn task_features(task: &CartPoleConfig) -> FeatureMap {
    FeatureMap::canonical(task.discretizer.num_cells(), CARTPOLE_ACTIONS)
}

/// Mean undiscounted return of `eval_episodes` greedy episodes capped at
/// `eval_step_cap`. Takes the agent by shared reference, so evaluation
/// cannot change it.
pub fn evaluation_reward<R: Rng + ?Sized>(
    agent: &Agent,
    task: &CartPoleConfig,
    protocol: &EvalProtocol,
    rng: &mut R,
) -> Result<f64> {
    let features = task_features(task);
    let mut env = CartPole::new(task.params.clone());
    let mut total = 0.0;
    for _ in 0..protocol.eval_episodes {
        let mut state = env.reset(rng, protocol.eval_step_cap);
        while !env.is_done() {
            let q = agent.action_values(&features, task.discretizer.cell(&state));
            let (next, reward, _, _) = env.step(argmax(&q))?;
            total += reward;
            state = next;
        }
    }
    Ok(total / protocol.eval_episodes as f64)
}

/// Train on-policy with ε-greedy exploration and one update per step;
/// every `eval_every` episodes freeze the parameters and evaluate. Returns
/// the first episode count whose evaluation reaches `solve_threshold`.
pub fn evaluate_hit_time<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    agent: &mut Agent,
    task: &CartPoleConfig,
    protocol: &EvalProtocol,
    max_episodes: u64,
    env_rng: &mut R1,
    agent_rng: &mut R2,
) -> Result<HitOutcome> {
    let features = task_features(task);
    let mut env = CartPole::new(task.params.clone());
    let mut evaluations = Vec::new();
    let mut train_steps = 0;
    for episode in 1..=max_episodes {
        let mut cell = task
            .discretizer
            .cell(&env.reset(env_rng, task.params.train_step_cap));
        loop {
            let q = agent.action_values(&features, cell);
            let action = epsilon_greedy_action(&q, task.epsilon, env_rng);
            let (next, reward, failed, truncated) = env.step(action)?;
            let next_cell = task.discretizer.cell(&next);
            let mut t = Transition::new(cell, action, reward, next_cell);
            t.terminal = failed;
            agent.step(&t, &features, agent_rng)?;
            train_steps += 1;
            cell = next_cell;
            if failed || truncated {
                break;
            }
        }
        agent.end_episode();
        if episode % protocol.eval_every == 0 {
            let score = evaluation_reward(agent, task, protocol, env_rng)?;
            evaluations.push((episode, score));
            if score >= protocol.solve_threshold {
                return Ok(HitOutcome {
                    hit: HitTime::Solved(episode),
                    evaluations,
                    train_steps,
                });
            }
        }
    }
    Ok(HitOutcome {
        hit: HitTime::NotSolved,
        evaluations,
        train_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentSpec, Variant};
    use crate::environments::CartPoleParams;
    use crate::rng::stream;

    fn agent(task: &CartPoleConfig) -> Agent {
        AgentSpec::new(Variant::Watkins, 1, 0.4, 100.0)
            .build(task.discretizer.dim(2), 2, 0.999, &mut stream(0, "i"))
            .unwrap()
    }

    #[test]
    fn unbreakable_pole_hits_at_first_checkpoint() {
        let task = CartPoleConfig {
            params: CartPoleParams {
                x_threshold: 1e9,
                angle_threshold: 1e9,
                train_step_cap: 20,
                ..CartPoleParams::default()
            },
            ..CartPoleConfig::default()
        };
        let protocol = EvalProtocol {
            eval_episodes: 5,
            ..EvalProtocol::default()
        };
        let mut a = agent(&task);
        let out = evaluate_hit_time(
            &mut a,
            &task,
            &protocol,
            500,
            &mut stream(1, "e"),
            &mut stream(1, "a"),
        )
        .unwrap();
        assert_eq!(out.hit, HitTime::Solved(50));
        assert_eq!(out.evaluations, vec![(50, 210.0)]);
    }

    #[test]
    fn immediate_failure_never_solves() {
        let task = CartPoleConfig {
            params: CartPoleParams {
                x_threshold: 1e-12,
                init_jitter: 0.0,
                ..CartPoleParams::default()
            },
            ..CartPoleConfig::default()
        };
        let protocol = EvalProtocol {
            eval_episodes: 3,
            ..EvalProtocol::default()
        };
        let mut a = agent(&task);
        let out = evaluate_hit_time(
            &mut a,
            &task,
            &protocol,
            200,
            &mut stream(2, "e"),
            &mut stream(2, "a"),
        )
        .unwrap();
        assert_eq!(out.hit, HitTime::NotSolved);
        assert_eq!(out.evaluations.len(), 4);
        assert!(out.evaluations.iter().all(|&(_, r)| r < 195.0));
    }

    #[test]
    fn evaluation_leaves_agent_untouched() {
        let task = CartPoleConfig::default();
        let mut a = agent(&task);
        let protocol = EvalProtocol {
            eval_episodes: 2,
            eval_every: 5,
            ..EvalProtocol::default()
        };
        evaluate_hit_time(
            &mut a,
            &task,
            &protocol,
            5,
            &mut stream(3, "e"),
            &mut stream(3, "a"),
        )
        .unwrap();
        let before = a.digest();
        evaluation_reward(&a, &task, &protocol, &mut stream(4, "x")).unwrap();
        assert_eq!(a.digest(), before);
    }
}
