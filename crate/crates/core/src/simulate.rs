//! Driving an agent along a behavioural trajectory of a finite MDP.

use rand::Rng;

use crate::agents::Agent;
use crate::error::Result;
use crate::features::FeatureMap;
use crate::mdp::{sample_step, Policy, TabularMdp, Transition};

/// Trajectory state of the behavioural chain.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    mdp: &'a TabularMdp,
    behavior: &'a Policy,
    state: usize,
}

impl<'a> Trajectory<'a> {
    /// Start from a draw of the MDP's initial distribution.
    pub fn start<R: Rng + ?Sized>(mdp: &'a TabularMdp, behavior: &'a Policy, rng: &mut R) -> Self {
        let state = mdp.sample_initial_state(rng);
        Trajectory {
            mdp,
            behavior,
            state,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Next transition `(s, a, r, s')` of the chain.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Transition {
        let action = self.behavior.sample_action(self.state, rng);
        let t = sample_step(self.mdp, self.state, action, rng);
        self.state = t.next_state;
        t
    }

    /// Feed `steps` transitions to `agent`. Environment draws come from
    /// `env_rng`, selector draws from `agent_rng`.
    pub fn train<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        agent: &mut Agent,
        features: &FeatureMap,
        steps: u64,
        env_rng: &mut R1,
        agent_rng: &mut R2,
    ) -> Result<()> {
        for _ in 0..steps {
            let t = self.next(env_rng);
            agent.step(&t, features, agent_rng)?;
        }
        Ok(())
    }
}
