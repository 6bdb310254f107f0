use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Physical constants, thresholds and episode caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub force: f64,
    pub dt: f64,
    /// Radians.
    pub angle_threshold: f64,
    pub x_threshold: f64,
    pub init_jitter: f64,
    pub train_step_cap: usize,
    pub eval_step_cap: usize,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            dt: 0.02,
            angle_threshold: 12.0 * std::f64::consts::PI / 180.0,
            x_threshold: 2.4,
            init_jitter: 0.05,
            train_step_cap: 500,
            eval_step_cap: 210,
        }
    }
}

impl CartPoleParams {
    pub fn is_failure(&self, s: &CartPoleState) -> bool {
        s.x.abs() > self.x_threshold || s.theta.abs() > self.angle_threshold
    }
}

/// One explicit Euler step of the cart-pole equations of motion. Action 0
/// pushes left, action 1 pushes right.
pub fn integrate(params: &CartPoleParams, s: &CartPoleState, action: usize) -> CartPoleState {
    let force = if action == 1 {
        params.force
    } else {
        -params.force
    };
    let total_mass = params.cart_mass + params.pole_mass;
    let pole_moment = params.pole_mass * params.half_length;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_moment * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (params.gravity * sin - cos * temp)
        / (params.half_length * (4.0 / 3.0 - params.pole_mass * cos * cos / total_mass));
    let x_acc = temp - pole_moment * theta_acc * cos / total_mass;
    CartPoleState {
        x: s.x + params.dt * s.x_dot,
        x_dot: s.x_dot + params.dt * x_acc,
        theta: s.theta + params.dt * s.theta_dot,
        theta_dot: s.theta_dot + params.dt * theta_acc,
    }
}

/// Advance one step: returns the next state, the reward (always 1) and
/// whether a threshold was crossed.
pub fn cartpole_step(
    params: &CartPoleParams,
    state: &CartPoleState,
    action: usize,
) -> Result<(CartPoleState, f64, bool)> {
    if params.is_failure(state) {
        return Err(Error::SteppedTerminal);
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteInput("cart-pole state".into()));
    }
    let next = integrate(params, state, action);
    Ok((next, 1.0, params.is_failure(&next)))
}

/// Episodic cart-pole with a step cap.
#[derive(Debug, Clone)]
pub struct CartPole {
    params: CartPoleParams,
    state: CartPoleState,
    steps: usize,
    cap: usize,
    failed: bool,
}

impl CartPole {
    pub fn new(params: CartPoleParams) -> Self {
        let cap = params.train_step_cap;
        CartPole {
            params,
            state: CartPoleState {
                x: 0.0,
                x_dot: 0.0,
                theta: 0.0,
                theta_dot: 0.0,
            },
            steps: 0,
            cap,
            failed: false,
        }
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn state(&self) -> &CartPoleState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Start an episode from a uniformly jittered state with the given cap.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R, cap: usize) -> CartPoleState {
        let j = self.params.init_jitter;
        let mut draw = || -j + 2.0 * j * rng.random::<f64>();
        self.state = CartPoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
        };
        self.steps = 0;
        self.cap = cap;
        self.failed = false;
        self.state
    }

    /// Set an explicit state (counts as a fresh episode).
    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
        self.failed = false;
    }

    pub fn is_done(&self) -> bool {
        self.failed || self.steps >= self.cap
    }

    /// Returns `(next_state, reward, failed, truncated)`.
    pub fn step(&mut self, action: usize) -> Result<(CartPoleState, f64, bool, bool)> {
        if self.is_done() {
            return Err(Error::SteppedTerminal);
        }
        let (next, reward, failed) = cartpole_step(&self.params, &self.state, action)?;
        self.state = next;
        self.steps += 1;
        self.failed = failed;
        Ok((next, reward, failed, !failed && self.steps >= self.cap))
    }
}

/// Uniform grid over clipped state variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretizer {
    pub bins: [usize; 4],
    pub low: [f64; 4],
    pub high: [f64; 4],
}

impl Default for Discretizer {
    fn default() -> Self {
        Discretizer {
            bins: [10; 4],
            low: [-2.4, -3.0, -0.21, -3.0],
            high: [2.4, 3.0, 0.21, 3.0],
        }
    }
}

impl Discretizer {
    pub fn num_cells(&self) -> usize {
        self.bins.iter().product()
    }

    /// Feature dimension `(∏ bins) · A`.
    pub fn dim(&self, num_actions: usize) -> usize {
        self.num_cells() * num_actions
    }

    pub fn is_valid(&self) -> bool {
        self.bins.iter().all(|&b| b > 0)
            && self
                .low
                .iter()
                .zip(&self.high)
                .all(|(l, h)| l.is_finite() && h.is_finite() && l < h)
    }

    /// Row-major cell of a state; values outside the clip range fall in the
    /// edge bins.
    #[allow(clippy::needless_range_loop)]
    pub fn cell(&self, state: &CartPoleState) -> usize {
        let values = state.as_array();
        let mut cell = 0;
        for k in 0..4 {
            let clipped = values[k].clamp(self.low[k], self.high[k]);
            let unit = (clipped - self.low[k]) / (self.high[k] - self.low[k]);
            let bin = ((unit * self.bins[k] as f64) as usize).min(self.bins[k] - 1);
            cell = cell * self.bins[k] + bin;
        }
        cell
    }

    /// Canonical feature index `cell · A + action`.
    pub fn index(&self, state: &CartPoleState, action: usize, num_actions: usize) -> usize {
        self.cell(state) * num_actions + action
    }
}

/// With probability `epsilon` a uniform action, otherwise the lowest-index
/// argmax. Always consumes one uniform draw so streams stay aligned.
pub fn epsilon_greedy_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}
