use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::robust::robust_target;
use super::schedule::{Decay, LearningRateSchedule, RhoSchedule};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Watkins,
    Double,
    Maxmin,
    Averaged,
    #[serde(rename = "twora")]
    TwoRa,
    #[serde(rename = "twora-linearized")]
    TwoRaLinearized,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Watkins => "watkins",
            Variant::Double => "double",
            Variant::Maxmin => "maxmin",
            Variant::Averaged => "averaged",
            Variant::TwoRa => "twora",
            Variant::TwoRaLinearized => "twora-linearized",
        }
    }

    pub const ALL: [Variant; 6] = [
        Variant::Watkins,
        Variant::Double,
        Variant::Maxmin,
        Variant::Averaged,
        Variant::TwoRa,
        Variant::TwoRaLinearized,
    ];

    pub fn from_name(name: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Methods holding `N` estimates take an `N`-times larger per-step rate.
    pub fn scales_learning_rate(self) -> bool {
        matches!(
            self,
            Variant::Maxmin | Variant::Averaged | Variant::TwoRa | Variant::TwoRaLinearized
        )
    }
}

/// Index of the estimate updated by one step (`β_n` for 2RA and Maxmin, the
/// coin for Double where 0 is block A).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectorDraw(pub usize);

impl SelectorDraw {
    /// Uniform over `0..copies`; consumes no randomness when `copies == 1`.
    pub fn draw<R: Rng + ?Sized>(copies: usize, rng: &mut R) -> Self {
        if copies <= 1 {
            SelectorDraw(0)
        } else {
            SelectorDraw(rng.random_range(0..copies))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Init {
    Zero,
    Uniform { low: f64, high: f64 },
    Given { theta: Vec<f64> },
}

/// Everything needed to construct an [`Agent`] for a given feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub variant: Variant,
    /// `N` for Maxmin and 2RA, the window `K` for Averaged; ignored by
    /// Watkins (1) and Double (2).
    pub copies: usize,
    pub alpha0: f64,
    pub w_alpha: f64,
    pub decay: Decay,
    /// Multiply the step size by `copies`. Defaults per variant and decay.
    pub scale_lr: bool,
    pub rho: RhoSchedule,
    pub init: Init,
    /// Start all copies from the same draw.
    pub identical_init: bool,
    /// Fixed greedy actions for the linearized recursion.
    pub pi_star: Option<Vec<usize>>,
}

impl AgentSpec {
    pub fn new(variant: Variant, copies: usize, alpha0: f64, w_alpha: f64) -> Self {
        AgentSpec {
            variant,
            copies,
            alpha0,
            w_alpha,
            decay: Decay::PerStep,
            scale_lr: variant.scales_learning_rate(),
            rho: RhoSchedule::zero(),
            init: Init::Zero,
            identical_init: false,
            pi_star: None,
        }
    }

    pub fn with_rho(mut self, rho: RhoSchedule) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_init(mut self, init: Init, identical: bool) -> Self {
        self.init = init;
        self.identical_init = identical;
        self
    }

    pub fn with_decay(mut self, decay: Decay) -> Self {
        self.decay = decay;
        self
    }

    pub fn with_lr_scaling(mut self, scale: bool) -> Self {
        self.scale_lr = scale;
        self
    }

    pub fn with_pi_star(mut self, actions: Vec<usize>) -> Self {
        self.pi_star = Some(actions);
        self
    }

    fn num_thetas(&self) -> usize {
        match self.variant {
            Variant::Watkins | Variant::Averaged => 1,
            Variant::Double => 2,
            Variant::Maxmin | Variant::TwoRa | Variant::TwoRaLinearized => self.copies,
        }
    }

    pub fn schedule(&self) -> LearningRateSchedule {
        let copies = match self.variant {
            Variant::Watkins | Variant::Double => 1,
            _ if self.scale_lr => self.copies,
            _ => 1,
        };
        LearningRateSchedule {
            alpha0: self.alpha0,
            w_alpha: self.w_alpha,
            copies,
            decay: self.decay,
        }
    }

    pub fn build<R: Rng + ?Sized>(
        &self,
        dim: usize,
        num_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Agent> {
        if self.copies == 0 {
            return Err(Error::ShapeMismatch(
                "an agent needs at least one copy".into(),
            ));
        }
        let lr = self.schedule();
        if !lr.is_valid() || !self.rho.is_valid() {
            return Err(Error::ShapeMismatch("invalid schedule parameters".into()));
        }
        if self.variant == Variant::TwoRaLinearized && self.pi_star.is_none() {
            return Err(Error::ShapeMismatch(
                "the linearized recursion needs a fixed optimal policy".into(),
            ));
        }
        let count = self.num_thetas();
        let draw = |rng: &mut R| -> Result<Vec<f64>> {
            match &self.init {
                Init::Zero => Ok(vec![0.0; dim]),
                Init::Uniform { low, high } => Ok((0..dim)
                    .map(|_| low + (high - low) * rng.random::<f64>())
                    .collect()),
                Init::Given { theta } => {
                    if theta.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: theta.len(),
                        });
                    }
                    Ok(theta.clone())
                }
            }
        };
        let thetas = if self.identical_init {
            vec![draw(rng)?; count]
        } else {
            (0..count).map(|_| draw(rng)).collect::<Result<Vec<_>>>()?
        };
        let mut agent = Agent {
            variant: self.variant,
            num_actions,
            gamma,
            average: Vec::new(),
            thetas,
            window: if self.variant == Variant::Averaged {
                self.copies
            } else {
                1
            },
            history: VecDeque::new(),
            step: 0,
            episode: 0,
            lr,
            rho: if self.variant == Variant::TwoRa {
                self.rho
            } else {
                RhoSchedule::zero()
            },
            pi_star: self.pi_star.clone(),
        };
        agent.average = agent.mean_of_copies();
        Ok(agent)
    }
}

/// Learner state: the parameter copies, the step counter and the schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    variant: Variant,
    num_actions: usize,
    gamma: f64,
    thetas: Vec<Vec<f64>>,
    /// `θ̂ = (1/N) Σ θ⁽ⁱ⁾`, refreshed on the support of every update.
    average: Vec<f64>,
    /// Averaged: snapshot window `K`.
    window: usize,
    /// Averaged: sparse parameter changes of the last `K − 1` updates,
    /// most recent first.
    history: VecDeque<Vec<(usize, f64)>>,
    step: u64,
    episode: u64,
    lr: LearningRateSchedule,
    rho: RhoSchedule,
    pi_star: Option<Vec<usize>>,
}

#[inline]
fn td_update(
    theta: &mut [f64],
    features: &FeatureMap,
    x: usize,
    alpha: f64,
    reward: f64,
    bootstrap: f64,
) {
    let delta = reward + bootstrap - features.dot(x, theta);
    let scaled = alpha * delta;
    features.for_each_entry(x, |i, v| theta[i] += scaled * v);
}

impl Agent {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn copies(&self) -> usize {
        self.thetas.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn step_counter(&self) -> u64 {
        self.step
    }

    pub fn episode_counter(&self) -> u64 {
        self.episode
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn learning_rate(&self) -> &LearningRateSchedule {
        &self.lr
    }

    pub fn rho_schedule(&self) -> &RhoSchedule {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].len()
    }

    /// Start the step counter at `n0` (harmonic schedules need `N g / n0 < 1`).
    pub fn with_step_counter(mut self, n0: u64) -> Self {
        self.step = n0;
        self
    }

    /// Step size for the next update.
    pub fn current_alpha(&self) -> f64 {
        match self.lr.decay {
            Decay::PerEpisode => self.lr.at(self.episode),
            Decay::PerStep | Decay::Harmonic => self.lr.at(self.step),
        }
    }

    pub fn current_rho(&self) -> f64 {
        self.rho.at(self.step)
    }

    pub fn end_episode(&mut self) {
        self.episode += 1;
    }

    fn mean_of_copies(&self) -> Vec<f64> {
        let n = self.thetas.len() as f64;
        let mut sum = self.thetas[0].clone();
        for theta in &self.thetas[1..] {
            for (s, v) in sum.iter_mut().zip(theta) {
                *s += v;
            }
        }
        if self.thetas.len() > 1 {
            sum.iter_mut().for_each(|s| *s /= n);
        }
        sum
    }

    /// `θ̂ = (1/N) Σ θ⁽ⁱ⁾` recomputed from the copies.
    pub fn average(&self) -> Vec<f64> {
        self.mean_of_copies()
    }

    /// The running average maintained by the update.
    pub fn tracked_average(&self) -> &[f64] {
        &self.average
    }

    /// Point estimate of `θ` used for error metrics: the single parameter
    /// vector for Watkins and Averaged, the mean of the copies otherwise.
    pub fn estimate(&self) -> Vec<f64> {
        match self.variant {
            Variant::Watkins | Variant::Averaged => self.thetas[0].clone(),
            _ => self.mean_of_copies(),
        }
    }

    /// Parameters whose expectation the bias reference is built from:
    /// `θ_A` for Double, [`estimate`](Self::estimate) otherwise.
    pub fn reference_params(&self) -> Vec<f64> {
        match self.variant {
            Variant::Double => self.thetas[0].clone(),
            _ => self.estimate(),
        }
    }

    fn refresh_average(&mut self, features: &FeatureMap, x: usize) {
        let n = self.thetas.len();
        let thetas = &self.thetas;
        let average = &mut self.average;
        features.for_each_entry(x, |k, _| {
            let mut sum = thetas[0][k];
            for theta in &thetas[1..] {
                sum += theta[k];
            }
            average[k] = if n > 1 { sum / n as f64 } else { sum };
        });
    }

    /// `φ(x)ᵀθ̄_K` for the Averaged window.
    fn windowed_dot(&self, features: &FeatureMap, x: usize) -> f64 {
        let current = features.dot(x, &self.thetas[0]);
        if self.history.is_empty() {
            return current;
        }
        let m = self.history.len() + 1;
        let mut correction = 0.0;
        for (i, delta) in self.history.iter().enumerate() {
            let weight = (m - 1 - i) as f64;
            let mut dot = 0.0;
            for &(k, v) in delta {
                dot += features.entry(k, x) * v;
            }
            correction += weight * dot;
        }
        current - correction / m as f64
    }

    fn max_over_actions(&self, next_state: usize, value: impl Fn(usize) -> f64) -> (usize, f64) {
        let base = next_state * self.num_actions;
        let mut best = (0, value(base));
        for a in 1..self.num_actions {
            let v = value(base + a);
            if v > best.1 {
                best = (a, v);
            }
        }
        best
    }

    /// Value estimates of every action in `state`, as used for greedy action
    /// selection: `min_i` over copies for Maxmin, the windowed mean for
    /// Averaged and the mean of the copies otherwise.
    pub fn action_values(&self, features: &FeatureMap, state: usize) -> Vec<f64> {
        let base = state * self.num_actions;
        (0..self.num_actions)
            .map(|a| {
                let x = base + a;
                match self.variant {
                    Variant::Watkins => features.dot(x, &self.thetas[0]),
                    Variant::Averaged => self.windowed_dot(features, x),
                    Variant::Maxmin => self
                        .thetas
                        .iter()
                        .map(|t| features.dot(x, t))
                        .fold(f64::INFINITY, f64::min),
                    Variant::Double => {
                        0.5 * (features.dot(x, &self.thetas[0]) + features.dot(x, &self.thetas[1]))
                    }
                    Variant::TwoRa | Variant::TwoRaLinearized => features.dot(x, &self.average),
                }
            })
            .collect()
    }

    /// The bootstrap estimate (without the `φ(x)` factor) this learner would
    /// plug into its target at `next_state`. Double reports block A's
    /// target; 2RA evaluates the robust estimator with radius `rho`.
    pub fn bootstrap_value(
        &self,
        features: &FeatureMap,
        next_state: usize,
        rho: f64,
    ) -> Result<f64> {
        let gamma = self.gamma;
        Ok(match self.variant {
            Variant::Watkins => {
                gamma
                    * self
                        .max_over_actions(next_state, |x| features.dot(x, &self.thetas[0]))
                        .1
            }
            Variant::Double => {
                let (a, _) =
                    self.max_over_actions(next_state, |x| features.dot(x, &self.thetas[0]));
                gamma * features.dot(next_state * self.num_actions + a, &self.thetas[1])
            }
            Variant::Maxmin => {
                gamma
                    * self
                        .max_over_actions(next_state, |x| {
                            self.thetas
                                .iter()
                                .map(|t| features.dot(x, t))
                                .fold(f64::INFINITY, f64::min)
                        })
                        .1
            }
            Variant::Averaged => {
                gamma
                    * self
                        .max_over_actions(next_state, |x| self.windowed_dot(features, x))
                        .1
            }
            Variant::TwoRa => robust_target(
                features,
                self.num_actions,
                next_state,
                &self.average,
                rho,
                gamma,
            )?,
            Variant::TwoRaLinearized => {
                let pi = self.pi_star.as_ref().expect("checked at construction");
                gamma
                    * features.dot(
                        next_state * self.num_actions + pi[next_state],
                        &self.average,
                    )
            }
        })
    }

    fn check(&self, t: &Transition, features: &FeatureMap) -> Result<()> {
        features.check_theta(&self.thetas[0])?;
        let pairs = features.num_pairs();
        let x = t.state * self.num_actions + t.action;
        let last = t.next_state * self.num_actions + self.num_actions - 1;
        if t.action >= self.num_actions || x >= pairs || last >= pairs {
            return Err(Error::DimensionMismatch {
                expected: pairs,
                found: x.max(last) + 1,
            });
        }
        Ok(())
    }

    /// Draw the selector and apply one update.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        rng: &mut R,
    ) -> Result<()> {
        let selector = match self.variant {
            Variant::Watkins | Variant::Averaged => SelectorDraw(0),
            _ => SelectorDraw::draw(self.thetas.len(), rng),
        };
        self.step_selected(t, features, selector)
    }

    /// Apply one update with an explicitly chosen estimate index.
    pub fn step_selected(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        selector: SelectorDraw,
    ) -> Result<()> {
        self.check(t, features)?;
        let i = selector.0;
        if i >= self.thetas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.thetas.len(),
                found: i + 1,
            });
        }
        let x = t.state * self.num_actions + t.action;
        let alpha = self.current_alpha();
        let bootstrap = if t.terminal {
            0.0
        } else {
            match self.variant {
                Variant::Double => {
                    let (own, other) = (i, 1 - i);
                    let (a, _) =
                        self.max_over_actions(t.next_state, |y| features.dot(y, &self.thetas[own]));
                    self.gamma
                        * features.dot(t.next_state * self.num_actions + a, &self.thetas[other])
                }
                Variant::TwoRa => {
                    self.bootstrap_value(features, t.next_state, self.current_rho())?
                }
                _ => self.bootstrap_value(features, t.next_state, 0.0)?,
            }
        };
        if !bootstrap.is_finite() {
            return Err(Error::NonFiniteTheta);
        }
        match self.variant {
            Variant::Averaged => {
                let before: Vec<(usize, f64)> = {
                    let mut v = Vec::new();
                    features.for_each_entry(x, |k, _| v.push((k, self.thetas[0][k])));
                    v
                };
                td_update(&mut self.thetas[0], features, x, alpha, t.reward, bootstrap);
                if self.window > 1 {
                    let delta = before
                        .into_iter()
                        .map(|(k, old)| (k, self.thetas[0][k] - old))
                        .collect();
                    self.history.push_front(delta);
                    self.history.truncate(self.window - 1);
                }
            }
            _ => td_update(&mut self.thetas[i], features, x, alpha, t.reward, bootstrap),
        }
        if self.thetas.len() > 1
            || matches!(self.variant, Variant::TwoRa | Variant::TwoRaLinearized)
        {
            self.refresh_average(features, x);
        }
        self.step += 1;
        Ok(())
    }

    fn require(&self, expected: Variant) -> Result<()> {
        if self.variant != expected {
            return Err(Error::WrongVariant {
                expected: expected.name(),
                found: self.variant.name(),
            });
        }
        Ok(())
    }

    pub fn watkins_step(&mut self, t: &Transition, features: &FeatureMap) -> Result<()> {
        self.require(Variant::Watkins)?;
        self.step_selected(t, features, SelectorDraw(0))
    }

    pub fn double_step<R: Rng + ?Sized>(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        rng: &mut R,
    ) -> Result<()> {
        self.require(Variant::Double)?;
        self.step(t, features, rng)
    }

    pub fn maxmin_step<R: Rng + ?Sized>(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        rng: &mut R,
    ) -> Result<()> {
        self.require(Variant::Maxmin)?;
        self.step(t, features, rng)
    }

    pub fn averaged_step(&mut self, t: &Transition, features: &FeatureMap) -> Result<()> {
        self.require(Variant::Averaged)?;
        self.step_selected(t, features, SelectorDraw(0))
    }

    pub fn twora_step<R: Rng + ?Sized>(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        rng: &mut R,
    ) -> Result<()> {
        self.require(Variant::TwoRa)?;
        self.step(t, features, rng)
    }

    pub fn twora_linearized_step<R: Rng + ?Sized>(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        rng: &mut R,
    ) -> Result<()> {
        self.require(Variant::TwoRaLinearized)?;
        self.step(t, features, rng)
    }

    /// SHA-256 over the little-endian bytes of every parameter copy.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for theta in &self.thetas {
            for v in theta {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checkpoint as JSON; floats round-trip bit-exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("agent serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::agents::schedule::RhoMode;
    use crate::rng::stream;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::from_name(v.name()), Some(v));
        }
        assert_eq!(Variant::from_name("sarsa"), None);
    }

    fn tr(s: usize, a: usize, r: f64, s2: usize) -> Transition {
        Transition::new(s, a, r, s2)
    }

    fn given(theta: Vec<f64>) -> Init {
        Init::Given { theta }
    }

    fn build(spec: AgentSpec, dim: usize, gamma: f64) -> Agent {
        spec.build(dim, 2, gamma, &mut stream(0, "init")).unwrap()
    }

    #[test]
    fn watkins_full_backup() {
        let f = FeatureMap::canonical(2, 2);
        // α = 1 at every step: α0 = 1 and a huge w.
        let spec = AgentSpec::new(Variant::Watkins, 1, 1.0, 1e300)
            .with_init(given(vec![0.5, 1.0, 2.0, -1.0]), true);
        let mut agent = build(spec, 4, 0.9);
        agent.watkins_step(&tr(0, 1, 0.3, 1), &f).unwrap();
        assert!((agent.thetas()[0][1] - (0.3 + 0.9 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_is_noop() {
        let f = FeatureMap::canonical(2, 2);
        let mut spec = AgentSpec::new(Variant::Watkins, 1, 1.0, 1.0);
        spec.decay = Decay::Harmonic;
        spec.alpha0 = 1e-300;
        let mut agent = build(
            spec.with_init(given(vec![0.5, 1.0, 2.0, -1.0]), true),
            4,
            0.9,
        );
        let before = agent.thetas()[0].clone();
        agent.watkins_step(&tr(0, 1, 0.3, 1), &f).unwrap();
        assert_eq!(agent.thetas()[0], before);
    }

    #[test]
    fn watkins_three_step_trace() {
        // α_n = 0.5 · 10 / (n + 10).
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::Watkins, 1, 0.5, 10.0);
        let mut agent = build(spec, 4, 0.9);
        let steps = [tr(0, 0, 1.0, 1), tr(1, 1, 2.0, 0), tr(0, 1, -1.0, 1)];
        let mut q = [0.0f64; 4];
        for (n, t) in steps.iter().enumerate() {
            let alpha = 5.0 / (n as f64 + 10.0);
            let target = t.reward + 0.9 * q[t.next_state * 2].max(q[t.next_state * 2 + 1]);
            let x = t.state * 2 + t.action;
            q[x] += alpha * (target - q[x]);
            agent.watkins_step(t, &f).unwrap();
        }
        for (a, b) in agent.thetas()[0].iter().zip(q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn double_identical_blocks_match_watkins_target() {
        let f = FeatureMap::canonical(2, 2);
        let theta = vec![0.1, 0.7, -0.2, 0.4];
        let spec =
            AgentSpec::new(Variant::Double, 2, 0.1, 100.0).with_init(given(theta.clone()), true);
        let agent = build(spec, 4, 0.9);
        let w = build(
            AgentSpec::new(Variant::Watkins, 1, 0.1, 100.0).with_init(given(theta), true),
            4,
            0.9,
        );
        for s in 0..2 {
            assert_eq!(
                agent.bootstrap_value(&f, s, 0.0).unwrap(),
                w.bootstrap_value(&f, s, 0.0).unwrap()
            );
        }
    }

    #[test]
    fn double_scripted_trace() {
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::Double, 2, 0.5, 10.0);
        let mut agent = build(spec, 4, 0.8);
        let steps = [
            (tr(0, 0, 1.0, 1), 0),
            (tr(1, 1, 2.0, 0), 1),
            (tr(0, 1, -1.0, 0), 0),
            (tr(0, 0, 0.5, 0), 1),
        ];
        let mut qa = [0.0f64; 4];
        let mut qb = [0.0f64; 4];
        for (n, (t, coin)) in steps.iter().enumerate() {
            let alpha = 5.0 / (n as f64 + 10.0);
            let (own, other) = if *coin == 0 {
                (&mut qa, &qb)
            } else {
                (&mut qb, &qa)
            };
            let s2 = t.next_state * 2;
            let a_star = if own[s2 + 1] > own[s2] { 1 } else { 0 };
            let target = t.reward + 0.8 * other[s2 + a_star];
            let x = t.state * 2 + t.action;
            own[x] += alpha * (target - own[x]);
            let before_other = agent.thetas()[1 - coin].clone();
            agent.step_selected(t, &f, SelectorDraw(*coin)).unwrap();
            assert_eq!(agent.thetas()[1 - coin], before_other);
        }
        for k in 0..4 {
            assert!((agent.thetas()[0][k] - qa[k]).abs() < 1e-12);
            assert!((agent.thetas()[1][k] - qb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn maxmin_scripted_trace() {
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::Maxmin, 3, 0.1, 10.0);
        let mut agent = build(spec, 4, 0.9);
        let steps = [
            (tr(0, 0, 1.0, 1), 2),
            (tr(1, 1, 2.0, 0), 0),
            (tr(0, 1, -1.0, 0), 1),
            (tr(1, 0, 0.5, 1), 2),
            (tr(0, 0, 0.2, 1), 0),
        ];
        let mut q = [[0.0f64; 4]; 3];
        for (n, (t, i)) in steps.iter().enumerate() {
            // N-scaled: 3 · 0.1 · 10 / (n + 10)
            let alpha = 3.0 / (n as f64 + 10.0);
            let s2 = t.next_state * 2;
            let qmin = |a: usize| q.iter().map(|c| c[s2 + a]).fold(f64::INFINITY, f64::min);
            let target = t.reward + 0.9 * qmin(0).max(qmin(1));
            let x = t.state * 2 + t.action;
            q[*i][x] += alpha * (target - q[*i][x]);
            agent.step_selected(t, &f, SelectorDraw(*i)).unwrap();
        }
        for (got, want) in agent.thetas().iter().zip(&q) {
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maxmin_equal_copies_match_watkins_target() {
        let f = FeatureMap::canonical(2, 2);
        let theta = vec![0.3, -0.7, 1.2, 0.4];
        let m = build(
            AgentSpec::new(Variant::Maxmin, 4, 0.1, 10.0).with_init(given(theta.clone()), true),
            4,
            0.9,
        );
        let w = build(
            AgentSpec::new(Variant::Watkins, 1, 0.1, 10.0).with_init(given(theta), true),
            4,
            0.9,
        );
        assert_eq!(
            m.bootstrap_value(&f, 1, 0.0).unwrap(),
            w.bootstrap_value(&f, 1, 0.0).unwrap()
        );
    }

    #[test]
    fn averaged_scripted_trace() {
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::Averaged, 3, 0.2, 10.0);
        let mut agent = build(spec, 4, 0.9);
        let steps = [
            tr(0, 0, 1.0, 0),
            tr(0, 0, 2.0, 0),
            tr(1, 1, -1.0, 0),
            tr(0, 1, 0.5, 1),
            tr(1, 0, 0.3, 1),
        ];
        let mut snapshots: Vec<[f64; 4]> = vec![[0.0; 4]];
        let mut q = [0.0f64; 4];
        for (n, t) in steps.iter().enumerate() {
            let alpha = 3.0 * 0.2 * 10.0 / (n as f64 + 10.0);
            let window: Vec<&[f64; 4]> = snapshots.iter().rev().take(3).collect();
            let mean = |k: usize| window.iter().map(|s| s[k]).sum::<f64>() / window.len() as f64;
            let s2 = t.next_state * 2;
            let target = t.reward + 0.9 * mean(s2).max(mean(s2 + 1));
            let x = t.state * 2 + t.action;
            q[x] += alpha * (target - q[x]);
            snapshots.push(q);
            agent.averaged_step(t, &f).unwrap();
        }
        for k in 0..4 {
            assert!((agent.thetas()[0][k] - q[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn averaged_constant_history_is_current() {
        let f = FeatureMap::canonical(2, 2);
        let theta = vec![0.3, -0.7, 1.2, 0.4];
        let mut agent = build(
            AgentSpec::new(Variant::Averaged, 4, 0.1, 10.0).with_init(given(theta.clone()), true),
            4,
            0.9,
        );
        // A zero-error update leaves θ unchanged: r = θ(x) − γ max θ(s').
        let r = theta[0] - 0.9 * theta[0].max(theta[1]);
        for _ in 0..5 {
            agent.averaged_step(&tr(0, 0, r, 0), &f).unwrap();
        }
        for x in 0..4 {
            assert!((agent.windowed_dot(&f, x) - theta[x]).abs() < 1e-15);
        }
    }

    #[test]
    fn twora_two_step_trace() {
        // N = 2, ρ_n = 0.5 · 10 / (n + 10), α_n = 2 · 0.25 · 4 / (n + 4).
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::TwoRa, 2, 0.25, 4.0)
            .with_rho(RhoSchedule::new(0.5, 10.0, RhoMode::Linear))
            .with_init(given(vec![0.2, 0.4, -0.1, 0.3]), true);
        let mut agent = build(spec, 4, 0.9);
        let steps = [(tr(0, 1, 1.0, 1), 1), (tr(1, 0, 0.5, 0), 0)];
        let mut q = [[0.2, 0.4, -0.1, 0.3]; 2];
        for (n, (t, i)) in steps.iter().enumerate() {
            let alpha = 2.0 * 0.25 * 4.0 / (n as f64 + 4.0);
            let rho: f64 = 0.5 * 10.0 / (n as f64 + 10.0);
            let s2 = t.next_state * 2;
            let mean = |k: usize| (q[0][k] + q[1][k]) / 2.0;
            let target = t.reward + 0.9 * (f64::max(mean(s2), mean(s2 + 1)) - rho.sqrt());
            let x = t.state * 2 + t.action;
            q[*i][x] += alpha * (target - q[*i][x]);
            let other = agent.thetas()[1 - i].clone();
            agent.step_selected(t, &f, SelectorDraw(*i)).unwrap();
            assert_eq!(agent.thetas()[1 - i], other);
        }
        for c in 0..2 {
            for k in 0..4 {
                assert!((agent.thetas()[c][k] - q[c][k]).abs() < 1e-12);
            }
        }
        let recomputed = agent.average();
        for (a, b) in recomputed.iter().zip(agent.tracked_average()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(agent.step_counter(), 2);
    }

    #[test]
    fn linearized_matches_twora_when_greedy_is_optimal() {
        let f = FeatureMap::canonical(2, 2);
        let theta = vec![0.2, 0.4, -0.1, 0.3];
        let base =
            AgentSpec::new(Variant::TwoRa, 3, 0.1, 10.0).with_init(given(theta.clone()), true);
        let mut robust = build(base.clone(), 4, 0.9);
        let mut lin_spec = base;
        lin_spec.variant = Variant::TwoRaLinearized;
        // Greedy actions of θ: state 0 → 1, state 1 → 1.
        let mut lin = build(lin_spec.with_pi_star(vec![1, 1]), 4, 0.9);
        let t = tr(0, 0, 0.7, 1);
        robust.step_selected(&t, &f, SelectorDraw(2)).unwrap();
        lin.step_selected(&t, &f, SelectorDraw(2)).unwrap();
        assert_eq!(robust.thetas(), lin.thetas());
    }

    #[test]
    fn linearized_update_is_affine() {
        // step(θ) − step(0) is linear in θ: check additivity on two inputs.
        let f = FeatureMap::from_row_major(
            3,
            4,
            vec![
                1.0, 0.5, 0.0, 0.2, //
                0.0, 1.0, 0.3, 0.0, //
                0.4, 0.0, 1.0, 1.0,
            ],
        )
        .unwrap();
        let t = tr(1, 0, 0.9, 0);
        let run = |init: Vec<f64>| {
            let mut spec = AgentSpec::new(Variant::TwoRaLinearized, 2, 0.1, 10.0)
                .with_init(given(init), true)
                .with_pi_star(vec![1, 0]);
            spec.identical_init = true;
            let mut agent = spec.build(3, 2, 0.9, &mut stream(0, "x")).unwrap();
            agent.step_selected(&t, &f, SelectorDraw(1)).unwrap();
            agent.thetas().concat()
        };
        let zero = run(vec![0.0; 3]);
        let a = run(vec![0.3, -0.2, 0.5]);
        let b = run(vec![-1.0, 0.4, 0.1]);
        let ab = run(vec![-0.7, 0.2, 0.6]);
        for k in 0..zero.len() {
            let lhs = ab[k] - zero[k];
            let rhs = (a[k] - zero[k]) + (b[k] - zero[k]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_variant_and_dimension_errors() {
        let f = FeatureMap::canonical(2, 2);
        let mut agent = build(AgentSpec::new(Variant::Watkins, 1, 0.1, 10.0), 4, 0.9);
        assert!(matches!(
            agent.twora_step(&tr(0, 0, 0.0, 0), &f, &mut stream(0, "r")),
            Err(Error::WrongVariant { .. })
        ));
        let big = FeatureMap::canonical(3, 2);
        assert!(matches!(
            agent.watkins_step(&tr(0, 0, 0.0, 0), &big),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let f = FeatureMap::canonical(3, 2);
        let spec = AgentSpec::new(Variant::Averaged, 3, 0.3, 7.0).with_init(
            Init::Uniform {
                low: 0.0,
                high: 2.0,
            },
            false,
        );
        let mut agent = spec.build(6, 2, 0.77, &mut stream(3, "init")).unwrap();
        let mut rng = stream(3, "steps");
        for n in 0..50 {
            let t = tr(n % 3, n % 2, 0.1 * n as f64, (n * 7) % 3);
            agent.step(&t, &f, &mut rng).unwrap();
        }
        let back = Agent::from_json(&agent.to_json()).unwrap();
        assert_eq!(back, agent);
        assert_eq!(back.digest(), agent.digest());
    }

    #[test]
    fn identical_init_copies() {
        let spec = AgentSpec::new(Variant::TwoRa, 4, 0.1, 10.0).with_init(
            Init::Uniform {
                low: 0.0,
                high: 2.0,
            },
            true,
        );
        let agent = spec.build(5, 1, 0.9, &mut stream(1, "i")).unwrap();
        assert!(agent.thetas().iter().all(|t| t == &agent.thetas()[0]));
        let spec = spec.with_init(
            Init::Uniform {
                low: 0.0,
                high: 2.0,
            },
            false,
        );
        let agent = spec.build(5, 1, 0.9, &mut stream(1, "i")).unwrap();
        assert_ne!(agent.thetas()[0], agent.thetas()[1]);
        assert!(agent
            .thetas()
            .iter()
            .flatten()
            .all(|&v| (0.0..2.0).contains(&v)));
    }

    #[test]
    fn selector_is_uniform() {
        let mut rng = stream(17, "selector");
        let n = 7;
        let draws = 100_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[SelectorDraw::draw(n, &mut rng).0] += 1;
        }
        let p = 1.0 / n as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn terminal_transition_does_not_bootstrap() {
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::Watkins, 1, 1.0, 1e300)
            .with_init(given(vec![0.0, 0.0, 5.0, 5.0]), true);
        let mut agent = build(spec, 4, 0.9);
        let mut t = tr(0, 0, 1.0, 1);
        t.terminal = true;
        agent.watkins_step(&t, &f).unwrap();
        assert!((agent.thetas()[0][0] - 1.0).abs() < 1e-15);
    }
}
