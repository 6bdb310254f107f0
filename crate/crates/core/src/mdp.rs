//! Finite MDPs, policies and the exact reference quantities used as ground
//! truth: the optimal action-value function, greedy policies and the
//! stationary distribution of the behavioral state-action chain.
//!
//! State-action pairs are flattened state-major: `x = s * num_actions + a`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_index;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Default iteration cap for [`stationary_distribution`].
pub const POWER_ITERATION_CAP: usize = 1_000_000;

/// Finite MDP with deterministic rewards `r(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    /// Row-major `(S·A) × S`.
    kernel: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
}

/// On-disk form of a [`TabularMdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        TabularMdp::new(
            doc.num_states,
            doc.num_actions,
            doc.kernel,
            doc.reward,
            doc.discount,
            doc.initial_dist,
        )
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(m: TabularMdp) -> Self {
        MdpDocument {
            num_states: m.num_states,
            num_actions: m.num_actions,
            kernel: m.kernel,
            reward: m.reward,
            discount: m.discount,
            initial_dist: m.initial_dist,
        }
    }
}

fn check_distribution(row: usize, probs: &[f64]) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    if !sum.is_finite() || (sum - 1.0).abs() > STOCHASTIC_TOL || min < 0.0 {
        return Err(Error::RowNotStochastic { row, sum, min });
    }
    Ok(())
}

impl TabularMdp {
    /// Validating constructor. `kernel` is row-major `(S·A) × S`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        kernel: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::ShapeMismatch(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        let pairs = num_states * num_actions;
        if kernel.len() != pairs * num_states {
            return Err(Error::ShapeMismatch(format!(
                "kernel has {} entries, expected {} x {}",
                kernel.len(),
                pairs,
                num_states
            )));
        }
        if reward.len() != pairs {
            return Err(Error::ShapeMismatch(format!(
                "reward has {} entries, expected {pairs}",
                reward.len()
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::ShapeMismatch(format!(
                "initial distribution has {} entries, expected {num_states}",
                initial_dist.len()
            )));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::BadDiscount(discount));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFiniteInput("reward".into()));
        }
        for (x, row) in kernel.chunks(num_states).enumerate() {
            check_distribution(x, row)?;
        }
        check_distribution(pairs, &initial_dist)?;
        Ok(TabularMdp {
            num_states,
            num_actions,
            kernel,
            reward,
            discount,
            initial_dist,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `|S| · |A|`.
    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[self.pair(state, action)]
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    #[inline]
    pub fn pair(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    /// Next-state distribution of pair `x`.
    #[inline]
    pub fn kernel_row(&self, x: usize) -> &[f64] {
        &self.kernel[x * self.num_states..(x + 1) * self.num_states]
    }

    /// Return a copy with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::BadDiscount(discount));
        }
        Ok(TabularMdp {
            discount,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MDP serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Kernel as a dense `(S·A) × S` matrix.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.num_pairs(), self.num_states, &self.kernel)
    }

    /// Draw an initial state from `initial_dist`.
    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.initial_dist, rng)
    }
}

/// Build and validate an MDP from a nested `(S·A) × S` kernel.
pub fn build_tabular_mdp(
    kernel: &[Vec<f64>],
    reward: &[f64],
    discount: f64,
    initial_dist: &[f64],
) -> Result<TabularMdp> {
    let num_states = initial_dist.len();
    if num_states == 0 || kernel.is_empty() || !kernel.len().is_multiple_of(num_states) {
        return Err(Error::ShapeMismatch(format!(
            "{} kernel rows are not a multiple of {num_states} states",
            kernel.len()
        )));
    }
    if let Some(row) = kernel.iter().find(|row| row.len() != num_states) {
        return Err(Error::ShapeMismatch(format!(
            "kernel row of length {} in an MDP with {num_states} states",
            row.len()
        )));
    }
    let num_actions = kernel.len() / num_states;
    TabularMdp::new(
        num_states,
        num_actions,
        kernel.concat(),
        reward.to_vec(),
        discount,
        initial_dist.to_vec(),
    )
}

/// One sampled transition `(s, a, r, s')`.
///
/// `terminal` marks episode ends in episodic tasks; bootstrapping is skipped
/// for terminal transitions. Continuing MDPs never set it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    #[serde(default)]
    pub terminal: bool,
}

impl Transition {
    pub fn new(state: usize, action: usize, reward: f64, next_state: usize) -> Self {
        Transition {
            state,
            action,
            reward,
            next_state,
            terminal: false,
        }
    }
}

/// Draw `s' ~ P(· | s, a)` by inverse CDF over the kernel row in index order.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    state: usize,
    action: usize,
    rng: &mut R,
) -> Transition {
    let x = mdp.pair(state, action);
    let next_state = sample_index(mdp.kernel_row(x), rng);
    Transition::new(state, action, mdp.reward[x], next_state)
}

/// Stochastic policy `π: S → Δ(A)` stored as a row-major `S × A` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    table: Vec<f64>,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != num_states * num_actions || num_actions == 0 {
            return Err(Error::ShapeMismatch(format!(
                "policy table has {} entries, expected {num_states} x {num_actions}",
                table.len()
            )));
        }
        for (s, row) in table.chunks(num_actions).enumerate() {
            check_distribution(s, row)?;
        }
        Ok(Policy {
            num_states,
            num_actions,
            table,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy {
            num_states,
            num_actions,
            table: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// One-hot policy choosing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut table = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::ShapeMismatch(format!(
                    "action {a} out of range in state {s}"
                )));
            }
            table[s * num_actions + a] = 1.0;
        }
        Ok(Policy {
            num_states: actions.len(),
            num_actions,
            table,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probs(&self, state: usize) -> &[f64] {
        &self.table[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// The action of a deterministic policy, `None` if the row is not one-hot.
    pub fn action(&self, state: usize) -> Option<usize> {
        let row = self.probs(state);
        let a = row.iter().position(|&p| p == 1.0)?;
        row.iter()
            .enumerate()
            .all(|(b, &p)| b == a || p == 0.0)
            .then_some(a)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states).all(|s| self.action(s).is_some())
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_index(self.probs(state), rng)
    }
}

/// Lowest index of the maximum; `values` must be non-empty and finite.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Bellman optimality operator `(TQ)(s,a) = r(s,a) + γ Σ_{s'} P(s'|s,a) max_{a'} Q(s',a')`.
pub fn bellman_operator(mdp: &TabularMdp, q: &[f64]) -> Vec<f64> {
    let values: Vec<f64> = q
        .chunks(mdp.num_actions)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (0..mdp.num_pairs())
        .map(|x| {
            let expected: f64 = mdp
                .kernel_row(x)
                .iter()
                .zip(&values)
                .map(|(p, v)| p * v)
                .sum();
            mdp.reward[x] + mdp.discount * expected
        })
        .collect()
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Result of value iteration.
#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub q: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Value iteration from `Q = 0` until `‖Q − T(Q)‖∞ ≤ tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> ValueIteration {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut q = vec![0.0; mdp.num_pairs()];
    let mut iterations = 0;
    loop {
        let next = bellman_operator(mdp, &q);
        let residual = sup_distance(&q, &next);
        if residual <= tol {
            return ValueIteration {
                q,
                iterations,
                residual,
            };
        }
        q = next;
        iterations += 1;
    }
}

/// Optimal action-value function with Bellman residual at most `tol`.
pub fn solve_optimal_q(mdp: &TabularMdp, tol: f64) -> Vec<f64> {
    value_iteration(mdp, tol).q
}

/// Deterministic greedy policy, ties broken toward the lowest action index.
pub fn greedy_policy(q: &[f64], num_states: usize, num_actions: usize) -> Result<Policy> {
    if q.len() != num_states * num_actions {
        return Err(Error::DimensionMismatch {
            expected: num_states * num_actions,
            found: q.len(),
        });
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("action values".into()));
    }
    let actions: Vec<usize> = q.chunks(num_actions).map(argmax).collect();
    Policy::deterministic(num_actions, &actions)
}

/// Transition matrix of the state-action chain `X_n = (S_n, A_n)` under
/// `behavior`: `P_beh[(s,a),(s',a')] = P(s'|s,a) π(a'|s')`.
pub fn state_action_chain(mdp: &TabularMdp, behavior: &Policy) -> DMatrix<f64> {
    let n = mdp.num_pairs();
    let na = mdp.num_actions;
    DMatrix::from_fn(n, n, |x, y| {
        let (s_next, a_next) = (y / na, y % na);
        mdp.kernel_row(x)[s_next] * behavior.probs(s_next)[a_next]
    })
}

/// Invariant distribution μ of the behavioral state-action chain by power
/// iteration started from a point mass on pair 0.
///
/// Stops once `‖μᵀP − μᵀ‖₁ ≤ tol`; periodic or slowly mixing chains hit the
/// iteration cap and report [`Error::NotConverged`].
pub fn stationary_distribution(mdp: &TabularMdp, behavior: &Policy, tol: f64) -> Result<Vec<f64>> {
    stationary_distribution_capped(mdp, behavior, tol, POWER_ITERATION_CAP)
}

pub fn stationary_distribution_capped(
    mdp: &TabularMdp,
    behavior: &Policy,
    tol: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    if behavior.num_states() != mdp.num_states() || behavior.num_actions() != mdp.num_actions() {
        return Err(Error::ShapeMismatch(
            "behavior policy does not fit the MDP".into(),
        ));
    }
    let transposed = state_action_chain(mdp, behavior).transpose();
    let n = mdp.num_pairs();
    let mut mu = DVector::zeros(n);
    mu[0] = 1.0;
    for _ in 0..max_iterations {
        let next = &transposed * &mu;
        let change: f64 = (&next - &mu).iter().map(|v| v.abs()).sum();
        if change <= tol {
            let total: f64 = mu.iter().sum();
            return Ok(mu.iter().map(|v| v / total).collect());
        }
        mu = next;
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
    })
}

/// Exact action values `Q^π` of a stationary policy by a dense linear solve
/// of `(I − γ P_π) Q = r`.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    let n = mdp.num_pairs();
    let chain = state_action_chain(mdp, policy);
    let system = DMatrix::identity(n, n) - chain * mdp.discount;
    let rhs = DVector::from_column_slice(&mdp.reward);
    system
        .lu()
        .solve(&rhs)
        .map(|q| q.iter().copied().collect())
        .ok_or_else(|| Error::SingularSystem("policy evaluation".into()))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn random_mdp(seed: u64, states: usize, actions: usize, gamma: f64) -> TabularMdp {
        let mut rng = stream(seed, "random-mdp");
        let mut kernel = Vec::new();
        for _ in 0..states * actions {
            let raw: Vec<f64> = (0..states).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let head: f64 = row[..states - 1].iter().sum();
            row[states - 1] = 1.0 - head;
            kernel.extend(row);
        }
        let reward = (0..states * actions).map(|_| rng.random::<f64>()).collect();
        let mut init = vec![0.0; states];
        init[0] = 1.0;
        TabularMdp::new(states, actions, kernel, reward, gamma, init).unwrap()
    }

    #[test]
    fn single_state_mdp_is_valid() {
        let mdp = build_tabular_mdp(&[vec![1.0]], &[1.0], 0.5, &[1.0]).unwrap();
        assert_eq!(mdp.num_pairs(), 1);
    }

    #[test]
    fn rejects_non_stochastic_row() {
        let err = build_tabular_mdp(
            &[vec![0.5, 0.6], vec![0.5, 0.5]],
            &[0.0, 0.0],
            0.5,
            &[1.0, 0.0],
        );
        assert!(matches!(err, Err(Error::RowNotStochastic { row: 0, .. })));
        let err = build_tabular_mdp(
            &[vec![1.5, -0.5], vec![0.5, 0.5]],
            &[0.0, 0.0],
            0.5,
            &[1.0, 0.0],
        );
        assert!(matches!(err, Err(Error::RowNotStochastic { .. })));
    }

    #[test]
    fn rejects_bad_discount() {
        for gamma in [1.0, 0.0, -0.1, f64::NAN] {
            let err = build_tabular_mdp(&[vec![1.0]], &[1.0], gamma, &[1.0]);
            assert!(matches!(err, Err(Error::BadDiscount(_))), "gamma {gamma}");
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err = build_tabular_mdp(&[vec![1.0, 0.0]], &[1.0, 2.0], 0.5, &[1.0, 0.0]);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
        let err = TabularMdp::new(1, 1, vec![1.0], vec![1.0, 1.0], 0.5, vec![1.0]);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zero_discount_gives_reward() {
        let mut mdp = random_mdp(3, 3, 2, 0.5);
        mdp.discount = 0.0;
        let q = solve_optimal_q(&mdp, 1e-12);
        assert_eq!(q, mdp.reward);
    }

    #[test]
    fn geometric_series() {
        let mdp = build_tabular_mdp(&[vec![1.0]], &[1.0], 0.5, &[1.0]).unwrap();
        let q = solve_optimal_q(&mdp, 1e-12);
        assert!((q[0] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn iteration_count_respects_bound() {
        for seed in 0..5 {
            let mdp = random_mdp(seed, 4, 3, 0.9);
            let tol = 1e-9;
            let vi = value_iteration(&mdp, tol);
            let r_max = mdp.reward.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            let gamma = mdp.discount;
            let bound = ((tol * (1.0 - gamma) / r_max).ln() / gamma.ln()).ceil() as usize + 1;
            assert!(vi.iterations <= bound, "{} > {}", vi.iterations, bound);
            assert!(vi.residual <= tol);
        }
    }

    /// Policy iteration with exact linear solves.
    fn policy_iteration(mdp: &TabularMdp) -> Vec<f64> {
        let mut actions = vec![0; mdp.num_states()];
        loop {
            let policy = Policy::deterministic(mdp.num_actions(), &actions).unwrap();
            let q = evaluate_policy(mdp, &policy).unwrap();
            let next: Vec<usize> = q
                .chunks(mdp.num_actions())
                .zip(&actions)
                .map(|(row, &cur)| {
                    let best = argmax(row);
                    if row[best] > row[cur] + 1e-12 {
                        best
                    } else {
                        cur
                    }
                })
                .collect();
            if next == actions {
                return q;
            }
            actions = next;
        }
    }

    #[test]
    fn value_iteration_matches_policy_iteration() {
        let mdp = random_mdp(11, 3, 2, 0.9);
        let q = solve_optimal_q(&mdp, 1e-12);
        let exact = policy_iteration(&mdp);
        assert!(sup_distance(&q, &exact) < 1e-8);
    }

    #[test]
    fn greedy_policy_examples() {
        let p = greedy_policy(&[1.0, 3.0], 1, 2).unwrap();
        assert_eq!(p.action(0), Some(1));
        let p = greedy_policy(&[2.0, 2.0], 1, 2).unwrap();
        assert_eq!(p.action(0), Some(0));
        assert!(matches!(
            greedy_policy(&[f64::NAN, 1.0], 1, 2),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn greedy_of_optimal_q_is_best_deterministic_policy() {
        let mdp = random_mdp(5, 5, 2, 0.9);
        let q = solve_optimal_q(&mdp, 1e-12);
        let greedy = greedy_policy(&q, 5, 2).unwrap();
        let greedy_value = evaluate_policy(&mdp, &greedy).unwrap();
        // Enumerate all 2^5 deterministic policies; compare state values
        // under the initial-state-free criterion (every state at once).
        let mut best = [f64::NEG_INFINITY; 5];
        for code in 0..(1usize << 5) {
            let actions: Vec<usize> = (0..5).map(|s| (code >> s) & 1).collect();
            let policy = Policy::deterministic(2, &actions).unwrap();
            let q_pi = evaluate_policy(&mdp, &policy).unwrap();
            for s in 0..5 {
                best[s] = best[s].max(q_pi[s * 2 + actions[s]]);
            }
        }
        for s in 0..5 {
            let a = greedy.action(s).unwrap();
            assert!((greedy_value[s * 2 + a] - best[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_row_frequencies() {
        let row = vec![1.0 / 6.0; 6];
        let mut kernel = Vec::new();
        for _ in 0..6 {
            kernel.extend(row.iter().copied());
        }
        let mdp = TabularMdp::new(6, 1, kernel, vec![0.0; 6], 0.5, row.clone()).unwrap();
        let mut rng = stream(99, "uniform-row");
        let draws = 600_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            counts[sample_step(&mdp, 2, 0, &mut rng).next_state] += 1;
        }
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square with 5 dof: P(X > 20.52) = 0.001
        assert!(chi2 < 20.52, "chi2 = {chi2}");
        for &c in &counts {
            assert!((c as f64 / draws as f64 - 1.0 / 6.0).abs() < 0.01 / 6.0);
        }
    }

    #[test]
    fn deterministic_row() {
        let mut kernel = vec![0.0; 6 * 6];
        for x in 0..6 {
            kernel[x * 6 + 5] = 1.0;
        }
        let mdp = TabularMdp::new(6, 1, kernel, vec![0.0; 6], 0.5, vec![1.0 / 6.0; 6]).unwrap();
        let mut rng = stream(1, "det");
        assert!((0..100).all(|_| sample_step(&mdp, 0, 0, &mut rng).next_state == 5));
    }

    #[test]
    fn identical_streams_give_identical_transitions() {
        let mdp = random_mdp(2, 4, 2, 0.9);
        let run = || {
            let mut rng = stream(5, "env");
            (0..1000)
                .map(|i| sample_step(&mdp, i % 4, i % 2, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn iid_chain_stationary_is_row() {
        let nu = [0.2, 0.5, 0.3];
        let kernel: Vec<f64> = (0..3).flat_map(|_| nu).collect();
        let mdp = TabularMdp::new(3, 1, kernel, vec![0.0; 3], 0.5, nu.to_vec()).unwrap();
        let mu = stationary_distribution(&mdp, &Policy::uniform(3, 1), 1e-13).unwrap();
        for (a, b) in mu.iter().zip(nu) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_chain_does_not_converge() {
        let kernel = vec![0.0, 1.0, 1.0, 0.0];
        let mdp = TabularMdp::new(2, 1, kernel, vec![0.0; 2], 0.5, vec![1.0, 0.0]).unwrap();
        let err = stationary_distribution_capped(&mdp, &Policy::uniform(2, 1), 1e-10, 10_000);
        assert!(matches!(err, Err(Error::NotConverged { .. })));
    }

    #[test]
    fn serialisation_round_trip_and_validation() {
        let mdp = random_mdp(4, 3, 2, 0.7);
        let back = TabularMdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(mdp, back);
        let broken = mdp.to_json().replace("0.7", "1.5");
        assert!(TabularMdp::from_json(&broken).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn bellman_operator_is_a_contraction(
            seed in 0u64..20,
            q1 in proptest::collection::vec(-10.0f64..10.0, 8),
            q2 in proptest::collection::vec(-10.0f64..10.0, 8),
        ) {
            let mdp = random_mdp(seed, 4, 2, 0.85);
            let d_in = sup_distance(&q1, &q2);
            let d_out = sup_distance(&bellman_operator(&mdp, &q1), &bellman_operator(&mdp, &q2));
            prop_assert!(d_out <= 0.85 * d_in + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solved_q_has_small_bellman_residual(seed in 0u64..1000, gamma in 0.1f64..0.95) {
            let mdp = random_mdp(seed, 4, 3, gamma);
            let q = solve_optimal_q(&mdp, 1e-9);
            prop_assert!(sup_distance(&q, &bellman_operator(&mdp, &q)) <= 1e-9);
        }

        #[test]
        fn stationary_distribution_is_invariant(seed in 0u64..1000) {
            let mdp = random_mdp(seed, 4, 2, 0.9);
            let behavior = Policy::uniform(4, 2);
            let mu = stationary_distribution(&mdp, &behavior, 1e-12).unwrap();
            let chain = state_action_chain(&mdp, &behavior);
            let mu_v = DVector::from_vec(mu.clone());
            let moved = chain.transpose() * &mu_v;
            let change: f64 = (&moved - &mu_v).iter().map(|v| v.abs()).sum();
            prop_assert!(change <= 1e-11);
            prop_assert!(mu.iter().all(|&m| m > 0.0));
            prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
