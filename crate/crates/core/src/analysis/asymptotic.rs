//! Asymptotic covariance of the averaged estimator.
//!
//! All quantities live in coordinates shifted by the linear fixed point
//! `θ*`, where the per-sample TD noise
//! `b(x, s') = φ(x)(r(x) + γ φ(s', π*(s'))ᵀθ* − φ(x)ᵀθ*)` has stationary
//! mean zero and its autocovariance series converges.

use nalgebra::{DMatrix, DVector};

use super::lyapunov::{lyapunov_residual, lyapunov_solve};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{
    solve_optimal_q, state_action_chain, stationary_distribution, Policy, TabularMdp,
};

/// Minimal action-value gap for the optimal policy to count as unique.
pub const UNIQUENESS_GAP: f64 = 1e-9;

const STATIONARY_TOL: f64 = 1e-14;

/// Noise statistics of the behavioural chain under the optimal policy.
#[derive(Debug, Clone)]
pub struct NoiseSeries {
    pub mu: Vec<f64>,
    pub pi_star: Vec<usize>,
    pub theta_star: DVector<f64>,
    /// `ΦDΦᵀ`.
    pub a1: DMatrix<f64>,
    /// `γΦDPS_{π*}Φᵀ`.
    pub a2: DMatrix<f64>,
    /// `E[b bᵀ]` under the stationary law.
    pub e0: DMatrix<f64>,
    /// `½ Σ_{n≥1} E[b_n b_0ᵀ + b_0 b_nᵀ]`.
    pub b2: DMatrix<f64>,
    /// `E0 + B2`.
    pub b1: DMatrix<f64>,
}

impl NoiseSeries {
    pub fn dim(&self) -> usize {
        self.a1.nrows()
    }

    /// Noise covariance of the `N`-copy stacked recursion: diagonal blocks
    /// `N·E0 + 2B2`, off-diagonal blocks `2B2`.
    pub fn sigma_b(&self, copies: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut sigma = DMatrix::zeros(copies * d, copies * d);
        let off = &self.b2 * 2.0;
        let diag = &self.e0 * copies as f64 + &off;
        for i in 0..copies {
            for j in 0..copies {
                let block = if i == j { &diag } else { &off };
                sigma.view_mut((i * d, j * d), (d, d)).copy_from(block);
            }
        }
        sigma
    }

    /// Noise covariance of a single Q-learning iterate, `E0 + 2B2`.
    pub fn sigma_watkins(&self) -> DMatrix<f64> {
        &self.e0 + &self.b2 * 2.0
    }
}

fn optimal_actions(mdp: &TabularMdp, gap_threshold: f64) -> Result<Vec<usize>> {
    let q = solve_optimal_q(mdp, 1e-13);
    let na = mdp.num_actions();
    q.chunks(na)
        .enumerate()
        .map(|(s, row)| {
            let best = crate::mdp::argmax(row);
            let gap = row
                .iter()
                .enumerate()
                .filter(|&(a, _)| a != best)
                .map(|(_, v)| row[best] - v)
                .fold(f64::INFINITY, f64::min);
            if gap <= gap_threshold {
                Err(Error::NonUniqueOptimalPolicy { state: s, gap })
            } else {
                Ok(best)
            }
        })
        .collect()
}

/// `S_{π*}`: `S × |X|` selection of the pair `(s, π*(s))`.
fn selection_matrix(pi_star: &[usize], num_actions: usize) -> DMatrix<f64> {
    let s = pi_star.len();
    let mut sel = DMatrix::zeros(s, s * num_actions);
    for (state, &a) in pi_star.iter().enumerate() {
        sel[(state, state * num_actions + a)] = 1.0;
    }
    sel
}

struct ChainPieces {
    mu: Vec<f64>,
    pi_star: Vec<usize>,
    theta_star: DVector<f64>,
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    /// TD error at `θ*` per `(x, s')`, row-major `|X| × S`.
    delta: Vec<f64>,
}

fn chain_pieces(mdp: &TabularMdp, behavior: &Policy, features: &FeatureMap) -> Result<ChainPieces> {
    let (ns, na, nx) = (mdp.num_states(), mdp.num_actions(), mdp.num_pairs());
    if features.num_pairs() != nx {
        return Err(Error::DimensionMismatch {
            expected: nx,
            found: features.num_pairs(),
        });
    }
    let mu = stationary_distribution(mdp, behavior, STATIONARY_TOL).map_err(|e| match e {
        Error::NotConverged { .. } => Error::NotErgodic,
        other => other,
    })?;
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::NotErgodic);
    }
    let pi_star = optimal_actions(mdp, UNIQUENESS_GAP)?;
    let phi = features.matrix();
    let d_mat = DMatrix::from_diagonal(&DVector::from_column_slice(&mu));
    let kernel = mdp.kernel_matrix();
    let sel = selection_matrix(&pi_star, na);
    let phi_d = &phi * &d_mat;
    let a1 = &phi_d * phi.transpose();
    let a2 = &phi_d * &kernel * &sel * phi.transpose() * mdp.discount();
    let rhs = &phi_d * DVector::from_column_slice(mdp.rewards());
    let theta_star = (&a1 - &a2)
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("fixed point of the projected equation".into()))?;
    let values = features.values(theta_star.as_slice());
    let gamma = mdp.discount();
    let mut delta = vec![0.0; nx * ns];
    for x in 0..nx {
        for s2 in 0..ns {
            delta[x * ns + s2] =
                mdp.rewards()[x] + gamma * values[s2 * na + pi_star[s2]] - values[x];
        }
    }
    Ok(ChainPieces {
        mu,
        pi_star,
        theta_star,
        a1,
        a2,
        delta,
    })
}

/// Stationary second moment and summed autocovariance of the shifted noise.
/// The series is summed in closed form with the fundamental matrix
/// `Z = (I − P_beh + 1μᵀ)⁻¹`.
pub fn sigma_b_series(
    mdp: &TabularMdp,
    behavior: &Policy,
    features: &FeatureMap,
    tol: f64,
) -> Result<NoiseSeries> {
    let pieces = chain_pieces(mdp, behavior, features)?;
    let (ns, na, nx) = (mdp.num_states(), mdp.num_actions(), mdp.num_pairs());
    let dim = features.dim();
    let mu = &pieces.mu;
    let delta = &pieces.delta;

    let mut e0 = DMatrix::<f64>::zeros(dim, dim);
    let mut h = DMatrix::<f64>::zeros(nx, dim);
    let mut m = DMatrix::<f64>::zeros(ns, dim);
    for x in 0..nx {
        let phi_x = DVector::from_vec(features.column(x));
        let row = mdp.kernel_row(x);
        let second: f64 = (0..ns).map(|s2| row[s2] * delta[x * ns + s2].powi(2)).sum();
        let first: f64 = (0..ns).map(|s2| row[s2] * delta[x * ns + s2]).sum();
        e0 += &phi_x * phi_x.transpose() * (mu[x] * second);
        h.set_row(x, &(phi_x.transpose() * first));
        for s2 in 0..ns {
            let w = mu[x] * row[s2] * delta[x * ns + s2];
            if w != 0.0 {
                let mut r = m.row_mut(s2);
                r += phi_x.transpose() * w;
            }
        }
    }

    let mu_vec = DVector::from_column_slice(mu);
    let mean = h.transpose() * &mu_vec;
    let scale = 1.0 + h.amax();
    if mean.amax() > tol * scale {
        return Err(Error::SeriesDiverged {
            mean_norm: mean.norm(),
        });
    }

    let p_beh = state_action_chain(mdp, behavior);
    let ones = DVector::from_element(nx, 1.0);
    let z = (DMatrix::identity(nx, nx) - &p_beh + &ones * mu_vec.transpose())
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("fundamental matrix".into()))?;
    let mut r_mat = DMatrix::<f64>::zeros(ns, nx);
    for s in 0..ns {
        for a in 0..na {
            r_mat[(s, s * na + a)] = behavior.probs(s)[a];
        }
    }
    let w = r_mat * z * h;
    let cross = w.transpose() * m;
    let b2 = (&cross + cross.transpose()) * 0.5;
    let b1 = &e0 + &b2;
    Ok(NoiseSeries {
        mu: pieces.mu,
        pi_star: pieces.pi_star,
        theta_star: pieces.theta_star,
        a1: pieces.a1,
        a2: pieces.a2,
        e0,
        b2,
        b1,
    })
}

/// `Σ_{n=1}^{terms} E[b(Y_n) b(Y_0)ᵀ]` by direct propagation on the chain of
/// observed tuples `Y = (x, s')`.
pub fn cross_covariance_truncated(
    mdp: &TabularMdp,
    behavior: &Policy,
    features: &FeatureMap,
    terms: usize,
) -> Result<DMatrix<f64>> {
    let pieces = chain_pieces(mdp, behavior, features)?;
    let (ns, na, nx) = (mdp.num_states(), mdp.num_actions(), mdp.num_pairs());
    let dim = features.dim();
    let ny = nx * ns;
    // Transition of the tuple chain: (x, s') → ((s', a'), s'').
    let mut q = DMatrix::<f64>::zeros(ny, ny);
    for x in 0..nx {
        for s1 in 0..ns {
            for a1 in 0..na {
                let x1 = s1 * na + a1;
                let pa = behavior.probs(s1)[a1];
                for s2 in 0..ns {
                    q[(x * ns + s1, x1 * ns + s2)] += pa * mdp.kernel_row(x1)[s2];
                }
            }
        }
    }
    let mut nu = DVector::<f64>::zeros(ny);
    let mut b = DMatrix::<f64>::zeros(ny, dim);
    for x in 0..nx {
        let phi_x = features.column(x);
        for s1 in 0..ns {
            let y = x * ns + s1;
            nu[y] = pieces.mu[x] * mdp.kernel_row(x)[s1];
            for (k, v) in phi_x.iter().enumerate() {
                b[(y, k)] = v * pieces.delta[y];
            }
        }
    }
    let weighted_b0 = DMatrix::from_fn(ny, dim, |y, k| nu[y] * b[(y, k)]);
    let mut propagated = b.clone();
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    for _ in 0..terms {
        propagated = &q * propagated;
        sum += propagated.transpose() * &weighted_b0;
    }
    Ok(sum)
}

/// Everything entering the stacked Lyapunov equation.
#[derive(Debug, Clone)]
pub struct AsymptoticModel {
    pub copies: usize,
    pub g: f64,
    pub g0: f64,
    pub noise: NoiseSeries,
    /// `Ā = Ā₂ − Ā₁`.
    pub a_bar: DMatrix<f64>,
    /// Stacked drift: diagonal blocks `Ā₂/N − Ā₁`, off-diagonal `Ā₂/N`.
    pub a_stacked: DMatrix<f64>,
    pub sigma_b: DMatrix<f64>,
}

fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn build_asymptotic_model(
    mdp: &TabularMdp,
    behavior: &Policy,
    features: &FeatureMap,
    g: f64,
    copies: usize,
) -> Result<AsymptoticModel> {
    if copies == 0 {
        return Err(Error::ShapeMismatch("at least one copy is required".into()));
    }
    let noise = sigma_b_series(mdp, behavior, features, 1e-8)?;
    let d = noise.dim();
    let a_bar = &noise.a2 - &noise.a1;
    let shared = &noise.a2 / copies as f64;
    let mut a_stacked = DMatrix::zeros(copies * d, copies * d);
    for i in 0..copies {
        for j in 0..copies {
            let mut block = shared.clone();
            if i == j {
                block -= &noise.a1;
            }
            a_stacked.view_mut((i * d, j * d), (d, d)).copy_from(&block);
        }
    }
    let g0 = if features.is_canonical() {
        let mu_min = noise.mu.iter().cloned().fold(f64::INFINITY, f64::min);
        1.0 / (mu_min * (1.0 - mdp.discount()))
    } else {
        let top = spectral_abscissa(&a_bar).max(spectral_abscissa(&a_stacked));
        if top < 0.0 {
            -1.0 / top
        } else {
            f64::INFINITY
        }
    };
    let sigma_b = noise.sigma_b(copies);
    Ok(AsymptoticModel {
        copies,
        g,
        g0,
        noise,
        a_bar,
        a_stacked,
        sigma_b,
    })
}

#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub sigma_inf: DMatrix<f64>,
    /// Trace of the averaged estimator's asymptotic covariance.
    pub predicted_trace: f64,
    /// Max-abs entry of the equation residual.
    pub residual: f64,
}

fn solve_scaled(a: &DMatrix<f64>, sigma: &DMatrix<f64>, g: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    let drift = DMatrix::identity(n, n) * 0.5 + a * g;
    let forcing = sigma * (g * g);
    let x = lyapunov_solve(&drift, &forcing)?;
    let x = (&x + x.transpose()) * 0.5;
    let residual = lyapunov_residual(&drift, &x, &forcing);
    Ok((x, residual))
}

impl AsymptoticModel {
    fn check_gain(&self) -> Result<()> {
        if !(self.g > self.g0) {
            return Err(Error::GainBelowThreshold {
                g: self.g,
                g0: self.g0,
            });
        }
        Ok(())
    }

    /// Averaging map `J = (1/N)[I … I]` applied on both sides of a stacked
    /// covariance.
    pub fn averaged_block(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.noise.dim();
        let n = self.copies;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..n {
            for j in 0..n {
                out += sigma.view((i * d, j * d), (d, d));
            }
        }
        out / (n * n) as f64
    }
}

/// Solve `Σ(½I + g𝖠ᵀ) + (½I + g𝖠)Σ + g²Σ_b = 0` for the stacked recursion.
pub fn lyapunov_amse(model: &AsymptoticModel) -> Result<LyapunovSolution> {
    model.check_gain()?;
    let (sigma_inf, residual) = solve_scaled(&model.a_stacked, &model.sigma_b, model.g)?;
    let predicted_trace = model.averaged_block(&sigma_inf).trace();
    Ok(LyapunovSolution {
        sigma_inf,
        predicted_trace,
        residual,
    })
}

/// The single-iterate equation with drift `Ā` and noise `E0 + 2B2`.
pub fn watkins_amse(model: &AsymptoticModel) -> Result<LyapunovSolution> {
    model.check_gain()?;
    let (sigma_inf, residual) = solve_scaled(&model.a_bar, &model.noise.sigma_watkins(), model.g)?;
    let predicted_trace = sigma_inf.trace();
    Ok(LyapunovSolution {
        sigma_inf,
        predicted_trace,
        residual,
    })
}
