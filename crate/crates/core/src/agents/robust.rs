use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Scores `φ(s',a')ᵀθ − √ρ ‖φ(s',a')‖₂` for every action at `next_state`.
pub fn penalized_scores(
    features: &FeatureMap,
    num_actions: usize,
    next_state: usize,
    theta: &[f64],
    rho: f64,
) -> Vec<f64> {
    let radius = rho.sqrt();
    (0..num_actions)
        .map(|a| {
            let x = next_state * num_actions + a;
            features.dot(x, theta) - radius * features.norm(x)
        })
        .collect()
}

/// Closed form of the robust bootstrap value
/// `γ max_{a'} min_{‖θ'−θ̂‖² ≤ ρ} φ(s',a')ᵀθ' = γ max_{a'} { φ(s',a')ᵀθ̂ − √ρ ‖φ(s',a')‖₂ }`.
///
/// The outer `φ(x)` factor of the update is applied by the caller.
pub fn robust_target(
    features: &FeatureMap,
    num_actions: usize,
    next_state: usize,
    theta_hat: &[f64],
    rho: f64,
    gamma: f64,
) -> Result<f64> {
    debug_assert!(rho >= 0.0);
    let radius = rho.sqrt();
    let mut best = f64::NEG_INFINITY;
    for a in 0..num_actions {
        let x = next_state * num_actions + a;
        let score = features.dot(x, theta_hat) - radius * features.norm(x);
        if !score.is_finite() {
            return Err(Error::NonFiniteTheta);
        }
        if score > best {
            best = score;
        }
    }
    Ok(gamma * best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_max_without_radius() {
        let f = FeatureMap::canonical(2, 2);
        let theta = [0.0, 0.0, 1.0, 3.0];
        assert_eq!(robust_target(&f, 2, 1, &theta, 0.0, 0.5).unwrap(), 1.5);
    }

    #[test]
    fn unit_norm_penalty() {
        let f = FeatureMap::canonical(2, 2);
        let theta = [0.0, 0.0, 1.0, 3.0];
        assert_eq!(robust_target(&f, 2, 1, &theta, 4.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn matches_minimiser_on_the_ball() {
        // One state, one action, φ = (3, 4), θ̂ = (1, 1), ρ = 1.
        let f = FeatureMap::from_row_major(2, 1, vec![3.0, 4.0]).unwrap();
        let theta_hat = [1.0, 1.0];
        let value = robust_target(&f, 1, 0, &theta_hat, 1.0, 1.0).unwrap();
        assert!((value - 2.0).abs() < 1e-12);
        // θ* = θ̂ − √ρ φ/‖φ‖ lies on the ball boundary and attains the value.
        let star = [1.0 - 3.0 / 5.0, 1.0 - 4.0 / 5.0];
        let dist2: f64 = star
            .iter()
            .zip(theta_hat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!((dist2 - 1.0).abs() < 1e-12);
        assert!((3.0 * star[0] + 4.0 * star[1] - value).abs() < 1e-12);
    }

    #[test]
    fn non_finite_theta_is_rejected() {
        let f = FeatureMap::canonical(1, 2);
        assert!(matches!(
            robust_target(&f, 2, 0, &[f64::NAN, 1.0], 0.0, 0.9),
            Err(Error::NonFiniteTheta)
        ));
    }

    proptest! {
        #[test]
        fn nonincreasing_in_rho(
            theta in proptest::collection::vec(-5.0f64..5.0, 6),
            phi in proptest::collection::vec(-2.0f64..2.0, 18),
            rho_lo in 0.0f64..4.0,
            extra in 0.0f64..4.0,
        ) {
            let f = FeatureMap::from_row_major(6, 3, phi).unwrap();
            let lo = robust_target(&f, 3, 0, &theta, rho_lo, 0.9).unwrap();
            let hi = robust_target(&f, 3, 0, &theta, rho_lo + extra, 0.9).unwrap();
            prop_assert!(hi <= lo + 1e-12);
        }
    }
}
