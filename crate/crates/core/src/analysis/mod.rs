mod asymptotic;
mod bias;
mod lyapunov;
mod metrics;

pub use asymptotic::{
    build_asymptotic_model, cross_covariance_truncated, lyapunov_amse, sigma_b_series,
    watkins_amse, AsymptoticModel, LyapunovSolution, NoiseSeries, UNIQUENESS_GAP,
};
pub use bias::{measure_bias, BiasReport, BiasSetup, MIN_BIAS_RUNS};
pub use lyapunov::{lyapunov_kronecker, lyapunov_residual, lyapunov_sign, lyapunov_solve};
pub use metrics::{empirical_amse, mse_to_optimal, AmsePoint};
