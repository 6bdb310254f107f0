use serde::{Deserialize, Serialize};

/// Which counter drives the step-size decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    /// `α_n = N α₀ w / (n + w)` with the global step counter `n`.
    PerStep,
    /// `α_e = N α₀ w / (e + w)` with the episode counter `e`.
    PerEpisode,
    /// `α_n = N g / n` with `g = alpha0`; `w_alpha` is unused.
    Harmonic,
}

/// Step-size schedule. `copies` is the multiplier `N`; schedules that are
/// not scaled by the number of estimates simply use `copies = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub alpha0: f64,
    pub w_alpha: f64,
    pub copies: usize,
    pub decay: Decay,
}

impl LearningRateSchedule {
    pub fn per_step(alpha0: f64, w_alpha: f64, copies: usize) -> Self {
        LearningRateSchedule {
            alpha0,
            w_alpha,
            copies,
            decay: Decay::PerStep,
        }
    }

    pub fn per_episode(alpha0: f64, w_alpha: f64, copies: usize) -> Self {
        LearningRateSchedule {
            alpha0,
            w_alpha,
            copies,
            decay: Decay::PerEpisode,
        }
    }

    pub fn harmonic(gain: f64, copies: usize) -> Self {
        LearningRateSchedule {
            alpha0: gain,
            w_alpha: 1.0,
            copies,
            decay: Decay::Harmonic,
        }
    }

    /// `α` at counter value `index` (step or episode, see [`Decay`]).
    #[inline]
    pub fn at(&self, index: u64) -> f64 {
        let scale = self.copies as f64 * self.alpha0;
        match self.decay {
            Decay::PerStep | Decay::PerEpisode => {
                scale * self.w_alpha / (index as f64 + self.w_alpha)
            }
            Decay::Harmonic => scale / index.max(1) as f64,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.alpha0 > 0.0 && self.w_alpha > 0.0 && self.copies >= 1
    }
}

/// `lr_at(schedule, n)`.
pub fn lr_at(schedule: &LearningRateSchedule, n: u64) -> f64 {
    schedule.at(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMode {
    /// `ρ_n = ρ₀ w / (n + w)`.
    Linear,
    /// `ρ_n = ρ₀ w / (n² + w)`.
    Quadratic,
    /// `ρ_n = ρ₀`, for fixed-radius bias experiments.
    Constant,
}

/// Radius schedule of the ambiguity ball (the ball radius is `√ρ_n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSchedule {
    pub rho0: f64,
    pub w_rho: f64,
    pub mode: RhoMode,
}

impl RhoSchedule {
    pub fn new(rho0: f64, w_rho: f64, mode: RhoMode) -> Self {
        RhoSchedule { rho0, w_rho, mode }
    }

    pub fn zero() -> Self {
        RhoSchedule::new(0.0, 1.0, RhoMode::Linear)
    }

    pub fn constant(rho: f64) -> Self {
        RhoSchedule::new(rho, 1.0, RhoMode::Constant)
    }

    #[inline]
    pub fn at(&self, n: u64) -> f64 {
        let n = n as f64;
        match self.mode {
            RhoMode::Linear => self.rho0 * self.w_rho / (n + self.w_rho),
            RhoMode::Quadratic => self.rho0 * self.w_rho / (n * n + self.w_rho),
            RhoMode::Constant => self.rho0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.rho0 >= 0.0 && self.w_rho > 0.0
    }
}

/// `rho_at(schedule, n)`.
pub fn rho_at(schedule: &RhoSchedule, n: u64) -> f64 {
    schedule.at(n)
}
