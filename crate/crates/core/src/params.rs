use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mutation rate `theta` and selection rate `sigma`, both in coalescent
/// time units.
///
/// With `n` lineages the block-counting process jumps down at rate
/// `n(n-1+theta)/2` and up at rate `sigma*n/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    theta: f64,
    sigma: f64,
}

impl ModelParams {
    pub fn new(theta: f64, sigma: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "theta must be finite and >= 0, got {theta}"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { theta, sigma })
    }

    /// Pure Kingman coalescent.
    pub const fn kingman() -> Self {
        Self {
            theta: 0.0,
            sigma: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same mutation rate with selection switched off.
    pub fn without_selection(&self) -> Self {
        Self {
            theta: self.theta,
            sigma: 0.0,
        }
    }

    /// Death rate `mu(n) = n(n-1+theta)/2`.
    #[inline]
    pub fn death_rate(&self, n: usize) -> f64 {
        let n = n as f64;
        if n == 0.0 {
            return 0.0;
        }
        0.5 * n * (n - 1.0 + self.theta)
    }

    /// Birth rate `lambda(n) = sigma*n/2`.
    #[inline]
    pub fn birth_rate(&self, n: usize) -> f64 {
        0.5 * self.sigma * n as f64
    }

    /// Total jump rate out of level `n`.
    #[inline]
    pub fn holding_rate(&self, n: usize) -> f64 {
        let n = n as f64;
        0.5 * n * (n - 1.0 + self.theta + self.sigma)
    }

    /// Probability that the first jump out of `n` goes up,
    /// `sigma/(n-1+theta+sigma)`.
    ///
    /// Returns `None` for a level with no transitions at all.
    pub fn up_probability(&self, n: usize) -> Option<f64> {
        if n == 0 {
            return None;
        }
        let denom = n as f64 - 1.0 + self.theta + self.sigma;
        if denom <= 0.0 {
            None
        } else {
            Some(self.sigma / denom)
        }
    }

    /// Lowest level from which a downward step is possible.
    pub fn min_step_level(&self) -> usize {
        if self.theta > 0.0 {
            1
        } else {
            2
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::kingman()
    }
}
