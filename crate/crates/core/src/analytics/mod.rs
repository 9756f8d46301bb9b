//! Exact and semi-exact moment computations for the block-counting
//! birth/death chain.
//!
//! Everything here is deterministic and the tables are immutable once built.

pub mod envelope;
pub mod excursions;
pub mod hitting;
pub mod moments;
pub mod oracle;

pub use envelope::{decade_trend, step_excess_profile, tail_excess_profile, DecadeTrend, Profile};
pub use excursions::{h_moments, ExcursionTable};
pub use hitting::{nu_speed, tail_hitting_moments, HittingTable, NuSpeed, TailMoments};
pub use moments::{asg_step_moments, kingman_step_moment, Method, MomentTable};
pub use oracle::{absorption_moment_oracle, absorption_moments, passage_moments_from_steps};

/// Relative change allowed when the truncation level is doubled.
pub const SENSITIVITY_TOLERANCE: f64 = 1e-9;

/// `C(n, k)` for the small orders used in moment recursions.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Raw moments `E[(X+Y)^k]`, `k = 0..=k_max`, of a sum of independent
/// variables given their raw moments (index 0 holds 1).
pub(crate) fn convolve_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let k_max = x.len().min(y.len()) - 1;
    (0..=k_max)
        .map(|k| (0..=k).map(|j| binomial(k, j) * x[j] * y[k - j]).sum())
        .collect()
}

/// Cumulants from raw moments (index 0 holds 1; the result's index 0 is 0).
pub(crate) fn cumulants_from_moments(m: &[f64]) -> Vec<f64> {
    let mut kappa = vec![0.0; m.len()];
    for k in 1..m.len() {
        let mut v = m[k];
        for j in 1..k {
            v -= binomial(k - 1, j - 1) * kappa[j] * m[k - j];
        }
        kappa[k] = v;
    }
    kappa
}

/// Raw moments from cumulants (inverse of [`cumulants_from_moments`]).
pub(crate) fn moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; kappa.len()];
    m[0] = 1.0;
    for k in 1..kappa.len() {
        m[k] = (1..=k)
            .map(|j| binomial(k - 1, j - 1) * kappa[j] * m[k - j])
            .sum();
    }
    m
}
