//! Moments of `H_n`, the number of upward jumps the chain makes between
//! first reaching `n` and first reaching `n - 1`.

use serde::{Deserialize, Serialize};

use super::{factorial, SENSITIVITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcursionTable {
    pub params: ModelParams,
    pub n_min: usize,
    pub n_max: usize,
    pub k_max: usize,
    values: Vec<f64>,
    truncation_error: Vec<f64>,
}

impl ExcursionTable {
    fn index(&self, n: usize, k: usize) -> Option<usize> {
        (n >= self.n_min && n <= self.n_max && k >= 1 && k <= self.k_max)
            .then(|| (n - self.n_min) * self.k_max + (k - 1))
    }

    pub fn get(&self, n: usize, k: usize) -> Option<f64> {
        self.index(n, k).map(|i| self.values[i])
    }

    /// Relative change under doubling of `n_max` (0 where both are 0).
    pub fn truncation_error(&self, n: usize, k: usize) -> Option<f64> {
        self.index(n, k).map(|i| self.truncation_error[i])
    }

    pub fn require_converged(&self, n: usize) -> Result<()> {
        for m in self.n_min..=n.min(self.n_max) {
            for k in 1..=self.k_max {
                if self.truncation_error(m, k).unwrap() >= SENSITIVITY_TOLERANCE {
                    return Err(Error::IncreaseNmax {
                        n_max: self.n_max,
                        detail: format!("E[H_{m}^{k}] not converged"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Rows `[1, E H_n, ..., E H_n^k_max]` for `n` in `n_lo..=n_top`, with
/// `H_{n_top} = 0`.
fn solve(params: &ModelParams, n_lo: usize, n_top: usize, k_max: usize) -> Vec<Vec<f64>> {
    let len = n_top - n_lo + 1;
    let mut rows = vec![vec![0.0; k_max + 1]; len];
    rows[len - 1][0] = 1.0;
    let f: Vec<f64> = (0..=k_max).map(factorial).collect();
    for n in (n_lo..n_top).rev() {
        let idx = n - n_lo;
        let p = params.up_probability(n).expect("transient level");
        let (below, above) = rows.split_at_mut(idx + 1);
        let cur = &mut below[idx];
        let next = &above[0];
        cur[0] = 1.0;
        for k in 1..=k_max {
            // H_n = 1 + H_{n+1} + H_n' on an up-step, 0 otherwise
            let mut s = 0.0;
            for m2 in 0..k {
                for m3 in 0..=k - m2 {
                    let m1 = k - m2 - m3;
                    s += f[k] / (f[m1] * f[m2] * f[m3]) * cur[m2] * next[m3];
                }
            }
            cur[k] = p * s / (1.0 - p);
        }
    }
    rows
}

/// `E[H_n^k]` by backward recursion from `H_{n_max} = 0`, with the
/// sensitivity to doubling `n_max` recorded per entry.
pub fn h_moments(params: &ModelParams, n_max: usize, k_max: usize) -> Result<ExcursionTable> {
    let n_min = params.min_step_level();
    if k_max == 0 {
        return Err(Error::Config("k_max must be >= 1".into()));
    }
    if n_max < n_min + 10 {
        return Err(Error::Config(format!(
            "N_max = {n_max} must be at least {}",
            n_min + 10
        )));
    }
    let rows = solve(params, n_min, n_max, k_max);
    let wide = solve(params, n_min, 2 * n_max, k_max);
    let mut values = Vec::with_capacity(rows.len() * k_max);
    let mut truncation_error = Vec::with_capacity(rows.len() * k_max);
    for (r, w) in rows.iter().zip(&wide) {
        for k in 1..=k_max {
            values.push(r[k]);
            truncation_error.push(if w[k] == 0.0 {
                0.0
            } else {
                ((r[k] - w[k]) / w[k]).abs()
            });
        }
    }
    Ok(ExcursionTable {
        params: *params,
        n_min,
        n_max,
        k_max,
        values,
        truncation_error,
    })
}
