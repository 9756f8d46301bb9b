//! Moments of the one-step passage time `T_{n,n-1}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{binomial, factorial, SENSITIVITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::report::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedFormKingman,
    BackwardRecursion,
    LinearSolveOracle,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedFormKingman => "closed-form-kingman",
            Method::BackwardRecursion => "backward-recursion",
            Method::LinearSolveOracle => "linear-solve-oracle",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// `k! 2^k / (n(n-1+theta))^k`: the k-th moment of the exponential step
/// time of the coalescent with mutation.
pub fn kingman_step_moment(n: usize, k: usize, theta: f64) -> Result<f64> {
    let q = n as f64 * (n as f64 - 1.0 + theta);
    if !(q > 0.0) {
        return Err(Error::AbsorbingLevel { level: n });
    }
    let h = 2.0 / q;
    Ok((1..=k).fold(1.0, |acc, i| acc * i as f64 * h))
}

/// Table of `a(n,k) = E[(T_{n,n-1})^k]` for `n` in `[n_min, n_max]`,
/// `k` in `1..=k_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentTable {
    pub params: ModelParams,
    pub n_min: usize,
    pub n_max: usize,
    pub k_max: usize,
    pub method: Method,
    values: Vec<f64>,
    /// Relative change of each entry when the reflecting boundary is moved
    /// from `n_max` to `2 n_max`.
    truncation_error: Vec<f64>,
}

impl MomentTable {
    fn index(&self, n: usize, k: usize) -> Option<usize> {
        (n >= self.n_min && n <= self.n_max && k >= 1 && k <= self.k_max)
            .then(|| (n - self.n_min) * self.k_max + (k - 1))
    }

    pub fn get(&self, n: usize, k: usize) -> Option<f64> {
        self.index(n, k).map(|i| self.values[i])
    }

    pub fn truncation_error(&self, n: usize, k: usize) -> Option<f64> {
        self.index(n, k).map(|i| self.truncation_error[i])
    }

    /// Raw moments `[1, a(n,1), ..., a(n,k_max)]`.
    pub fn row(&self, n: usize) -> Option<Vec<f64>> {
        let i = self.index(n, 1)?;
        let mut r = Vec::with_capacity(self.k_max + 1);
        r.push(1.0);
        r.extend_from_slice(&self.values[i..i + self.k_max]);
        Some(r)
    }

    /// Largest `n` such that every entry at levels `<= n` moves by less than
    /// `tol` under doubling of the boundary.
    pub fn converged_up_to(&self, tol: f64) -> usize {
        let mut last = self.n_min.saturating_sub(1);
        for n in self.n_min..=self.n_max {
            let i = (n - self.n_min) * self.k_max;
            if self.truncation_error[i..i + self.k_max]
                .iter()
                .all(|&e| e < tol)
            {
                last = n;
            } else {
                break;
            }
        }
        last
    }

    /// Fail with [`Error::IncreaseNmax`] unless levels up to `n` are
    /// converged to the default tolerance.
    pub fn require_converged(&self, n: usize) -> Result<()> {
        let ok = self.converged_up_to(SENSITIVITY_TOLERANCE);
        if ok < n {
            return Err(Error::IncreaseNmax {
                n_max: self.n_max,
                detail: format!("step moments converged only up to level {ok}, needed {n}"),
            });
        }
        Ok(())
    }

    /// CSV with columns `n,k,value,method,truncation_error`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "k", "value", "method", "truncation_error"])?;
        for n in self.n_min..=self.n_max {
            for k in 1..=self.k_max {
                let i = self.index(n, k).expect("in range");
                out.write_record([
                    n.to_string(),
                    k.to_string(),
                    fmt_f64(self.values[i]),
                    self.method.as_str().to_owned(),
                    fmt_f64(self.truncation_error[i]),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Step moments of the chain reflected at `n_top` (no births there), for
/// levels `n_lo..=keep`. Row `n` of the flat result holds
/// `[1, a(n,1), ..., a(n,k_max)]` at offset `(n - n_lo)(k_max + 1)`.
pub(crate) fn solve_step_moments(
    params: &ModelParams,
    n_lo: usize,
    n_top: usize,
    keep: usize,
    k_max: usize,
) -> Vec<f64> {
    let theta = params.theta();
    let w = k_max + 1;
    let keep = keep.min(n_top);
    let mut out = vec![0.0; (keep - n_lo + 1) * w];
    // reflecting boundary: the top step is a pure exponential
    let mut next = vec![0.0; w];
    next[0] = 1.0;
    for k in 1..=k_max {
        next[k] = kingman_step_moment(n_top, k, theta).expect("top level is transient");
    }
    if n_top <= keep {
        out[(n_top - n_lo) * w..].copy_from_slice(&next);
    }
    let mut cur = vec![0.0; w];
    let mut xi = vec![0.0; w];
    for n in (n_lo..n_top).rev() {
        let p = params.up_probability(n).expect("transient level");
        let h = 1.0 / params.holding_rate(n);
        xi[0] = 1.0;
        for m in 1..=k_max {
            xi[m] = xi[m - 1] * m as f64 * h;
        }
        cur[0] = 1.0;
        for k in 1..=k_max {
            let mut cross = 0.0;
            for j in 1..=k {
                let mut s = 0.0;
                for i in 0..=j {
                    if j == k && i == 0 {
                        continue;
                    }
                    s += binomial(j, i) * next[i] * cur[j - i];
                }
                cross += binomial(k, j) * xi[k - j] * s;
            }
            cur[k] = (xi[k] + p * cross) / (1.0 - p);
        }
        if n <= keep {
            out[(n - n_lo) * w..(n - n_lo + 1) * w].copy_from_slice(&cur);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    out
}

/// Moments `a(n,k)` of `T_{n,n-1}` for the ASG, obtained from the
/// first-step decomposition `T = xi + 1_E (T' + T'')` solved backward in `n`
/// and forward in `k`. The boundary level `n_max` uses the
/// coalescent-with-mutation closed form (equivalently, births are switched
/// off there); each entry records how much it moves when the boundary is
/// doubled.
pub fn asg_step_moments(params: &ModelParams, n_max: usize, k_max: usize) -> Result<MomentTable> {
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
    if params.sigma() == 0.0 {
        let mut values = Vec::with_capacity((n_max - n_min + 1) * k_max);
        for n in n_min..=n_max {
            for k in 1..=k_max {
                values.push(kingman_step_moment(n, k, params.theta())?);
            }
        }
        let truncation_error = vec![0.0; values.len()];
        return Ok(MomentTable {
            params: *params,
            n_min,
            n_max,
            k_max,
            method: Method::ClosedFormKingman,
            values,
            truncation_error,
        });
    }
    let rows = solve_step_moments(params, n_min, n_max, n_max, k_max);
    let wide = solve_step_moments(params, n_min, 2 * n_max, n_max, k_max);
    let levels = n_max - n_min + 1;
    let mut values = Vec::with_capacity(levels * k_max);
    let mut truncation_error = Vec::with_capacity(levels * k_max);
    for (r, w) in rows
        .chunks_exact(k_max + 1)
        .zip(wide.chunks_exact(k_max + 1))
    {
        for k in 1..=k_max {
            values.push(r[k]);
            truncation_error.push(((r[k] - w[k]) / w[k]).abs());
        }
    }
    Ok(MomentTable {
        params: *params,
        n_min,
        n_max,
        k_max,
        method: Method::BackwardRecursion,
        values,
        truncation_error,
    })
}

/// `E[xi^m] = m! (2/(n(n-1+theta+sigma)))^m` for the holding time at `n`.
pub fn holding_time_moment(params: &ModelParams, n: usize, m: usize) -> f64 {
    factorial(m) * (1.0 / params.holding_rate(n)).powi(m as i32)
}
