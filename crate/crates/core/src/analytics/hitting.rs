//! Moments of `T_n`, the time for the chain started at infinity to reach
//! level `n`, and the speed `nu_t` of coming down from infinity.

use serde::{Deserialize, Serialize};

use super::moments::{asg_step_moments, MomentTable};
use super::{cumulants_from_moments, factorial, moments_from_cumulants};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::estimate::CompensatedSum;

/// Relative tail error allowed by [`tail_hitting_moments`].
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// `E[T_n^k]` for `n` in `[n_first, n_max]` and `k` in `1..=k_max`,
/// with an absolute error bound per entry.
///
/// Levels `n_first + 1 ..= n_max` are summed exactly from the step table;
/// everything above `n_max` enters through a tail approximation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingTable {
    pub params: ModelParams,
    pub n_first: usize,
    pub n_max: usize,
    pub k_max: usize,
    values: Vec<f64>,
    errors: Vec<f64>,
}

/// Cumulants `kappa_1..kappa_k_max` of `sum_{i > n} T_{i,i-1}` and their
/// absolute error bounds, for large `n`.
fn tail_cumulants(params: &ModelParams, n: usize, k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let theta = params.theta();
    let sigma = params.sigma();
    let nf = n as f64;
    let mut kappa = vec![0.0; k_max + 1];
    let mut err = vec![0.0; k_max + 1];

    // Euler-Maclaurin on f(x) = 2/(x(x-1+theta)), plus the selection
    // excess a(i,1) - x(i,1) = 2 sigma/i^3 + (2 sigma^2 - 4 sigma theta)/i^4
    // + ... summed over i >= n (the boundary row itself is selection-free).
    let b = theta - 1.0;
    let integral = if b == 0.0 {
        2.0 / nf
    } else {
        2.0 / b * (b / nf).ln_1p()
    };
    let q = nf * (nf + b);
    let f = 2.0 / q;
    let fp = -2.0 * (2.0 * nf + b) / (q * q);
    let selection =
        sigma / (nf * nf) + sigma * (1.0 + (2.0 * sigma - 4.0 * theta) / 3.0) / (nf * nf * nf);
    kappa[1] = integral - 0.5 * f - fp / 12.0 + selection;
    err[1] = 2.0 * sigma * (2.0 + theta + sigma).powi(3) / nf.powi(4) + 1.0 / nf.powi(5);

    for j in 2..=k_max {
        let jf = j as f64;
        let v = factorial(j - 1) * 2f64.powi(j as i32)
            / ((2.0 * jf - 1.0) * (nf + 0.5).powf(2.0 * jf - 1.0));
        kappa[j] = v;
        err[j] = v * (2.0 * jf * (b.abs() + sigma + 1.0)) / nf;
    }
    (kappa, err)
}

impl HittingTable {
    /// Build from a step table. The tail above `table.n_max` is approximated
    /// analytically.
    pub fn from_steps(table: &MomentTable) -> Self {
        let params = table.params;
        let k_max = table.k_max;
        let n_max = table.n_max;
        let n_first = table.n_min - 1;
        let (tail, tail_err) = tail_cumulants(&params, n_max, k_max);

        let levels = n_max - n_first + 1;
        let mut values = vec![0.0; levels * k_max];
        let mut errors = vec![0.0; levels * k_max];
        let mut sums: Vec<CompensatedSum> =
            tail.iter().map(|&v| [v].into_iter().collect()).collect();

        let mut store = |n: usize, sums: &[CompensatedSum]| {
            let kappa: Vec<f64> = sums.iter().map(CompensatedSum::value).collect();
            let hi: Vec<f64> = kappa.iter().zip(&tail_err).map(|(k, e)| k + e).collect();
            let m = moments_from_cumulants(&kappa);
            let mh = moments_from_cumulants(&hi);
            let base = (n - n_first) * k_max;
            for k in 1..=k_max {
                values[base + k - 1] = m[k];
                // sums accumulate in double precision over many levels
                errors[base + k - 1] = (mh[k] - m[k]).abs() + 1e-14 * m[k];
            }
        };
        store(n_max, &sums);
        for n in (n_first..n_max).rev() {
            let row = table.row(n + 1).expect("in range");
            let c = cumulants_from_moments(&row);
            for k in 1..=k_max {
                sums[k].add(c[k]);
            }
            store(n, &sums);
        }
        Self {
            params,
            n_first,
            n_max,
            k_max,
            values,
            errors,
        }
    }

    /// Build with a fresh step table truncated at `n_max`.
    pub fn new(params: &ModelParams, n_max: usize, k_max: usize) -> Result<Self> {
        Ok(Self::from_steps(&asg_step_moments(params, n_max, k_max)?))
    }

    fn index(&self, n: usize, k: usize) -> Option<usize> {
        (n >= self.n_first && n <= self.n_max && k >= 1 && k <= self.k_max)
            .then(|| (n - self.n_first) * self.k_max + (k - 1))
    }

    pub fn moment(&self, n: usize, k: usize) -> Option<f64> {
        self.index(n, k).map(|i| self.values[i])
    }

    pub fn mean(&self, n: usize) -> Option<f64> {
        self.moment(n, 1)
    }

    pub fn error_bound(&self, n: usize, k: usize) -> Option<f64> {
        self.index(n, k).map(|i| self.errors[i])
    }

    /// Cumulants `[0, kappa_1, ..., kappa_k_max]` of `T_n`.
    pub fn cumulants(&self, n: usize) -> Option<Vec<f64>> {
        let mut m = vec![1.0];
        for k in 1..=self.k_max {
            m.push(self.moment(n, k)?);
        }
        Some(cumulants_from_moments(&m))
    }

    /// `inf { n : E[T_n] <= t }`.
    pub fn nu(&self, t: f64) -> Result<NuSpeed> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("time must be positive, got {t}")));
        }
        let last = self.mean(self.n_max).expect("in range");
        if last > t {
            return Err(Error::IncreaseNmax {
                n_max: self.n_max,
                detail: format!("E[T_N_max] = {last} exceeds t = {t}"),
            });
        }
        // means decrease in n; first index with mean <= t
        let len = self.n_max - self.n_first + 1;
        let pos = partition_point(len, |i| self.values[i * self.k_max] > t);
        let nu = self.n_first + pos;
        let mean_at_nu = self.mean(nu).expect("in range");
        let mean_below = if nu > self.n_first {
            self.mean(nu - 1)
        } else {
            None
        };
        Ok(NuSpeed {
            t,
            nu,
            mean_at_nu,
            mean_below,
            error_bound: self.error_bound(nu, 1).expect("in range"),
        })
    }
}

fn partition_point(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Result of the speed computation. `mean_below` is `None` when
/// `E[T_{nu-1}]` is infinite (level `nu - 1` is never reached or `nu = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuSpeed {
    pub t: f64,
    pub nu: usize,
    pub mean_at_nu: f64,
    pub mean_below: Option<f64>,
    pub error_bound: f64,
}

impl NuSpeed {
    /// `E[T_nu] <= t < E[T_{nu-1}]` on the computed values.
    pub fn sandwich_holds(&self) -> bool {
        self.mean_at_nu <= self.t && self.mean_below.map_or(true, |m| self.t < m)
    }
}

/// `nu_t` for the chain with parameters `params`, summing step means up to
/// `n_max`.
pub fn nu_speed(params: &ModelParams, t: f64, n_max: usize) -> Result<NuSpeed> {
    HittingTable::new(params, n_max, 1)?.nu(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailMoments {
    pub n: usize,
    /// `E[T_n^k]` for `k = 1..=k_max`.
    pub moments: Vec<f64>,
    pub error_bound: Vec<f64>,
}

/// `E[T_n^k]` for `k = 1..=k_max`, with the step sum truncated at `n_max`.
/// Fails with [`Error::IncreaseNmax`] when the tail error is not small
/// relative to the value.
pub fn tail_hitting_moments(
    params: &ModelParams,
    n: usize,
    k_max: usize,
    n_max: usize,
) -> Result<TailMoments> {
    if n >= n_max {
        return Err(Error::IncreaseNmax {
            n_max,
            detail: format!("level {n} is not below N_max"),
        });
    }
    let table = HittingTable::new(params, n_max, k_max)?;
    if n < table.n_first {
        return Err(Error::AbsorbingLevel { level: n });
    }
    let moments: Vec<f64> = (1..=k_max)
        .map(|k| table.moment(n, k).expect("in range"))
        .collect();
    let error_bound: Vec<f64> = (1..=k_max)
        .map(|k| table.error_bound(n, k).expect("in range"))
        .collect();
    for (k, (m, e)) in moments.iter().zip(&error_bound).enumerate() {
        if e / m > TAIL_TOLERANCE {
            return Err(Error::IncreaseNmax {
                n_max,
                detail: format!("relative tail error {} for k = {}", e / m, k + 1),
            });
        }
    }
    Ok(TailMoments {
        n,
        moments,
        error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(theta: f64, sigma: f64) -> ModelParams {
        ModelParams::new(theta, sigma).unwrap()
    }

    #[test]
    fn kingman_mean_is_two_over_n() {
        let table = HittingTable::new(&ModelParams::kingman(), 5000, 2).unwrap();
        for n in [1usize, 2, 10, 100, 1000, 4999] {
            let m = table.mean(n).unwrap();
            assert!((m - 2.0 / n as f64).abs() < 1e-12 * m, "n={n}: {m}");
        }
        // Var T_1 = sum 4/(i(i-1))^2 over i >= 2 = 4(pi^2/3 - 3)
        let var = table.moment(1, 2).unwrap() - 4.0;
        assert!((var - 4.0 * (std::f64::consts::PI.powi(2) / 3.0 - 3.0)).abs() < 1e-10);
    }

    #[test]
    fn theta_one_mean_is_harmonic_tail() {
        // E[T_n] = 2 sum_{i>n} 1/i^2 for theta = 1, sigma = 0; T_0 has mean pi^2/3
        let table = HittingTable::new(&p(1.0, 0.0), 20000, 1).unwrap();
        let m0 = table.mean(0).unwrap();
        assert!((m0 - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tail_correction_for_selection_is_accurate() {
        let params = p(1.0, 1.0);
        let small = HittingTable::new(&params, 2000, 1).unwrap();
        let large = HittingTable::new(&params, 64000, 1).unwrap();
        for n in [1usize, 10, 100, 1000] {
            let a = small.mean(n).unwrap();
            let b = large.mean(n).unwrap();
            assert!(
                (a - b).abs()
                    <= small.error_bound(n, 1).unwrap() + large.error_bound(n, 1).unwrap()
            );
            assert!((a - b).abs() < 1e-13, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn nu_for_kingman_at_one_hundredth() {
        let s = nu_speed(&ModelParams::kingman(), 0.01, 10_000).unwrap();
        assert_eq!(s.nu, 200);
        assert!(s.sandwich_holds());
    }

    #[test]
    fn nu_can_be_zero_with_mutation() {
        let s = nu_speed(&p(1.0, 0.0), 10.0, 1000).unwrap();
        assert_eq!(s.nu, 0);
        assert_eq!(s.mean_below, None);
        assert!(s.sandwich_holds());
        let k = nu_speed(&ModelParams::kingman(), 10.0, 1000).unwrap();
        assert_eq!(k.nu, 1);
    }

    #[test]
    fn nu_below_resolution_asks_for_larger_truncation() {
        assert!(matches!(
            nu_speed(&p(1.0, 1.0), 1e-4, 1000),
            Err(Error::IncreaseNmax { .. })
        ));
    }

    #[test]
    fn tail_moments_interface() {
        let t = tail_hitting_moments(&p(0.5, 0.5), 50, 3, 10_000).unwrap();
        assert_eq!(t.moments.len(), 3);
        assert!(t.moments[1] > t.moments[0] * t.moments[0]);
        assert!(tail_hitting_moments(&p(0.5, 0.5), 50, 3, 50).is_err());
        assert!(matches!(
            tail_hitting_moments(&p(0.5, 0.5), 990, 1, 1000),
            Err(Error::IncreaseNmax { .. })
        ));
    }
}
