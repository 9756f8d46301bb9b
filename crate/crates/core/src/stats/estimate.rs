//! Moment estimators with standard errors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sample mean, unbiased variance and the standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        if n == 1 {
            return Self {
                n,
                mean,
                variance: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let ss = xs
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .collect::<CompensatedSum>()
            .value();
        let variance = ss / (n - 1) as f64;
        Self {
            n,
            mean,
            variance,
            stderr: (variance / n as f64).sqrt(),
        }
    }

    /// Standard error of the unbiased variance estimate,
    /// `sqrt((m4 - s^4 (n-3)/(n-1)) / n)`.
    pub fn variance_stderr(xs: &[f64]) -> f64 {
        let s = Self::of(xs);
        let n = xs.len() as f64;
        let m4 = xs.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / n;
        let v = (m4 - s.variance * s.variance * (n - 3.0) / (n - 1.0)) / n;
        v.max(0.0).sqrt()
    }
}

/// Unbiased sample covariance and its standard error (delta method on the
/// centred products).
pub fn covariance(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mx = Summary::of(xs).mean;
    let my = Summary::of(ys).mean;
    let prods: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let s = prods.iter().copied().collect::<CompensatedSum>().value();
    let cov = s / (n - 1) as f64;
    let se = Summary::of(&prods).variance.sqrt() / (n as f64).sqrt();
    (cov, se)
}

/// `mean(a)/mean(b)` for paired samples, with a delta-method standard
/// error that accounts for the pairing.
pub fn ratio_of_means(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let sa = Summary::of(a);
    let sb = Summary::of(b);
    let (cov, _) = covariance(a, b);
    let r = sa.mean / sb.mean;
    let var = (sa.variance - 2.0 * r * cov + r * r * sb.variance) / (sb.mean * sb.mean * n);
    (r, var.max(0.0).sqrt())
}

/// Ratio of two independent estimates and its delta-method standard error.
pub fn ratio_independent(a: f64, se_a: f64, b: f64, se_b: f64) -> (f64, f64) {
    let r = a / b;
    (
        r,
        r.abs() * ((se_a / a).powi(2) + (se_b / b).powi(2)).sqrt(),
    )
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_survival(x: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

/// Pearson chi-square of observed counts against expected probabilities,
/// returning `(statistic, dof, p_value)`.
pub fn pearson_chi_square(observed: &[u64], probs: &[f64]) -> (f64, f64, f64) {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    (stat, dof, chi_square_survival(stat, dof))
}
