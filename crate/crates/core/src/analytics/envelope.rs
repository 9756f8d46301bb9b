//! Scaled differences between the selective and neutral moment sequences.

use serde::{Deserialize, Serialize};

use super::hitting::HittingTable;
use super::moments::{kingman_step_moment, MomentTable};
use crate::error::{Error, Result};

/// Points `(n, n^power * difference)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub power: i32,
    pub points: Vec<(usize, f64)>,
}

impl Profile {
    pub fn sup_abs(&self) -> f64 {
        self.points.iter().map(|p| p.1.abs()).fold(0.0, f64::max)
    }

    /// Mean of the values with `lo <= n <= hi`.
    pub fn mean_over(&self, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .points
            .iter()
            .filter(|(n, _)| (*n as f64) >= lo && (*n as f64) <= hi)
            .map(|p| p.1)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// `n^power (a(n,k) - x(n,k))` for `n` in `lo..=hi`.
pub fn step_excess_profile(
    table: &MomentTable,
    k: usize,
    power: i32,
    lo: usize,
    hi: usize,
) -> Result<Profile> {
    let mut points = Vec::with_capacity(hi.saturating_sub(lo) + 1);
    for n in lo..=hi {
        let a = table
            .get(n, k)
            .ok_or_else(|| Error::Config(format!("level {n} or order {k} not in table")))?;
        let x = kingman_step_moment(n, k, table.params.theta())?;
        points.push((n, (n as f64).powi(power) * (a - x)));
    }
    Ok(Profile { power, points })
}

/// `n^power (E[T_n^k] - E[T'_n^k])` where `T'` comes from `neutral`.
pub fn tail_excess_profile(
    selective: &HittingTable,
    neutral: &HittingTable,
    k: usize,
    power: i32,
    lo: usize,
    hi: usize,
) -> Result<Profile> {
    let mut points = Vec::with_capacity(hi.saturating_sub(lo) + 1);
    for n in lo..=hi {
        let missing = || Error::Config(format!("level {n} or order {k} not in table"));
        let a = selective.moment(n, k).ok_or_else(missing)?;
        let b = neutral.moment(n, k).ok_or_else(missing)?;
        points.push((n, (n as f64).powi(power) * (a - b)));
    }
    Ok(Profile { power, points })
}

/// Comparison of the profile mean over the last decade of the range with
/// the mean over the decade centred (geometrically) in it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecadeTrend {
    pub last_decade_mean: f64,
    pub middle_decade_mean: f64,
}

impl DecadeTrend {
    /// No upward trend: last-decade mean at most `factor` times the middle
    /// one.
    pub fn no_upward_trend(&self, factor: f64) -> bool {
        self.last_decade_mean <= factor * self.middle_decade_mean
    }
}

/// Decades of `[lo, hi]`: last is `[hi/10, hi]`, middle is centred on
/// `sqrt(lo*hi)`.
pub fn decade_trend(profile: &Profile, lo: usize, hi: usize) -> Result<DecadeTrend> {
    let hi_f = hi as f64;
    let centre = (lo as f64 * hi_f).sqrt();
    let span = 10f64.sqrt();
    let last = profile.mean_over(hi_f / 10.0, hi_f);
    let middle = profile.mean_over(centre / span, centre * span);
    match (last, middle) {
        (Some(last_decade_mean), Some(middle_decade_mean)) => Ok(DecadeTrend {
            last_decade_mean,
            middle_decade_mean,
        }),
        _ => Err(Error::Config(format!(
            "range [{lo}, {hi}] does not cover two decades"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::moments::asg_step_moments;
    use crate::params::ModelParams;

    #[test]
    fn step_excess_scales_like_two_sigma_over_n_cubed() {
        let params = ModelParams::new(1.0, 1.0).unwrap();
        let table = asg_step_moments(&params, 4000, 1).unwrap();
        let prof = step_excess_profile(&table, 1, 3, 20, 1000).unwrap();
        let last = prof.points.last().unwrap().1;
        assert!((last - 2.0).abs() < 0.02, "{last}");
        let trend = decade_trend(&prof, 20, 1000).unwrap();
        assert!(trend.no_upward_trend(1.1));
    }

    #[test]
    fn tail_excess_scales_like_sigma_over_n_squared() {
        let params = ModelParams::new(1.0, 1.0).unwrap();
        let sel = HittingTable::new(&params, 100_000, 1).unwrap();
        let neu = HittingTable::new(&params.without_selection(), 100_000, 1).unwrap();
        let prof = tail_excess_profile(&sel, &neu, 1, 2, 20, 1000).unwrap();
        let last = prof.points.last().unwrap().1;
        assert!((last - 1.0).abs() < 0.02, "{last}");
    }

    #[test]
    fn decades_need_coverage() {
        let prof = Profile {
            power: 0,
            points: vec![(5, 1.0)],
        };
        assert!(decade_trend(&prof, 20, 1000).is_err());
    }
}
