//! Entrance time for trajectories truncated at a finite initial count.
//!
//! A path started with `n0` lineages at time 0 is far from the path started
//! at infinity: the latter only reaches `n0` at the random time `T_{n0}`,
//! whose mean is about `2/n0`. Starting at a draw from (an approximation
//! of) the law of `T_{n0}` removes the leading-order bias of every
//! small-time functional.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytics::HittingTable;
use crate::engine::{simulate_coupled, StopRule};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::normal::normal_cdf;
use crate::trajectory::CoupledTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntranceKind {
    /// Start at time 0.
    Zero,
    /// `shift + Gamma(shape, scale)` matching three cumulants.
    ShiftedGamma { shift: f64, shape: f64, scale: f64 },
    /// `Normal(mean, sd^2)` truncated at 0, used when the third cumulant is
    /// not positive.
    Normal { mean: f64, sd: f64 },
}

/// Approximate law of `T_{n0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntranceLaw {
    pub n0: u32,
    /// First three cumulants of `T_{n0}` (zero for [`EntranceKind::Zero`]).
    pub cumulants: [f64; 3],
    pub kind: EntranceKind,
}

impl EntranceLaw {
    /// Plain truncation: every path starts at time 0.
    pub fn zero(n0: u32) -> Self {
        Self {
            n0,
            cumulants: [0.0; 3],
            kind: EntranceKind::Zero,
        }
    }

    /// Cumulant-matched law for level `n0`, from a hitting table truncated
    /// at `n_max > n0`.
    pub fn for_level(params: &ModelParams, n0: u32, n_max: usize) -> Result<Self> {
        if (n0 as usize) >= n_max {
            return Err(Error::IncreaseNmax {
                n_max,
                detail: format!("entrance level {n0} is not below N_max"),
            });
        }
        let table = HittingTable::new(params, n_max, 3)?;
        Self::from_table(&table, n0)
    }

    pub fn from_table(table: &HittingTable, n0: u32) -> Result<Self> {
        let kappa = table
            .cumulants(n0 as usize)
            .ok_or(Error::AbsorbingLevel { level: n0 as usize })?;
        let (k1, k2, k3) = (kappa[1], kappa[2], kappa[3]);
        let kind = if k3 > 0.0 && k2 > 0.0 {
            let scale = k3 / (2.0 * k2);
            let shape = k2 / (scale * scale);
            EntranceKind::ShiftedGamma {
                shift: k1 - shape * scale,
                shape,
                scale,
            }
        } else {
            EntranceKind::Normal {
                mean: k1,
                sd: k2.max(0.0).sqrt(),
            }
        };
        Ok(Self {
            n0,
            cumulants: [k1, k2, k3],
            kind,
        })
    }

    pub fn mean(&self) -> f64 {
        self.cumulants[0]
    }

    /// Standard normal score of `x`; Wilson-Hilferty for the gamma case.
    pub fn z_score(&self, x: f64) -> f64 {
        match self.kind {
            EntranceKind::Zero => 0.0,
            EntranceKind::ShiftedGamma {
                shift,
                shape,
                scale,
            } => {
                let y = ((x - shift) / scale).max(0.0);
                let v = 1.0 / (9.0 * shape);
                ((y / shape).cbrt() - (1.0 - v)) / v.sqrt()
            }
            EntranceKind::Normal { mean, sd } => (x - mean) / sd,
        }
    }

    /// Inverse of [`Self::z_score`].
    pub fn from_z_score(&self, z: f64) -> f64 {
        match self.kind {
            EntranceKind::Zero => 0.0,
            EntranceKind::ShiftedGamma {
                shift,
                shape,
                scale,
            } => {
                let v = 1.0 / (9.0 * shape);
                let c = (1.0 - v + z * v.sqrt()).max(0.0);
                (shift + scale * shape * c * c * c).max(0.0)
            }
            EntranceKind::Normal { mean, sd } => (mean + sd * z).max(0.0),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            EntranceKind::Zero => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => normal_cdf(self.z_score(x), 0.0, 1.0),
        }
    }

    /// Quantile coupling: the point of this law at the same quantile as `x`
    /// has under `other`.
    pub fn coupled_to(&self, other: &EntranceLaw, x: f64) -> f64 {
        self.from_z_score(other.z_score(x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            EntranceKind::Zero => 0.0,
            EntranceKind::ShiftedGamma {
                shift,
                shape,
                scale,
            } => {
                let g = Gamma::new(shape, scale).expect("positive gamma parameters");
                (shift + g.sample(rng)).max(0.0)
            }
            EntranceKind::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean + sd * z).max(0.0)
            }
        }
    }
}

/// Draw an entrance time and simulate the coupled triple from it.
pub fn simulate_from_entrance<R: Rng + ?Sized>(
    params: &ModelParams,
    law: &EntranceLaw,
    stop: &StopRule,
    rng: &mut R,
) -> Result<CoupledTrajectory> {
    let tau = law.sample(rng);
    if let Some(h) = stop.horizon {
        if tau > h {
            return Err(Error::Config(format!(
                "entrance time {tau} for n0 = {} lies beyond the horizon {h}; increase n0",
                law.n0
            )));
        }
    }
    simulate_coupled(params, law.n0, tau, stop, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::estimate::Summary;
    use crate::stats::rng::stream_for;

    #[test]
    fn kingman_entrance_matches_exact_moments() {
        let law = EntranceLaw::for_level(&ModelParams::kingman(), 1000, 20_000).unwrap();
        assert!((law.mean() - 0.002).abs() < 1e-15);
        assert!(matches!(law.kind, EntranceKind::ShiftedGamma { .. }));
        let mut rng = stream_for(3, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
        let s = Summary::of(&xs);
        assert!((s.mean - 0.002).abs() < 4.0 * s.stderr);
        let var = law.cumulants[1];
        assert!((s.variance / var - 1.0).abs() < 0.02);
    }

    #[test]
    fn simulated_suffix_has_entrance_law() {
        // the hitting time of 50 from an entrance at 200 has the law of T_50
        let params = ModelParams::new(1.0, 1.0).unwrap();
        let law200 = EntranceLaw::for_level(&params, 200, 20_000).unwrap();
        let law50 = EntranceLaw::for_level(&params, 50, 20_000).unwrap();
        let stop = StopRule::coordinate_at_level(crate::engine::Coordinate::Selection, 50);
        let hits: Vec<f64> = (0..20_000)
            .map(|r| {
                let mut rng = stream_for(9, r);
                let tr = simulate_from_entrance(&params, &law200, &stop, &mut rng).unwrap();
                tr.stop_time()
            })
            .collect();
        let s = Summary::of(&hits);
        assert!(
            (s.mean - law50.mean()).abs() < 4.0 * s.stderr,
            "{} vs {}",
            s.mean,
            law50.mean()
        );
    }

    #[test]
    fn quantile_helpers_invert_and_fit() {
        let law =
            EntranceLaw::for_level(&ModelParams::new(1.0, 1.0).unwrap(), 500, 10_000).unwrap();
        for z in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            assert!((law.z_score(law.from_z_score(z)) - z).abs() < 1e-9);
        }
        let mut rng = stream_for(4, 0);
        let xs: Vec<f64> = (0..50_000).map(|_| law.sample(&mut rng)).collect();
        let ks = crate::stats::ks::ks_one_sample(&xs, |x| law.cdf(x)).unwrap();
        assert!(ks.p_value > 0.01, "{}", ks.p_value);
        let other =
            EntranceLaw::for_level(&ModelParams::new(1.0, 1.0).unwrap(), 500, 20_000).unwrap();
        assert!((law.coupled_to(&other, xs[0]) - xs[0]).abs() < 1e-9 * xs[0]);
    }

    #[test]
    fn entrance_beyond_horizon_is_a_config_error() {
        let law = EntranceLaw::for_level(&ModelParams::kingman(), 100, 2000).unwrap();
        let mut rng = stream_for(0, 0);
        let r = simulate_from_entrance(
            &ModelParams::kingman(),
            &law,
            &StopRule::horizon(1e-6),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
