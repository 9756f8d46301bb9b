//! Moments of the supremum of `s N_s / 2 - 1` over short time windows.

use serde::{Deserialize, Serialize};

use super::entrance::{simulate_from_entrance, EntranceLaw};
use super::functionals::{scan_path, sup_power};
use super::runner::run_replicates;
use crate::engine::{Coordinate, StopRule};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::estimate::Summary;
use crate::stats::report::{config_hash, McReport, McRow, Provenance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupDevConfig {
    pub params: ModelParams,
    /// Decreasing window lengths.
    pub t_list: Vec<f64>,
    pub k: u32,
    pub n0: u32,
    pub n_max: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Draw a random entrance time; otherwise start at time 0.
    pub entrance: bool,
}

impl SupDevConfig {
    pub fn new(
        params: ModelParams,
        t_list: Vec<f64>,
        k: u32,
        n0: u32,
        replicates: usize,
        seed: u64,
    ) -> Self {
        Self {
            params,
            t_list,
            k,
            n0,
            n_max: 10 * n0 as usize,
            replicates,
            seed,
            entrance: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t_list.is_empty() || self.t_list.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("t_list must hold positive times".into()));
        }
        if self.t_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("t_list must be strictly decreasing".into()));
        }
        if self.k == 0 || self.k > 6 {
            return Err(Error::Config(format!("k must be in 1..=6, got {}", self.k)));
        }
        if self.replicates < 2 {
            return Err(Error::TooFewSamples {
                got: self.replicates,
                need: 2,
            });
        }
        Ok(())
    }
}

/// `sup_{s <= t} (s N_s/2 - 1)^k` for every replicate (rows) and window
/// (columns, in `t_list` order).
pub fn sup_deviation_samples(cfg: &SupDevConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let law = if cfg.entrance {
        EntranceLaw::for_level(&cfg.params, cfg.n0, cfg.n_max)?
    } else {
        EntranceLaw::zero(cfg.n0)
    };
    let horizon = cfg.t_list[0];
    let mut ascending = cfg.t_list.clone();
    ascending.reverse();
    run_replicates(cfg.seed, cfg.replicates, |_, rng| {
        let tr = simulate_from_entrance(&cfg.params, &law, &StopRule::horizon(horizon), rng)?;
        let path = tr.path(Coordinate::Selection);
        let snaps = scan_path(&path, &cfg.params, &ascending)?;
        Ok(snaps.iter().rev().map(|s| sup_power(s, cfg.k)).collect())
    })
}

/// Monte Carlo estimates of `E[sup_{s<=t}(s N_s/2 - 1)^k]` for each `t`,
/// the same divided by `t`, and paired differences between consecutive
/// windows.
pub fn sup_deviation_moments(cfg: &SupDevConfig) -> Result<McReport> {
    let samples = sup_deviation_samples(cfg)?;
    let mut report = McReport::new(&config_hash(cfg), cfg.seed, cfg.replicates);
    let name = format!("sup_dev_pow{}", cfg.k);
    let column = |j: usize| samples.iter().map(|r| r[j]).collect::<Vec<f64>>();
    for (j, &t) in cfg.t_list.iter().enumerate() {
        let s = Summary::of(&column(j));
        report.push(
            McRow::new("supdev", &name, s.mean)
                .at(t)
                .stderr(s.stderr)
                .target(0.0, Provenance::LimitTheorem),
        );
        report.push(
            McRow::new("supdev", &format!("{name}_over_t"), s.mean / t)
                .at(t)
                .stderr(s.stderr / t),
        );
    }
    for j in 1..cfg.t_list.len() {
        let (a, b) = (column(j - 1), column(j));
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let s = Summary::of(&d);
        report.push(
            McRow::new("supdev", &format!("{name}_decrease"), s.mean)
                .at(cfg.t_list[j])
                .stderr(s.stderr),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let p = ModelParams::kingman();
        assert!(
            sup_deviation_moments(&SupDevConfig::new(p, vec![0.1, 0.2], 2, 100, 10, 0)).is_err()
        );
        assert!(sup_deviation_moments(&SupDevConfig::new(p, vec![0.1], 7, 100, 10, 0)).is_err());
        assert!(sup_deviation_moments(&SupDevConfig::new(p, vec![0.1], 2, 100, 1, 0)).is_err());
    }

    #[test]
    fn plain_truncation_sup_is_at_least_one() {
        // starting at time 0 the deviation starts at -1
        let mut cfg = SupDevConfig::new(ModelParams::kingman(), vec![0.1, 0.05], 2, 500, 20, 1);
        cfg.entrance = false;
        let s = sup_deviation_samples(&cfg).unwrap();
        assert!(s.iter().flatten().all(|v| *v >= 1.0));
    }

    #[test]
    fn entrance_start_gives_small_sups_that_shrink_with_t() {
        let cfg = SupDevConfig::new(
            ModelParams::new(1.0, 1.0).unwrap(),
            vec![0.2, 0.05],
            2,
            2000,
            200,
            2,
        );
        let rep = sup_deviation_moments(&cfg).unwrap();
        let big = rep.find("sup_dev_pow2", Some(0.2), None).unwrap().estimate;
        let small = rep.find("sup_dev_pow2", Some(0.05), None).unwrap().estimate;
        assert!(small < big && big < 0.2);
        let d = rep.find("sup_dev_pow2_decrease", Some(0.05), None).unwrap();
        assert!(d.estimate > 2.0 * d.stderr.unwrap());
        rep.validate().unwrap();
    }
}
