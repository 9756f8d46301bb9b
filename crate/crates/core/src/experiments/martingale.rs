//! Martingale decomposition campaign: `M`, `R`, `Y` and the two pathwise
//! identities.

use serde::{Deserialize, Serialize};

use super::entrance::{simulate_from_entrance, EntranceLaw};
use super::functionals::scan_path;
use super::runner::run_replicates;
use crate::engine::{Coordinate, StopRule};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::estimate::{ratio_of_means, Summary};
use crate::stats::report::{config_hash, McReport, McRow, Provenance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleConfig {
    pub params: ModelParams,
    /// Strictly decreasing times, typically successive halvings.
    pub t_list: Vec<f64>,
    pub n0: u32,
    pub n_max: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Extra raw times on which the identities are checked.
    pub identity_points: usize,
}

impl MartingaleConfig {
    pub fn new(
        params: ModelParams,
        t_list: Vec<f64>,
        n0: u32,
        replicates: usize,
        seed: u64,
    ) -> Self {
        Self {
            params,
            t_list,
            n0,
            n_max: 10 * n0 as usize,
            replicates,
            seed,
            identity_points: 32,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Sample {
    m: Vec<f64>,
    sup_m_sq: Vec<f64>,
    sup_abs_r: Vec<f64>,
    sup_y_sq: Vec<f64>,
    decomposition: f64,
    y_identity: f64,
    origin: f64,
}

pub fn martingale_suite(cfg: &MartingaleConfig) -> Result<McReport> {
    if cfg.t_list.is_empty()
        || cfg.t_list.windows(2).any(|w| w[1] >= w[0])
        || cfg.t_list.iter().any(|t| !(*t > 0.0))
    {
        return Err(Error::Config(
            "t_list must be positive and strictly decreasing".into(),
        ));
    }
    if cfg.replicates < 2 {
        return Err(Error::TooFewSamples {
            got: cfg.replicates,
            need: 2,
        });
    }
    let law = EntranceLaw::for_level(&cfg.params, cfg.n0, cfg.n_max)?;
    let horizon = cfg.t_list[0];
    let mut times: Vec<f64> = (1..=cfg.identity_points)
        .map(|j| horizon * j as f64 / cfg.identity_points as f64)
        .collect();
    times.extend(&cfg.t_list);
    times.sort_by(f64::total_cmp);
    times.dedup();

    let samples = run_replicates(cfg.seed, cfg.replicates, |_, rng| {
        let tr = simulate_from_entrance(&cfg.params, &law, &StopRule::horizon(horizon), rng)?;
        let path = tr.path(Coordinate::Selection);
        let snaps = scan_path(&path, &cfg.params, &times)?;
        let at = |t: f64| snaps.iter().find(|s| s.t == t).expect("t is a scan time");
        let mut out = Sample::default();
        for &t in &cfg.t_list {
            let s = at(t);
            out.m.push(s.m);
            out.sup_m_sq.push(s.max_m_sq);
            out.sup_abs_r.push(s.max_abs_r);
            out.sup_y_sq.push(s.max_y_sq);
        }
        out.decomposition = snaps
            .iter()
            .map(|s| s.decomposition_residual().abs())
            .fold(0.0, f64::max);
        out.y_identity = snaps
            .iter()
            .map(|s| s.y_identity_residual().abs())
            .fold(0.0, f64::max);
        out.origin = snaps[0].origin;
        Ok(out)
    })?;

    let mut report = McReport::new(&config_hash(cfg), cfg.seed, cfg.replicates);
    let col = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    for (j, &t) in cfg.t_list.iter().enumerate() {
        let m = col(&|s| s.m[j]);
        let sm = Summary::of(&m);
        report.push(
            McRow::new("martingale", "M.mean", sm.mean)
                .at(t)
                .stderr(sm.stderr)
                .target(0.0, Provenance::Analytic),
        );
        let sq: Vec<f64> = m.iter().map(|v| v * v / t).collect();
        let ss = Summary::of(&sq);
        report.push(
            McRow::new("martingale", "M.sq_over_t", ss.mean)
                .at(t)
                .stderr(ss.stderr)
                .target(0.5, Provenance::Derived),
        );
        for (name, v) in [
            ("M.sup_sq_over_t", col(&|s| s.sup_m_sq[j] / t)),
            ("R.sup_abs_over_t", col(&|s| s.sup_abs_r[j] / t)),
            ("Y.sup_sq_over_t", col(&|s| s.sup_y_sq[j] / t)),
        ] {
            let s = Summary::of(&v);
            report.push(
                McRow::new("martingale", name, s.mean)
                    .at(t)
                    .stderr(s.stderr),
            );
        }
    }
    // ratios between successive halvings of t
    for j in 1..cfg.t_list.len() {
        let (t0, t1) = (cfg.t_list[j - 1], cfg.t_list[j]);
        let a = col(&|s| s.m[j] * s.m[j] / t1);
        let b = col(&|s| s.m[j - 1] * s.m[j - 1] / t0);
        let (r, se) = ratio_of_means(&a, &b);
        report.push(
            McRow::new("martingale", "M.sq_over_t.halving_ratio", r)
                .at(t1)
                .stderr(se)
                .target(1.0, Provenance::Derived),
        );
    }
    let worst = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    report.push(
        McRow::new(
            "martingale",
            "decomposition_residual.max",
            worst(&|s| s.decomposition),
        )
        .at(horizon),
    );
    report.push(
        McRow::new(
            "martingale",
            "y_identity_residual.max",
            worst(&|s| s.y_identity),
        )
        .at(horizon),
    );
    let o = Summary::of(&col(&|s| s.origin));
    report.push(
        McRow::new("martingale", "origin.mean", o.mean)
            .stderr(o.stderr)
            .target(law.mean(), Provenance::Derived),
    );
    Ok(report)
}
