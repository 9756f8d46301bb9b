//! Functional central limit campaign for `X_eps(t) = eps^{-1/2}(eps t N_{eps t}/2 - 1)`.
//!
//! For each `eps` the trajectories start at `n0(eps) = n0 * eps_0 / eps`
//! lineages at a random entrance time, so the rescaled start `2/(n0 eps)`
//! is the same for every `eps`. With the truncation check on, each
//! replicate is simulated from `2 n0(eps)`; the `n0(eps)` run is the suffix
//! of that path after it first hits `n0(eps)`, moved to the entrance time at
//! the same quantile of the `n0(eps)` entrance law. Both versions are
//! reported, together with a fit of the hitting times to that law.

use serde::{Deserialize, Serialize};

use super::entrance::EntranceLaw;
use super::functionals::{scan_path_with, ScanMode, Snapshot};
use super::runner::run_replicates;
use crate::analytics::HittingTable;
use crate::engine::simulate_selective_path;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::estimate::{covariance, ratio_independent, Summary};
use crate::stats::ks::{ks_one_sample, KS_MIN_SAMPLES};
use crate::stats::normal::normal_cdf;
use crate::stats::report::{config_hash, McReport, McRow, Provenance};
use crate::trajectory::StepPath;

/// Standard deviation of the Kolmogorov limit law; `D` has standard error
/// about this over `sqrt(n)` under the null.
const KOLMOGOROV_SD: f64 = 0.2603;

pub const PRIMARY: &str = "clt";
pub const DOUBLED: &str = "clt.doubled";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub params: ModelParams,
    /// Strictly decreasing.
    pub eps_list: Vec<f64>,
    /// Rescaled times, strictly increasing; the largest is the horizon `T`.
    pub t_grid: Vec<f64>,
    /// Replicates for the first `eps`.
    pub replicates: usize,
    /// Replicates for every further `eps`.
    pub refinement_replicates: usize,
    /// Initial count for the first `eps`.
    pub n0: u32,
    /// Truncation level of the hitting-time table for the first `eps`.
    pub n_max: usize,
    pub seed: u64,
    /// Also run from `2 n0` with `2 N_max`.
    pub truncation_check: bool,
    /// Family-wise level of the KS tests across `t_grid`.
    pub ks_alpha: f64,
}

impl CltConfig {
    pub fn new(
        params: ModelParams,
        eps_list: Vec<f64>,
        t_grid: Vec<f64>,
        replicates: usize,
        seed: u64,
    ) -> Self {
        let eps0 = eps_list.first().copied().unwrap_or(1.0);
        let t_min = t_grid.first().copied().unwrap_or(1.0);
        // rescaled entrance 2/(n0 eps) at half the first grid time
        let n0 = (4.0 / (eps0 * t_min)).ceil().max(10.0) as u32;
        Self {
            params,
            eps_list,
            t_grid,
            replicates,
            refinement_replicates: (replicates / 10).max(KS_MIN_SAMPLES),
            n0,
            n_max: 4 * n0 as usize,
            seed,
            truncation_check: false,
            ks_alpha: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("eps_list must hold values in (0, 1)");
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_list must be strictly decreasing");
        }
        if self.t_grid.is_empty()
            || self.t_grid[0] <= 0.0
            || self.t_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("t_grid must be positive and strictly increasing");
        }
        if self.n_max <= self.n0 as usize {
            return bad("N_max must exceed n0");
        }
        let need = KS_MIN_SAMPLES;
        for r in [
            self.replicates,
            if self.eps_list.len() > 1 {
                self.refinement_replicates
            } else {
                need
            },
        ] {
            if r < need {
                return Err(Error::TooFewSamples { got: r, need });
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().expect("validated")
    }
}

/// What one replicate contributes for one truncation level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CltSample {
    /// `X_eps(t)` on the grid.
    pub x: Vec<f64>,
    /// `N_{eps t}` on the grid.
    pub n: Vec<u32>,
    /// `sup_{t <= T} |X_eps - Y_eps|`.
    pub sup_x_minus_y: f64,
    /// `<L_eps>_T`.
    pub compensator: f64,
    /// Rescaled start time of the path.
    pub start: f64,
}

fn sample_path(path: &StepPath, params: &ModelParams, eps: f64, grid: &[f64]) -> Result<CltSample> {
    let raw: Vec<f64> = grid.iter().map(|t| eps * t).collect();
    let snaps: Vec<Snapshot> =
        scan_path_with(path, params, &raw, ScanMode::XYOnly).map_err(|e| match e {
            Error::PartialPath { time, start, .. } if time < start => Error::Config(format!(
                "path starts at rescaled time {} after grid time {}; increase n0",
                start / eps,
                time / eps
            )),
            e => e,
        })?;
    let scale = eps.sqrt().recip();
    let last = snaps.last().expect("nonempty grid");
    Ok(CltSample {
        x: snaps.iter().map(|s| s.x * scale).collect(),
        n: snaps.iter().map(|s| s.level).collect(),
        sup_x_minus_y: last.max_abs_x_minus_y * scale,
        compensator: last.compensator / (4.0 * eps * eps * eps),
        start: path.start() / eps,
    })
}

/// Samples for one `eps`.
#[derive(Clone, Debug, Default)]
pub struct CltRun {
    pub primary: Vec<CltSample>,
    /// Empty unless the truncation check is on.
    pub doubled: Vec<CltSample>,
    /// Hitting times of `n0` by the doubled paths.
    pub hits: Vec<f64>,
    pub law: Option<EntranceLaw>,
}

pub fn clt_samples(
    cfg: &CltConfig,
    eps: f64,
    n0: u32,
    n_max: usize,
    replicates: usize,
    seed: u64,
) -> Result<CltRun> {
    let params = cfg.params;
    let law = EntranceLaw::from_table(&HittingTable::new(&params, n_max, 3)?, n0)?;
    let horizon = eps * cfg.horizon() * 1.01;
    let cap = crate::engine::DEFAULT_EVENT_CAP;
    let start_at = |tau: f64, level: u32| {
        if tau > horizon {
            Err(Error::Config(format!(
                "entrance time {tau} for n0 = {level} lies beyond the horizon {horizon}; increase n0"
            )))
        } else {
            Ok(tau)
        }
    };
    if !cfg.truncation_check {
        let primary = run_replicates(seed, replicates, |_, rng| {
            let tau = start_at(law.sample(rng), n0)?;
            let path = simulate_selective_path(&params, n0, tau, horizon, cap, rng)?;
            sample_path(&path, &params, eps, &cfg.t_grid)
        })?;
        return Ok(CltRun {
            primary,
            doubled: Vec::new(),
            hits: Vec::new(),
            law: Some(law),
        });
    }
    let table2 = HittingTable::new(&params, 2 * n_max, 3)?;
    let law2 = EntranceLaw::from_table(&table2, 2 * n0)?;
    // law of the hitting time of n0 when started from 2 n0 with 2 N_max
    let law_hit = EntranceLaw::from_table(&table2, n0)?;
    let triples = run_replicates(seed, replicates, |_, rng| {
        let tau2 = start_at(law2.sample(rng), 2 * n0)?;
        let full = simulate_selective_path(&params, 2 * n0, tau2, horizon, cap, rng)?;
        let doubled = sample_path(&full, &params, eps, &cfg.t_grid)?;
        let hit = full.hitting_time(n0).ok_or_else(|| {
            Error::Config(format!(
                "path from {} did not reach {n0} before the horizon",
                2 * n0
            ))
        })?;
        let moved = full
            .suffix_moved_to(n0, law.coupled_to(&law_hit, hit))
            .expect("hit exists")?;
        Ok((
            sample_path(&moved, &params, eps, &cfg.t_grid)?,
            doubled,
            hit,
        ))
    })?;
    let mut run = CltRun {
        law: Some(law),
        ..Default::default()
    };
    for (p, d, h) in triples {
        run.primary.push(p);
        run.doubled.push(d);
        run.hits.push(h);
    }
    Ok(run)
}

fn summarize(
    report: &mut McReport,
    experiment: &str,
    cfg: &CltConfig,
    eps: f64,
    samples: &[CltSample],
    nu: &[usize],
) -> Result<()> {
    let grid = &cfg.t_grid;
    let n = samples.len();
    let alpha = cfg.ks_alpha / grid.len() as f64;
    let row = |stat: &str, est: f64| McRow::new(experiment, stat, est).epsilon(eps);
    let xcol = |j: usize| samples.iter().map(|s| s.x[j]).collect::<Vec<f64>>();
    for (j, &t) in grid.iter().enumerate() {
        let x = xcol(j);
        let s = Summary::of(&x);
        let var_se = Summary::variance_stderr(&x);
        let target = t / 6.0;
        report.push(
            row("X.mean", s.mean)
                .at(t)
                .stderr(s.stderr)
                .target(0.0, Provenance::LimitTheorem),
        );
        report.push(
            row("X.var", s.variance)
                .at(t)
                .stderr(var_se)
                .target(target, Provenance::Derived),
        );
        report.push(
            row("X.var_ratio", s.variance / target)
                .at(t)
                .stderr(var_se / target)
                .target(1.0, Provenance::Derived),
        );
        let ks = ks_one_sample(&x, |v| normal_cdf(v, 0.0, target.sqrt()))?;
        report.push(
            row("X.ks", ks.statistic)
                .at(t)
                .stderr(KOLMOGOROV_SD / (n as f64).sqrt())
                .p_value(ks.p_value),
        );
        report.push(row("X.ks.alpha", alpha).at(t));
        let counts: Vec<f64> = samples.iter().map(|s| s.n[j] as f64).collect();
        let c = Summary::of(&counts);
        let nu_j = nu[j] as f64;
        report.push(
            row("N.mean_over_nu", c.mean / nu_j)
                .at(t)
                .stderr(c.stderr / nu_j)
                .target(1.0, Provenance::LimitTheorem),
        );
        for (i, &s_t) in grid[..j].iter().enumerate() {
            let (cov, se) = covariance(&xcol(i), &x);
            report.push(
                row(&format!("X.cov@s={s_t}"), cov)
                    .at(t)
                    .stderr(se)
                    .target(s_t * s_t / (6.0 * t), Provenance::Derived),
            );
        }
    }
    let big_t = cfg.horizon();
    let sup: Vec<f64> = samples.iter().map(|s| s.sup_x_minus_y).collect();
    let s = Summary::of(&sup);
    report.push(
        row("sup_abs_x_minus_y", s.mean)
            .at(big_t)
            .stderr(s.stderr)
            .target(0.0, Provenance::LimitTheorem),
    );
    let comp: Vec<f64> = samples.iter().map(|s| s.compensator).collect();
    let s = Summary::of(&comp);
    report.push(
        row("L_compensator", s.mean)
            .at(big_t)
            .stderr(s.stderr)
            .target(big_t.powi(3) / 6.0, Provenance::LimitTheorem),
    );
    let starts: Vec<f64> = samples.iter().map(|s| s.start).collect();
    let s = Summary::of(&starts);
    report.push(row("start.mean", s.mean).stderr(s.stderr));
    Ok(())
}

/// How well the entrance law of `n0` fits the hitting times of `n0` by
/// paths started higher up.
fn entrance_rows(report: &mut McReport, eps: f64, law: &EntranceLaw, hits: &[f64]) -> Result<()> {
    let z: Vec<f64> = hits.iter().map(|&h| law.z_score(h)).collect();
    let s = Summary::of(&z);
    let row = |stat: &str, est: f64| McRow::new(DOUBLED, stat, est).epsilon(eps);
    report.push(
        row("entrance.z.mean", s.mean)
            .stderr(s.stderr)
            .target(0.0, Provenance::Derived),
    );
    report.push(
        row("entrance.z.var", s.variance)
            .stderr(Summary::variance_stderr(&z))
            .target(1.0, Provenance::Derived),
    );
    let ks = ks_one_sample(hits, |x| law.cdf(x))?;
    let n = hits.len() as f64;
    report.push(
        row("entrance.ks", ks.statistic)
            .stderr(KOLMOGOROV_SD / n.sqrt())
            .p_value(ks.p_value),
    );
    Ok(())
}

/// Run the campaign over every `eps` and summarize both truncation levels.
pub fn clt_experiment(cfg: &CltConfig) -> Result<McReport> {
    cfg.validate()?;
    let eps0 = cfg.eps_list[0];
    let mut report = McReport::new(&config_hash(cfg), cfg.seed, cfg.replicates);
    let mut sups: Vec<(&str, f64, f64, f64)> = Vec::new();
    for (i, &eps) in cfg.eps_list.iter().enumerate() {
        let scale = eps0 / eps;
        let n0 = (cfg.n0 as f64 * scale).round() as u32;
        let n_max = (cfg.n_max as f64 * scale).round() as usize;
        let reps = if i == 0 {
            cfg.replicates
        } else {
            cfg.refinement_replicates
        };
        let seed = cfg.seed.wrapping_add(i as u64);
        let run = clt_samples(cfg, eps, n0, n_max, reps, seed)?;

        let table = HittingTable::new(&cfg.params, n_max, 1)?;
        let mut nu = Vec::with_capacity(cfg.t_grid.len());
        for &t in &cfg.t_grid {
            let speed = table.nu(eps * t)?;
            report.push(
                McRow::new(PRIMARY, "nu.speed", eps * t * speed.nu as f64 / 2.0)
                    .epsilon(eps)
                    .at(t)
                    .target(1.0, Provenance::LimitTheorem),
            );
            nu.push(speed.nu);
        }
        summarize(&mut report, PRIMARY, cfg, eps, &run.primary, &nu)?;
        if !run.doubled.is_empty() {
            summarize(&mut report, DOUBLED, cfg, eps, &run.doubled, &nu)?;
            let law = run.law.as_ref().expect("set by clt_samples");
            entrance_rows(&mut report, eps, law, &run.hits)?;
        }
        for exp in [PRIMARY, DOUBLED] {
            if let Some(r) = report.find_in(exp, "sup_abs_x_minus_y", None, Some(eps)) {
                sups.push((exp, eps, r.estimate, r.stderr.unwrap_or(0.0)));
            }
        }
    }
    for exp in [PRIMARY, DOUBLED] {
        let s: Vec<_> = sups.iter().filter(|r| r.0 == exp).collect();
        for w in s.windows(2) {
            let (_, e0, m0, se0) = *w[0];
            let (_, e1, m1, se1) = *w[1];
            let (r, se) = ratio_independent(m0, se0, m1, se1);
            report.push(
                McRow::new(exp, "sup_abs_x_minus_y.ratio", r)
                    .epsilon(e0)
                    .at(cfg.horizon())
                    .stderr(se)
                    .target((e0 / e1).sqrt(), Provenance::LimitTheorem),
            );
        }
    }
    Ok(report)
}
