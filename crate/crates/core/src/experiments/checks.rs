//! Smaller Monte Carlo checks: marginal of `N_t`, pathwise coupling audit,
//! step times, the embedded jump chain and upward excursions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entrance::{simulate_from_entrance, EntranceLaw};
use super::runner::run_replicates;
use crate::analytics::{asg_step_moments, h_moments};
use crate::engine::{simulate_coupled, Coordinate, StopRule};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::estimate::{chi_square_survival, Summary};
use crate::stats::report::{config_hash, McReport, McRow, Provenance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GriffithsConfig {
    pub params: ModelParams,
    pub t: f64,
    pub n0: u32,
    pub n_max: usize,
    pub replicates: usize,
    pub seed: u64,
    pub entrance: bool,
}

impl GriffithsConfig {
    pub fn new(params: ModelParams, t: f64, n0: u32, replicates: usize, seed: u64) -> Self {
        Self {
            params,
            t,
            n0,
            n_max: 10 * n0 as usize,
            replicates,
            seed,
            entrance: true,
        }
    }
}

/// Samples of `N_t` for the selective coordinate.
pub fn count_samples(cfg: &GriffithsConfig) -> Result<Vec<f64>> {
    if cfg.replicates < 2 {
        return Err(Error::TooFewSamples {
            got: cfg.replicates,
            need: 2,
        });
    }
    let law = if cfg.entrance {
        EntranceLaw::for_level(&cfg.params, cfg.n0, cfg.n_max)?
    } else {
        EntranceLaw::zero(cfg.n0)
    };
    run_replicates(cfg.seed, cfg.replicates, |_, rng| {
        let tr = simulate_from_entrance(&cfg.params, &law, &StopRule::horizon(cfg.t), rng)?;
        Ok(tr.final_counts()[Coordinate::Selection.index()] as f64)
    })
}

/// Mean and variance of `N_t` against `2/t` and `2/(3t)`.
pub fn griffiths_check(cfg: &GriffithsConfig) -> Result<McReport> {
    let xs = count_samples(cfg)?;
    let s = Summary::of(&xs);
    let var_se = Summary::variance_stderr(&xs);
    let mut report = McReport::new(&config_hash(cfg), cfg.seed, cfg.replicates);
    report.push(
        McRow::new("griffiths", "N.mean", s.mean)
            .at(cfg.t)
            .stderr(s.stderr)
            .target(2.0 / cfg.t, Provenance::LimitTheorem),
    );
    report.push(
        McRow::new("griffiths", "N.var", s.variance)
            .at(cfg.t)
            .stderr(var_se)
            .target(2.0 / (3.0 * cfg.t), Provenance::LimitTheorem),
    );
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub params: ModelParams,
    pub n0: u32,
    pub stop_level: u32,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingAudit {
    pub trajectories: usize,
    pub events: u64,
    /// Events after which an order relation failed.
    pub violations: u64,
    /// Trajectories whose three coordinates did not move together; only
    /// meaningful without mutation and selection.
    pub non_identical: usize,
}

/// Check `N^{0,theta} <= N^{0,0}` and `N^{0,theta} <= N^{sigma,theta}` after
/// every event of every trajectory.
pub fn coupling_check(cfg: &CouplingConfig) -> Result<CouplingAudit> {
    let per = run_replicates(cfg.seed, cfg.replicates, |_, rng| {
        let tr = simulate_coupled(
            &cfg.params,
            cfg.n0,
            0.0,
            &StopRule::all_at_level(cfg.stop_level),
            rng,
        )?;
        let identical = tr.events().iter().all(|e| {
            e.applied.iter().all(|&a| a == e.applied[0])
                && e.counts.iter().all(|&c| c == e.counts[0])
        });
        Ok((
            tr.events().len() as u64,
            tr.coupling_violations() as u64,
            identical,
        ))
    })?;
    Ok(CouplingAudit {
        trajectories: per.len(),
        events: per.iter().map(|p| p.0).sum(),
        violations: per.iter().map(|p| p.1).sum(),
        non_identical: per.iter().filter(|p| !p.2).count(),
    })
}

/// Mean of `T_{n,n-1}` for the selective coordinate against the recursion.
pub fn step_time_check(
    params: &ModelParams,
    n: u32,
    replicates: usize,
    seed: u64,
) -> Result<McReport> {
    let table = asg_step_moments(params, (n as usize + 10).max(2000), 2)?;
    let xs = run_replicates(seed, replicates, |_, rng| {
        let tr = simulate_coupled(
            params,
            n,
            0.0,
            &StopRule::coordinate_at_level(Coordinate::Selection, n - 1),
            rng,
        )?;
        Ok(tr.stop_time())
    })?;
    let s = Summary::of(&xs);
    let second: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let s2 = Summary::of(&second);
    let mut report = McReport::new(
        &config_hash(&(params, n, replicates, seed)),
        seed,
        replicates,
    );
    let target = |k| table.get(n as usize, k).expect("level in table");
    report.push(
        McRow::new("step", "T.mean", s.mean)
            .at(n as f64)
            .stderr(s.stderr)
            .target(target(1), Provenance::Derived),
    );
    report.push(
        McRow::new("step", "T.second_moment", s2.mean)
            .at(n as f64)
            .stderr(s2.stderr)
            .target(target(2), Provenance::Derived),
    );
    Ok(report)
}

/// Per-level statistics of the embedded jump chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub n: u32,
    pub ups: u64,
    pub downs: u64,
    pub up_probability: f64,
    pub holding_mean: f64,
    pub holding_stderr: f64,
    pub holding_target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedChainReport {
    pub levels: Vec<LevelStats>,
    pub chi_square: f64,
    pub dof: f64,
    pub p_value: f64,
}

impl EmbeddedChainReport {
    /// Levels whose mean holding time is more than `z` standard errors off.
    pub fn holding_outliers(&self, z: f64) -> Vec<u32> {
        self.levels
            .iter()
            .filter(|l| (l.holding_mean - l.holding_target).abs() > z * l.holding_stderr)
            .map(|l| l.n)
            .collect()
    }
}

/// Up/down counts and holding times of the selective coordinate started
/// at `n0` and run to `stop_level`, tested against `p_n` by a Pearson
/// chi-square summed over levels (cells with fewer than 5 expected counts
/// are dropped).
pub fn embedded_chain_check(
    params: &ModelParams,
    n0: u32,
    stop_level: u32,
    replicates: usize,
    seed: u64,
) -> Result<EmbeddedChainReport> {
    if stop_level >= n0 {
        return Err(Error::Config("stop level must be below n0".into()));
    }
    type Tally = BTreeMap<u32, (u64, u64, Vec<f64>)>;
    let per: Vec<Tally> = run_replicates(seed, replicates, |_, rng| {
        let tr = simulate_coupled(
            params,
            n0,
            0.0,
            &StopRule::coordinate_at_level(Coordinate::Selection, stop_level),
            rng,
        )?;
        let path = tr.path(Coordinate::Selection);
        let mut tally = Tally::new();
        for seg in path.segments() {
            if seg.level <= stop_level {
                break;
            }
            let e = tally.entry(seg.level).or_default();
            e.2.push(seg.to - seg.from);
        }
        for (_, before, after) in path.jumps() {
            let e = tally.entry(before).or_default();
            if after > before {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        Ok(tally)
    })?;
    let mut total = Tally::new();
    for t in per {
        for (n, (u, d, h)) in t {
            let e = total.entry(n).or_default();
            e.0 += u;
            e.1 += d;
            e.2.extend(h);
        }
    }
    let mut levels = Vec::new();
    let mut chi = 0.0;
    let mut dof = 0.0;
    for (n, (ups, downs, holds)) in total {
        let p = params.up_probability(n as usize).unwrap_or(0.0);
        let visits = (ups + downs) as f64;
        let e_up = p * visits;
        let e_down = (1.0 - p) * visits;
        if e_up >= 5.0 && e_down >= 5.0 {
            chi += (ups as f64 - e_up).powi(2) / e_up + (downs as f64 - e_down).powi(2) / e_down;
            dof += 1.0;
        }
        let s = Summary::of(&holds);
        levels.push(LevelStats {
            n,
            ups,
            downs,
            up_probability: p,
            holding_mean: s.mean,
            holding_stderr: s.stderr,
            holding_target: 1.0 / params.holding_rate(n as usize),
        });
    }
    let p_value = if dof > 0.0 {
        chi_square_survival(chi, dof)
    } else {
        f64::NAN
    };
    Ok(EmbeddedChainReport {
        levels,
        chi_square: chi,
        dof,
        p_value,
    })
}

/// Moments of the number of upward jumps made between reaching `n` and
/// reaching `n - 1`, against the excursion recursion.
pub fn excursion_check(
    params: &ModelParams,
    n: u32,
    k_max: usize,
    replicates: usize,
    seed: u64,
) -> Result<McReport> {
    let table = h_moments(params, (n as usize + 10).max(2000), k_max)?;
    let xs = run_replicates(seed, replicates, |_, rng| {
        let tr = simulate_coupled(
            params,
            n,
            0.0,
            &StopRule::coordinate_at_level(Coordinate::Selection, n - 1),
            rng,
        )?;
        let ups = tr
            .path(Coordinate::Selection)
            .jumps()
            .filter(|j| j.2 > j.1)
            .count();
        Ok(ups as f64)
    })?;
    let mut report = McReport::new(
        &config_hash(&(params, n, k_max, replicates, seed)),
        seed,
        replicates,
    );
    for k in 1..=k_max {
        let pk: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
        let s = Summary::of(&pk);
        let target = table
            .get(n as usize, k)
            .ok_or(Error::AbsorbingLevel { level: n as usize })?;
        report.push(
            McRow::new("excursion", &format!("H.moment{k}"), s.mean)
                .at(n as f64)
                .stderr(s.stderr)
                .target(target, Provenance::Derived),
        );
    }
    Ok(report)
}
