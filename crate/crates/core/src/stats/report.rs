//! Campaign reports: replicate-level estimates with provenance, written as
//! JSON or as a long-format CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version of the long-format CSV layout.
pub const CSV_SCHEMA: &str = "asg-cdi/mc-long/v1";
pub const CSV_HEADER: [&str; 8] = [
    "experiment",
    "epsilon",
    "t",
    "statistic",
    "estimate",
    "stderr",
    "target",
    "tag",
];

/// Where a target value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Closed-form identity that holds exactly.
    ClosedForm,
    /// Limit law or asymptotic statement being checked at finite size.
    LimitTheorem,
    /// Independently derived value (e.g. covariance of the Gaussian limit).
    Derived,
    /// Value computed by the analytics module.
    Analytic,
    /// Row carries no target.
    Untargeted,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::LimitTheorem => "limit-theorem",
            Provenance::Derived => "derived",
            Provenance::Analytic => "analytic",
            Provenance::Untargeted => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub experiment: String,
    pub epsilon: Option<f64>,
    pub t: Option<f64>,
    pub statistic: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub target: Option<f64>,
    pub tag: Provenance,
    pub p_value: Option<f64>,
}

impl McRow {
    pub fn new(experiment: &str, statistic: &str, estimate: f64) -> Self {
        Self {
            experiment: experiment.to_owned(),
            epsilon: None,
            t: None,
            statistic: statistic.to_owned(),
            estimate,
            stderr: None,
            target: None,
            tag: Provenance::Untargeted,
            p_value: None,
        }
    }

    pub fn epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    pub fn target(mut self, target: f64, tag: Provenance) -> Self {
        self.target = Some(target);
        self.tag = tag;
        self
    }

    pub fn p_value(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub replicates: usize,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn new(config_hash: &str, master_seed: u64, replicates: usize) -> Self {
        Self {
            config_hash: config_hash.to_owned(),
            master_seed,
            replicates,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: McRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: McReport) {
        self.rows.extend(other.rows);
    }

    /// First row matching `statistic` (and `t`, `epsilon` when given).
    pub fn find(&self, statistic: &str, t: Option<f64>, epsilon: Option<f64>) -> Option<&McRow> {
        self.rows.iter().find(|r| {
            r.statistic == statistic
                && (t.is_none() || r.t == t)
                && (epsilon.is_none() || r.epsilon == epsilon)
        })
    }

    /// Like [`McReport::find`], restricted to one experiment.
    pub fn find_in(
        &self,
        experiment: &str,
        statistic: &str,
        t: Option<f64>,
        epsilon: Option<f64>,
    ) -> Option<&McRow> {
        self.rows.iter().find(|r| {
            r.experiment == experiment
                && r.statistic == statistic
                && (t.is_none() || r.t == t)
                && (epsilon.is_none() || r.epsilon == epsilon)
        })
    }

    /// Every target has a provenance tag and every Monte Carlo estimate
    /// built from more than one replicate has a positive standard error.
    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if r.target.is_some() && r.tag == Provenance::Untargeted {
                return Err(Error::Config(format!(
                    "row {} has a target without provenance",
                    r.statistic
                )));
            }
            if let Some(se) = r.stderr {
                if self.replicates > 1 && !(se > 0.0) {
                    return Err(Error::Config(format!(
                        "row {} has non-positive stderr {se}",
                        r.statistic
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Long-format CSV. The first line is a `#` comment carrying the schema
    /// version, config hash and seed; p-values become extra rows named
    /// `<statistic>.p_value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# schema={CSV_SCHEMA} config_hash={} seed={} replicates={}",
            self.config_hash, self.master_seed, self.replicates
        )?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.experiment.clone(),
                opt(r.epsilon),
                opt(r.t),
                r.statistic.clone(),
                fmt_f64(r.estimate),
                opt(r.stderr),
                opt(r.target),
                r.tag.as_str().to_owned(),
            ])?;
            if let Some(p) = r.p_value {
                out.write_record([
                    r.experiment.clone(),
                    opt(r.epsilon),
                    opt(r.t),
                    format!("{}.p_value", r.statistic),
                    fmt_f64(p),
                    String::new(),
                    String::new(),
                    Provenance::Untargeted.as_str().to_owned(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation.
/// Hex prefix of the SHA-256 of the canonical JSON serialization.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
