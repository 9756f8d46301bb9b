//! Command-line interface.
//!
//! Settings are resolved in three layers: built-in defaults for the
//! subcommand, then an optional TOML file (`--config`), then flags. The
//! resolved settings are written to `config.resolved` next to the data
//! files, and their hash goes into every artifact.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytics::{
    absorption_moment_oracle, asg_step_moments, passage_moments_from_steps, HittingTable,
};
use crate::engine::{simulate_coupled, StopRule};
use crate::error::{Error, Result};
use crate::experiments::checks::{coupling_check, CouplingConfig};
use crate::experiments::clt::{clt_experiment, CltConfig};
use crate::experiments::run_replicates;
use crate::experiments::supdev::{sup_deviation_moments, SupDevConfig};
use crate::params::ModelParams;
use crate::stats::report::{config_hash, fmt_f64, McReport};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "ASG_CDI_OUT";
pub const RESOLVED_FILE: &str = "config.resolved";

/// Highest level included in the oracle cross-check of `moments`.
const ORACLE_CHECK_TOP: usize = 60;

const DEFAULTS_HELP: &str = "\
Defaults (overridden by --config, then by flags):
  all            theta = 0, sigma = 0, seed = 1, format = csv, out = $ASG_CDI_OUT or ./out
  simulate       n0 = 100, replicates = 10, stop_level = 1; a t-grid sets the horizon to its largest time
  moments        nmax = 1000, k_max = 4
  cdi            nmax = 100000, t_grid = 0.1,0.01,0.001,0.0001
  supdev         n0 = 10000, nmax = 10 n0, replicates = 1000, power = 2, t_grid = 0.2,0.1,0.05,0.02
  clt            n0 = 100000, nmax = 4 n0, replicates = 10000, refinement_replicates = 1000,
                 eps_list = 0.0001,0.000025, t_grid = 0.25,0.5,1, truncation_check = false
  coupling-check n0 = 1000, replicates = 1000, stop_level = 1

Exit status: 0 on success, 2 for an invalid configuration, 1 for a runtime failure.";

#[derive(Debug, Parser)]
#[command(name = "asg-cdi", version, about = "Coalescent block-counting processes: simulation, moments and fluctuation campaigns", after_help = DEFAULTS_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupled trajectory samples.
    Simulate(Flags),
    /// Step-moment table with an oracle cross-check.
    Moments(Flags),
    /// Speed of coming down from infinity on a t-grid.
    Cdi(Flags),
    /// Sup-deviation moments over shrinking windows.
    Supdev(Flags),
    /// Functional central limit campaign.
    Clt(Flags),
    /// Pathwise order audit of the coupling.
    CouplingCheck(Flags),
}

impl Command {
    fn parts(&self) -> (SubcommandKind, &Flags) {
        match self {
            Command::Simulate(f) => (SubcommandKind::Simulate, f),
            Command::Moments(f) => (SubcommandKind::Moments, f),
            Command::Cdi(f) => (SubcommandKind::Cdi, f),
            Command::Supdev(f) => (SubcommandKind::Supdev, f),
            Command::Clt(f) => (SubcommandKind::Clt, f),
            Command::CouplingCheck(f) => (SubcommandKind::CouplingCheck, f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandKind {
    Simulate,
    Moments,
    Cdi,
    Supdev,
    Clt,
    CouplingCheck,
}

impl SubcommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubcommandKind::Simulate => "simulate",
            SubcommandKind::Moments => "moments",
            SubcommandKind::Cdi => "cdi",
            SubcommandKind::Supdev => "supdev",
            SubcommandKind::Clt => "clt",
            SubcommandKind::CouplingCheck => "coupling-check",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Settings shared by every subcommand. Also the schema of the `--config`
/// file (same names, with `nmax` spelled `n_max`).
#[derive(Clone, Debug, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// TOML file with any of the settings below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Must match the command line when given in a file.
    #[arg(skip)]
    pub subcommand: Option<SubcommandKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Initial lineage count.
    #[arg(long)]
    pub n0: Option<u32>,
    /// Truncation level of the moment tables.
    #[arg(long = "nmax")]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Replicates for every eps after the first (clt).
    #[arg(long)]
    pub refinement_replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Comma-separated, strictly decreasing (clt).
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Highest moment order (moments).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Power of the sup-deviation (supdev).
    #[arg(long)]
    pub power: Option<u32>,
    /// Level at which trajectories stop (simulate, coupling-check).
    #[arg(long)]
    pub stop_level: Option<u32>,
    /// Also run from 2 n0 with 2 nmax (clt).
    #[arg(long)]
    pub truncation_check: Option<bool>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Flags {
    /// `other` wins wherever it is set.
    fn overlay(self, other: Flags) -> Flags {
        Flags {
            config: other.config.or(self.config),
            subcommand: other.subcommand.or(self.subcommand),
            theta: other.theta.or(self.theta),
            sigma: other.sigma.or(self.sigma),
            n0: other.n0.or(self.n0),
            n_max: other.n_max.or(self.n_max),
            replicates: other.replicates.or(self.replicates),
            refinement_replicates: other.refinement_replicates.or(self.refinement_replicates),
            seed: other.seed.or(self.seed),
            t_grid: other.t_grid.or(self.t_grid),
            eps_list: other.eps_list.or(self.eps_list),
            k_max: other.k_max.or(self.k_max),
            power: other.power.or(self.power),
            stop_level: other.stop_level.or(self.stop_level),
            truncation_check: other.truncation_check.or(self.truncation_check),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub subcommand: SubcommandKind,
    pub theta: f64,
    pub sigma: f64,
    pub n0: u32,
    pub n_max: usize,
    pub replicates: usize,
    pub refinement_replicates: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub k_max: usize,
    pub power: u32,
    pub stop_level: u32,
    pub truncation_check: bool,
    pub format: Format,
    pub out: PathBuf,
}

impl CampaignConfig {
    pub fn resolve(kind: SubcommandKind, flags: Flags) -> Result<Self> {
        if let Some(s) = flags.subcommand {
            if s != kind {
                return Err(Error::Config(format!(
                    "config file is for `{}` but `{}` was requested",
                    s.as_str(),
                    kind.as_str()
                )));
            }
        }
        use SubcommandKind::*;
        let n0 = flags.n0.unwrap_or(match kind {
            Simulate => 100,
            Supdev => 10_000,
            Clt => 100_000,
            _ => 1000,
        });
        let n_max = flags.n_max.unwrap_or(match kind {
            Moments => 1000,
            Cdi => 100_000,
            Supdev => 10 * n0 as usize,
            Clt => 4 * n0 as usize,
            _ => 0,
        });
        let replicates = flags.replicates.unwrap_or(match kind {
            Simulate => 10,
            Clt => 10_000,
            Supdev | CouplingCheck => 1000,
            _ => 0,
        });
        let t_grid = flags.t_grid.unwrap_or_else(|| match kind {
            Cdi => vec![0.1, 0.01, 0.001, 0.0001],
            Supdev => vec![0.2, 0.1, 0.05, 0.02],
            Clt => vec![0.25, 0.5, 1.0],
            _ => Vec::new(),
        });
        let eps_list = flags.eps_list.unwrap_or_else(|| {
            if kind == Clt {
                vec![1e-4, 2.5e-5]
            } else {
                Vec::new()
            }
        });
        let cfg = Self {
            subcommand: kind,
            theta: flags.theta.unwrap_or(0.0),
            sigma: flags.sigma.unwrap_or(0.0),
            n0,
            n_max,
            replicates,
            refinement_replicates: flags.refinement_replicates.unwrap_or(if kind == Clt {
                1000
            } else {
                0
            }),
            seed: flags.seed.unwrap_or(1),
            t_grid,
            eps_list,
            k_max: flags.k_max.unwrap_or(4),
            power: flags.power.unwrap_or(2),
            stop_level: flags.stop_level.unwrap_or(1),
            truncation_check: flags.truncation_check.unwrap_or(false),
            format: flags.format.unwrap_or_default(),
            out: flags.out.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.params()?;
        if cfg
            .t_grid
            .iter()
            .chain(&cfg.eps_list)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::Config(
                "grid values must be positive and finite".into(),
            ));
        }
        if cfg.n0 == 0 {
            return Err(Error::Config("n0 must be >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.theta, self.sigma)
    }

    /// Hash of everything except the output location, so that the same
    /// campaign written to two directories produces identical files.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("struct").remove("out");
        config_hash(&v)
    }

    fn data_path(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.{}", self.format.extension()))
    }
}

/// Read a TOML settings file.
pub fn load_config_file(path: &Path) -> Result<Flags> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))
}

/// Exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParams(_)
        | Error::Config(_)
        | Error::TooFewSamples { .. }
        | Error::IncreaseNmax { .. } => 2,
        _ => 1,
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Resolve the settings of `command` and run it. Returns the files written.
pub fn execute(command: &Command) -> Result<Vec<PathBuf>> {
    let (kind, flags) = command.parts();
    let base = match &flags.config {
        Some(p) => load_config_file(p)?,
        None => Flags::default(),
    };
    let cfg = CampaignConfig::resolve(kind, base.overlay(flags.clone()))?;
    run(&cfg)
}

/// Run a resolved campaign and write its artifacts.
pub fn run(cfg: &CampaignConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out)?;
    let hash = cfg.hash();
    let resolved = cfg.out.join(RESOLVED_FILE);
    write_resolved(cfg, &hash, &resolved)?;
    let mut files = vec![resolved];
    match cfg.subcommand {
        SubcommandKind::Simulate => files.push(run_simulate(cfg, &hash)?),
        SubcommandKind::Moments => files.extend(run_moments(cfg, &hash)?),
        SubcommandKind::Cdi => files.push(run_cdi(cfg, &hash)?),
        SubcommandKind::Supdev => {
            let mut c = SupDevConfig::new(
                cfg.params()?,
                cfg.t_grid.clone(),
                cfg.power,
                cfg.n0,
                cfg.replicates,
                cfg.seed,
            );
            c.n_max = cfg.n_max;
            files.push(write_report(cfg, &hash, sup_deviation_moments(&c)?)?);
        }
        SubcommandKind::Clt => {
            let mut c = CltConfig::new(
                cfg.params()?,
                cfg.eps_list.clone(),
                cfg.t_grid.clone(),
                cfg.replicates,
                cfg.seed,
            );
            c.n0 = cfg.n0;
            c.n_max = cfg.n_max;
            c.refinement_replicates = cfg.refinement_replicates;
            c.truncation_check = cfg.truncation_check;
            files.push(write_report(cfg, &hash, clt_experiment(&c)?)?);
        }
        SubcommandKind::CouplingCheck => files.push(run_coupling(cfg, &hash)?),
    }
    Ok(files)
}

fn write_resolved(cfg: &CampaignConfig, hash: &str, path: &Path) -> Result<()> {
    let body =
        toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# asg-cdi {} resolved settings", cfg.subcommand.as_str())?;
    writeln!(w, "# config_hash = {hash}")?;
    w.write_all(body.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn header_line(schema: &str, hash: &str, seed: u64) -> String {
    format!("# schema=asg-cdi/{schema}/v1 config_hash={hash} seed={seed}")
}

fn write_report(cfg: &CampaignConfig, hash: &str, mut report: McReport) -> Result<PathBuf> {
    report.config_hash = hash.to_owned();
    let path = cfg.data_path(cfg.subcommand.as_str());
    let w = BufWriter::new(File::create(&path)?);
    match cfg.format {
        Format::Csv => report.write_csv(w)?,
        Format::Json => report.write_json(w)?,
    }
    Ok(path)
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    schema: String,
    config_hash: &'a str,
    seed: u64,
    data: T,
}

fn write_artifact<T: Serialize>(
    cfg: &CampaignConfig,
    hash: &str,
    stem: &str,
    header: &[&str],
    rows: &[Vec<String>],
    json: T,
) -> Result<PathBuf> {
    let path = cfg.data_path(stem);
    let mut w = BufWriter::new(File::create(&path)?);
    match cfg.format {
        Format::Csv => {
            writeln!(w, "{}", header_line(stem, hash, cfg.seed))?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record(header)?;
            for r in rows {
                out.write_record(r)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let a = Artifact {
                schema: format!("asg-cdi/{stem}/v1"),
                config_hash: hash,
                seed: cfg.seed,
                data: json,
            };
            serde_json::to_writer_pretty(&mut w, &a)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(path)
}

fn run_simulate(cfg: &CampaignConfig, hash: &str) -> Result<PathBuf> {
    let params = cfg.params()?;
    let mut stop = StopRule::all_at_level(cfg.stop_level);
    if let Some(h) = cfg.t_grid.iter().copied().reduce(f64::max) {
        stop = stop.with_horizon(h);
    }
    let trajectories = run_replicates(cfg.seed, cfg.replicates, |_, rng| {
        let tr = simulate_coupled(&params, cfg.n0, 0.0, &stop, rng)?;
        let mut rows = vec![(0.0, [cfg.n0; 3])];
        rows.extend(tr.events().iter().map(|e| (e.time, e.counts)));
        Ok(rows)
    })?;
    let mut rows = Vec::new();
    for (r, tr) in trajectories.iter().enumerate() {
        for (i, (t, c)) in tr.iter().enumerate() {
            rows.push(vec![
                r.to_string(),
                i.to_string(),
                fmt_f64(*t),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
            ]);
        }
    }
    write_artifact(
        cfg,
        hash,
        "simulate",
        &[
            "replicate",
            "event",
            "time",
            "kingman",
            "mutation",
            "selection",
        ],
        &rows,
        &trajectories,
    )
}

fn run_moments(cfg: &CampaignConfig, hash: &str) -> Result<Vec<PathBuf>> {
    let params = cfg.params()?;
    let table = asg_step_moments(&params, cfg.n_max, cfg.k_max)?;
    let mut rows = Vec::new();
    for n in table.n_min..=table.n_max {
        for k in 1..=table.k_max {
            rows.push(vec![
                n.to_string(),
                k.to_string(),
                fmt_f64(table.get(n, k).expect("in range")),
                table.method.as_str().to_owned(),
                fmt_f64(table.truncation_error(n, k).expect("in range")),
            ]);
        }
    }
    let header = ["n", "k", "value", "method", "truncation_error"];
    let json: Vec<_> = rows.iter().map(|r| row_object(&header, r)).collect();
    let main = write_artifact(cfg, hash, "moments", &header, &rows, json)?;

    // passage times T_{n, m-1} from the table against the dense solve
    let m = table.n_min;
    let top = ORACLE_CHECK_TOP.min(table.n_max);
    let oracle = absorption_moment_oracle(&params, m, top, table.k_max)?;
    let local = asg_step_moments(&params, top.max(m + 10), table.k_max)?;
    let from_steps = passage_moments_from_steps(&local, m)?;
    let mut rows = Vec::new();
    for n in m..=top {
        for k in 1..=table.k_max {
            let (a, b) = (from_steps[n - m][k], oracle[n - m][k]);
            rows.push(vec![
                n.to_string(),
                k.to_string(),
                fmt_f64(a),
                fmt_f64(b),
                fmt_f64(((a - b) / b).abs()),
            ]);
        }
    }
    let header = ["n", "k", "recursion", "oracle", "relative_deviation"];
    let json: Vec<_> = rows.iter().map(|r| row_object(&header, r)).collect();
    let check = write_artifact(cfg, hash, "moments_oracle", &header, &rows, json)?;
    Ok(vec![main, check])
}

fn row_object(header: &[&str], row: &[String]) -> serde_json::Map<String, serde_json::Value> {
    header
        .iter()
        .zip(row)
        .map(|(h, v)| {
            let value = match v.parse::<f64>() {
                Ok(x) if x.is_finite() => serde_json::json!(x),
                _ => serde_json::json!(v),
            };
            ((*h).to_owned(), value)
        })
        .collect()
}

fn run_cdi(cfg: &CampaignConfig, hash: &str) -> Result<PathBuf> {
    let params = cfg.params()?;
    if cfg.t_grid.is_empty() {
        return Err(Error::Config("cdi needs a non-empty t-grid".into()));
    }
    let table = HittingTable::new(&params, cfg.n_max, 1)?;
    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        let s = table.nu(t)?;
        rows.push(vec![
            fmt_f64(t),
            s.nu.to_string(),
            fmt_f64(t * s.nu as f64 / 2.0),
            fmt_f64(s.mean_at_nu),
            s.mean_below.map(fmt_f64).unwrap_or_default(),
            fmt_f64(s.error_bound),
            s.sandwich_holds().to_string(),
        ]);
    }
    let header = [
        "t",
        "nu",
        "t_nu_over_2",
        "mean_at_nu",
        "mean_below",
        "error_bound",
        "sandwich",
    ];
    let json: Vec<_> = rows.iter().map(|r| row_object(&header, r)).collect();
    write_artifact(cfg, hash, "cdi", &header, &rows, json)
}

fn run_coupling(cfg: &CampaignConfig, hash: &str) -> Result<PathBuf> {
    let audit = coupling_check(&CouplingConfig {
        params: cfg.params()?,
        n0: cfg.n0,
        stop_level: cfg.stop_level,
        replicates: cfg.replicates,
        seed: cfg.seed,
    })?;
    let row = vec![
        audit.trajectories.to_string(),
        audit.events.to_string(),
        audit.violations.to_string(),
        audit.non_identical.to_string(),
    ];
    write_artifact(
        cfg,
        hash,
        "coupling-check",
        &["trajectories", "events", "violations", "non_identical"],
        &[row],
        &audit,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Flags {
        Flags::default()
    }

    #[test]
    fn layers_resolve_in_order() {
        let file: Flags = toml::from_str("theta = 1.0\nsigma = 2.0\nn0 = 500\n").unwrap();
        let cli = Flags {
            sigma: Some(0.5),
            ..flags()
        };
        let cfg = CampaignConfig::resolve(SubcommandKind::Supdev, file.overlay(cli)).unwrap();
        assert_eq!(
            (cfg.theta, cfg.sigma, cfg.n0, cfg.n_max),
            (1.0, 0.5, 500, 5000)
        );
        assert_eq!(cfg.t_grid, vec![0.2, 0.1, 0.05, 0.02]);
    }

    #[test]
    fn bad_settings_are_config_errors() {
        assert!(toml::from_str::<Flags>("thetta = 1.0").is_err());
        let e = CampaignConfig::resolve(
            SubcommandKind::Cdi,
            Flags {
                theta: Some(-1.0),
                ..flags()
            },
        )
        .unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let e = CampaignConfig::resolve(
            SubcommandKind::Cdi,
            Flags {
                t_grid: Some(vec![0.0]),
                ..flags()
            },
        )
        .unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let wrong = Flags {
            subcommand: Some(SubcommandKind::Clt),
            ..flags()
        };
        assert!(CampaignConfig::resolve(SubcommandKind::Cdi, wrong).is_err());
        assert_eq!(exit_code(&Error::Absorbed), 1);
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = CampaignConfig::resolve(
            SubcommandKind::Moments,
            Flags {
                out: Some("a".into()),
                ..flags()
            },
        )
        .unwrap();
        let b = CampaignConfig::resolve(
            SubcommandKind::Moments,
            Flags {
                out: Some("b".into()),
                ..flags()
            },
        )
        .unwrap();
        let c = CampaignConfig::resolve(
            SubcommandKind::Moments,
            Flags {
                seed: Some(2),
                ..flags()
            },
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn resolved_file_round_trips() {
        let cfg = CampaignConfig::resolve(SubcommandKind::Clt, flags()).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: CampaignConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
