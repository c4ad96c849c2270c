//! Scenario files and the `N_u` sweep runner.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "name": "scenario2",
//!   "classes": [
//!     { "rho": 0.4, "N": 10, "r": 0.05 },
//!     { "rho": 0.4, "N": 3, "r": 0.3 }
//!   ],
//!   "policies": ["wip-maoii", "wip-aoi"],
//!   "n_users": [5, 10, 20, 40],
//!   "alpha": 0.2,
//!   "horizon": 200000,
//!   "warmup": 20000,
//!   "replications": 20,
//!   "seed": 2024,
//!   "dynamics": "reduced",
//!   "output": "results"
//! }
//! ```
//!
//! Each class gives `rho`, `N` (or `n_states`) and at least one of `p`, `r`.
//! Optional fields and their defaults: `policies` (all four), `alpha` (0.2),
//! `warmup` (10% of `horizon`), `replications` (20), `dynamics` (`reduced`),
//! `table_len` (1000), `output` (none; the caller picks a directory).
//!
//! Users are split evenly across classes for every `N_u`; the remainder goes
//! to the first class.
//!
//! Every `(N_u, policy)` run uses the scenario seed, so policies are compared
//! on common random numbers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{self, Channels, ClassSpec, Dynamics, PolicyId, SimConfig};
use crate::source::SourceParams;
use crate::whittle::DEFAULT_TABLE_LEN;

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_REPLICATIONS: usize = 20;

/// CSV header of the results table.
pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "policy",
    "N_u",
    "M",
    "mean_cost",
    "ci95",
    "per_class_means",
    "seed",
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassEntry {
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    r: Option<f64>,
    #[serde(alias = "N")]
    n_states: u32,
    rho: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    classes: Vec<ClassEntry>,
    #[serde(default)]
    policies: Option<Vec<PolicyId>>,
    n_users: Vec<usize>,
    #[serde(default)]
    alpha: Option<f64>,
    horizon: u64,
    #[serde(default)]
    warmup: Option<u64>,
    #[serde(default)]
    replications: Option<usize>,
    seed: u64,
    #[serde(default)]
    dynamics: Option<Dynamics>,
    #[serde(default)]
    table_len: Option<u32>,
    #[serde(default)]
    output: Option<PathBuf>,
}

/// A validated scenario with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub classes: Vec<SourceParams>,
    pub policies: Vec<PolicyId>,
    pub n_users: Vec<usize>,
    pub alpha: f64,
    pub horizon: u64,
    pub warmup: u64,
    pub replications: usize,
    pub seed: u64,
    pub dynamics: Dynamics,
    pub table_len: u32,
    pub output: Option<PathBuf>,
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}:{msg}", path.display())),
        other => other,
    })
}

/// Parses scenario JSON. Syntax and schema problems are `Parse` errors with
/// `line:column`; invalid values are `Validation` errors.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let raw: ScenarioFile = serde_json::from_str(text).map_err(crate::error::json_parse_error)?;
    Scenario::from_file(raw)
}

impl Scenario {
    fn from_file(raw: ScenarioFile) -> Result<Self> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        if raw.name.trim().is_empty() {
            return invalid("`name` must not be empty".into());
        }
        if raw.classes.is_empty() {
            return invalid("`classes` must list at least one class".into());
        }
        let classes = raw
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                SourceParams::make(c.p, c.r, c.n_states, c.rho)
                    .map_err(|e| Error::Validation(format!("class {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let policies = raw.policies.unwrap_or_else(|| PolicyId::ALL.to_vec());
        if policies.is_empty() {
            return invalid("`policies` must not be empty".into());
        }
        if raw.n_users.is_empty() {
            return invalid("`n_users` must list at least one population size".into());
        }
        if let Some(&bad) = raw.n_users.iter().find(|&&n| n == 0) {
            return invalid(format!("`n_users` entries must be >= 1, got {bad}"));
        }
        let alpha = raw.alpha.unwrap_or(DEFAULT_ALPHA);
        if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("`alpha` must lie in (0, 1], got {alpha}"));
        }
        let warmup = raw.warmup.unwrap_or(raw.horizon / 10);
        if raw.horizon <= warmup {
            return invalid(format!(
                "`horizon` ({}) must exceed `warmup` ({warmup})",
                raw.horizon
            ));
        }
        let replications = raw.replications.unwrap_or(DEFAULT_REPLICATIONS);
        if replications == 0 {
            return invalid("`replications` must be >= 1".into());
        }
        let table_len = raw.table_len.unwrap_or(DEFAULT_TABLE_LEN);
        if table_len < 2 {
            return invalid(format!("`table_len` must be >= 2, got {table_len}"));
        }
        Ok(Self {
            name: raw.name,
            classes,
            policies,
            n_users: raw.n_users,
            alpha,
            horizon: raw.horizon,
            warmup,
            replications,
            seed: raw.seed,
            dynamics: raw.dynamics.unwrap_or_default(),
            table_len,
            output: raw.output,
        })
    }

    /// Class populations for `n_users` total users.
    pub fn class_split(&self, n_users: usize) -> Vec<ClassSpec> {
        let k = self.classes.len();
        let base = n_users / k;
        let extra = n_users % k;
        self.classes
            .iter()
            .enumerate()
            .map(|(i, &params)| ClassSpec {
                params,
                count: base + if i == 0 { extra } else { 0 },
            })
            .collect()
    }

    pub fn sim_config(&self, policy: PolicyId, n_users: usize) -> SimConfig {
        SimConfig {
            classes: self.class_split(n_users),
            channels: Channels::Fraction(self.alpha),
            horizon: self.horizon,
            warmup: self.warmup,
            replications: self.replications,
            seed: self.seed,
            policy,
            dynamics: self.dynamics,
            table_len: self.table_len,
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub scenario: String,
    pub policy: PolicyId,
    #[serde(rename = "N_u")]
    pub n_users: usize,
    #[serde(rename = "M")]
    pub channels: usize,
    pub mean_cost: f64,
    /// `None` with a single replication.
    pub ci95: Option<f64>,
    pub per_class_means: Vec<f64>,
    pub seed: u64,
}

/// Runs every `(N_u, policy)` pair in sweep order.
pub fn run_rows(scenario: &Scenario) -> Result<Vec<ExperimentRow>> {
    let mut rows = Vec::with_capacity(scenario.n_users.len() * scenario.policies.len());
    for &n_users in &scenario.n_users {
        for &policy in &scenario.policies {
            let config = scenario.sim_config(policy, n_users);
            let result = sim::run(&config).map_err(|e| Error::Run {
                context: format!("{policy} at N_u = {n_users}"),
                source: Box::new(e),
            })?;
            rows.push(ExperimentRow {
                scenario: scenario.name.clone(),
                policy,
                n_users,
                channels: result.channels,
                mean_cost: result.mean_cost,
                ci95: result.ci95.is_finite().then_some(result.ci95),
                per_class_means: result.class_means,
                seed: scenario.seed,
            });
        }
    }
    Ok(rows)
}

/// Writes the results table. Floats use the shortest round-trip form, as
/// in the JSON twin; `per_class_means` is `;`-separated.
pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        let per_class = row
            .per_class_means
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        writer.write_record([
            row.scenario.clone(),
            row.policy.to_string(),
            row.n_users.to_string(),
            row.channels.to_string(),
            row.mean_cost.to_string(),
            row.ci95.map(|c| c.to_string()).unwrap_or_default(),
            per_class,
            row.seed.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[ExperimentRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// Runs the sweep and writes `<name>.csv` and `<name>.json` into `out_dir`.
pub fn run_experiment(scenario: &Scenario, out_dir: impl AsRef<Path>) -> Result<ExperimentOutput> {
    let out_dir = out_dir.as_ref();
    let rows = run_rows(scenario)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", scenario.name));
    let json_path = out_dir.join(format!("{}.json", scenario.name));
    write_csv(&rows, fs::File::create(&csv_path)?)?;
    write_json(
        &rows,
        std::io::BufWriter::new(fs::File::create(&json_path)?),
    )?;
    Ok(ExperimentOutput {
        rows,
        csv_path,
        json_path,
    })
}
