//! Cross-checks of every closed form against an independent computation.
//!
//! A grid file lists parameter points plus optional sweep limits:
//!
//! ```json
//! {
//!   "points": [ { "N": 2, "r": 0.1, "rho": 0.5 }, { "N": 8, "p": 0.3, "rho": 1.0 } ],
//!   "ladder_len": 500,
//!   "avg_n_max": 50,
//!   "index_n_max": 100,
//!   "monotone_n_max": 1000,
//!   "mdp_points": 8,
//!   "mdp_n_max": 10,
//!   "mdp_tol": 0.001,
//!   "scan_multipliers": [0, 0.5, 1, 5, 50]
//! }
//! ```
//!
//! Only `points` is required. The report lists every check with its
//! tolerance, the largest deviation seen and a verdict. Closed forms known to
//! be off (kept only for comparison) appear as findings, not checks. Points on
//! the `p = r` boundary are flagged.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{indexability_scan, WhittleSearch, DEFAULT_J_MAX};
use crate::metrics::{
    aoii_pmf, maoii_increment, maoii_value_closed, maoii_value_series, MaoiiLadder, Metric, Penalty,
};
use crate::policy_eval::{
    avg_active_time, avg_active_time_series, avg_aoi, avg_maoii_closed, avg_maoii_uncorrected,
    avg_penalty_series, balance_residual, series_terms_needed, DEFAULT_SERIES_CAP,
};
use crate::source::{powu, SourceParams};
use crate::whittle::{
    whittle_closed, whittle_maoii_uncorrected, IntersectionOracle, WhittleTable, ORACLE_SERIES_TOL,
};

pub const LADDER_TOL: f64 = 1e-10;
pub const PMF_SUM_TOL: f64 = 1e-12;
pub const BALANCE_TOL: f64 = 1e-12;
pub const AVERAGE_TOL: f64 = 1e-9;
pub const INDEX_TOL: f64 = 1e-8;
pub const MDP_TOL: f64 = 1e-3;

/// Thresholds whose stationary chains are checked for balance.
const BALANCE_THRESHOLDS: [u32; 3] = [1, 3, 10];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointEntry {
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
struct GridFile {
    points: Vec<PointEntry>,
    #[serde(default)]
    ladder_len: Option<u32>,
    #[serde(default)]
    avg_n_max: Option<u32>,
    #[serde(default)]
    index_n_max: Option<u32>,
    #[serde(default)]
    monotone_n_max: Option<u32>,
    #[serde(default)]
    mdp_points: Option<usize>,
    #[serde(default)]
    mdp_n_max: Option<u32>,
    #[serde(default)]
    mdp_tol: Option<f64>,
    #[serde(default)]
    scan_multipliers: Option<Vec<f64>>,
}

/// A parameter grid with sweep limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub points: Vec<SourceParams>,
    pub ladder_len: u32,
    pub avg_n_max: u32,
    pub index_n_max: u32,
    pub monotone_n_max: u32,
    /// How many leading points also go through the MDP solver.
    pub mdp_points: usize,
    pub mdp_n_max: u32,
    pub mdp_tol: f64,
    /// Charges for the indexability scan, as multiples of `W(1)`.
    pub scan_multipliers: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<SourceParams>) -> Self {
        Self {
            points,
            ladder_len: 500,
            avg_n_max: 50,
            index_n_max: 100,
            monotone_n_max: 1000,
            mdp_points: 8,
            mdp_n_max: 10,
            mdp_tol: MDP_TOL,
            scan_multipliers: vec![0.0, 0.5, 1.0, 5.0, 50.0],
        }
    }
}

pub fn parse_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_grid_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}:{msg}", path.display())),
        other => other,
    })
}

/// An empty `points` list is a parse error.
pub fn parse_grid_str(text: &str) -> Result<Grid> {
    let raw: GridFile = serde_json::from_str(text).map_err(crate::error::json_parse_error)?;
    if raw.points.is_empty() {
        return Err(Error::Parse("grid has no points".into()));
    }
    let points = raw
        .points
        .iter()
        .enumerate()
        .map(|(i, c)| {
            SourceParams::make(c.p, c.r, c.n_states, c.rho)
                .map_err(|e| Error::Validation(format!("point {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = Grid::new(points);
    grid.ladder_len = raw.ladder_len.unwrap_or(grid.ladder_len);
    grid.avg_n_max = raw.avg_n_max.unwrap_or(grid.avg_n_max);
    grid.index_n_max = raw.index_n_max.unwrap_or(grid.index_n_max);
    grid.monotone_n_max = raw.monotone_n_max.unwrap_or(grid.monotone_n_max);
    grid.mdp_points = raw.mdp_points.unwrap_or(grid.mdp_points);
    grid.mdp_n_max = raw.mdp_n_max.unwrap_or(grid.mdp_n_max);
    grid.mdp_tol = raw.mdp_tol.unwrap_or(grid.mdp_tol);
    if let Some(m) = raw.scan_multipliers {
        grid.scan_multipliers = m;
    }
    for (name, v) in [
        ("ladder_len", grid.ladder_len),
        ("avg_n_max", grid.avg_n_max),
        ("index_n_max", grid.index_n_max),
        ("monotone_n_max", grid.monotone_n_max),
        ("mdp_n_max", grid.mdp_n_max),
    ] {
        if v == 0 {
            return Err(Error::Validation(format!("`{name}` must be >= 1")));
        }
    }
    if grid.mdp_n_max > DEFAULT_J_MAX / 2 {
        return Err(Error::Validation(format!(
            "`mdp_n_max` must be <= {}",
            DEFAULT_J_MAX / 2
        )));
    }
    if grid.mdp_tol.is_nan() || grid.mdp_tol <= 0.0 {
        return Err(Error::Validation("`mdp_tol` must be > 0".into()));
    }
    if grid.scan_multipliers.windows(2).any(|w| w[1] < w[0])
        || grid.scan_multipliers.iter().any(|m| m.is_nan() || *m < 0.0)
    {
        return Err(Error::Validation(
            "`scan_multipliers` must be nonnegative and ascending".into(),
        ));
    }
    Ok(grid)
}

/// Outcome of one check across the grid.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub evaluations: usize,
    /// Where the largest deviation occurred.
    pub worst_at: String,
    pub passed: bool,
}

/// Deviation of a closed form that is kept only for comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Finding {
    pub name: String,
    pub max_deviation: f64,
    pub worst_at: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Degeneracy {
    /// 1-based position in the grid.
    pub point: usize,
    pub params: SourceParams,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub points: Vec<SourceParams>,
    pub checks: Vec<CheckResult>,
    pub findings: Vec<Finding>,
    pub degeneracies: Vec<Degeneracy>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} parameter points", self.points.len())?;
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<44} tol {:>8.1e}  max dev {:>10.3e}  ({} evals, worst at {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.tolerance,
                c.max_deviation,
                c.evaluations,
                c.worst_at
            )?;
        }
        for e in &self.findings {
            writeln!(
                f,
                "NOTE {:<44} max dev {:.3e} at {}: {}",
                e.name, e.max_deviation, e.worst_at, e.detail
            )?;
        }
        for d in &self.degeneracies {
            writeln!(f, "FLAG point {}: {}", d.point, d.detail)?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "all checks passed"
            } else {
                "some checks FAILED"
            }
        )
    }
}

/// Running maximum of a deviation with its location.
struct Tracker {
    name: &'static str,
    tolerance: f64,
    max: f64,
    worst_at: String,
    evaluations: usize,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            max: 0.0,
            worst_at: "-".into(),
            evaluations: 0,
        }
    }

    fn record(&mut self, deviation: f64, at: impl FnOnce() -> String) {
        self.evaluations += 1;
        // NaN counts as the worst possible deviation
        let deviation = if deviation.is_nan() {
            f64::INFINITY
        } else {
            deviation
        };
        if deviation > self.max || self.evaluations == 1 && deviation == self.max {
            self.max = deviation;
            self.worst_at = at();
        }
    }

    fn check(self) -> CheckResult {
        CheckResult {
            name: self.name.into(),
            tolerance: self.tolerance,
            passed: self.max <= self.tolerance,
            max_deviation: self.max,
            evaluations: self.evaluations,
            worst_at: self.worst_at,
        }
    }

    fn finding(self, detail: &str) -> Finding {
        Finding {
            name: self.name.into(),
            max_deviation: self.max,
            worst_at: self.worst_at,
            detail: detail.into(),
        }
    }
}

fn at(i: usize, label: &str, k: u32) -> String {
    format!("point {} {label}={k}", i + 1)
}

/// Error relative to `max(1, |reference|)`.
fn rel(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1.0)
}

/// Runs every check on the grid.
pub fn verify(grid: &Grid) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut findings = Vec::new();
    checks.extend(ladder_checks(grid)?);
    checks.extend(average_checks(grid, &mut findings)?);
    checks.extend(index_checks(grid, &mut findings)?);
    checks.extend(mdp_checks(grid)?);
    let degeneracies = grid
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_uniform())
        .map(|(i, &params)| Degeneracy {
            point: i + 1,
            params,
            detail: format!(
                "p = r = {}: the source forgets its state in one slot, so \
                 every (p - r)^k term vanishes and the belief is uniform after one slot",
                params.r()
            ),
        })
        .collect();
    Ok(VerifyReport {
        points: grid.points.clone(),
        checks,
        findings,
        degeneracies,
    })
}

fn ladder_checks(grid: &Grid) -> Result<Vec<CheckResult>> {
    let mut closed = Tracker::new("ladder closed form vs series", LADDER_TOL);
    let mut recurrence = Tracker::new("ladder recurrence vs series", LADDER_TOL);
    let mut pmf_sum = Tracker::new("AoII pmf sums to one", PMF_SUM_TOL);
    let mut pmf_mean = Tracker::new("AoII pmf mean vs series", LADDER_TOL);
    let mut increment = Tracker::new("ladder increment vs series difference", LADDER_TOL);
    let mut increasing = Tracker::new("ladder strictly increasing", 0.0);
    let mut balance = Tracker::new("threshold chain balance residual", BALANCE_TOL);
    for (i, params) in grid.points.iter().enumerate() {
        let len = grid.ladder_len;
        let ladder = MaoiiLadder::new(*params, len + 1);
        let mut prev = 0.0;
        for j in 0..=len + 1 {
            let series = maoii_value_series(params, j);
            if j >= 1 && j <= len {
                closed.record((maoii_value_closed(params, j)? - series).abs(), || {
                    at(i, "j", j)
                });
                recurrence.record((ladder.value(j) - series).abs(), || at(i, "j", j));
            }
            if j <= len {
                let pmf = aoii_pmf(params, j);
                pmf_sum.record((pmf.iter().sum::<f64>() - 1.0).abs(), || at(i, "j", j));
                let mean: f64 = pmf.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
                pmf_mean.record((mean - series).abs(), || at(i, "j", j));
            }
            if j >= 2 {
                let inc = maoii_increment(params, j - 1);
                increment.record((series - prev - inc).abs(), || at(i, "j", j - 1));
                increasing.record(if inc > 0.0 { 0.0 } else { f64::INFINITY }, || {
                    at(i, "j", j - 1)
                });
            }
            prev = series;
        }
        for &n in &BALANCE_THRESHOLDS {
            let rho = params.rho();
            let len = series_terms_needed(rho, n, Some(1.0), 1e-16, DEFAULT_SERIES_CAP)?.max(n + 1);
            balance.record(balance_residual(rho, n, len), || at(i, "n", n));
        }
    }
    Ok(vec![
        closed.check(),
        recurrence.check(),
        pmf_sum.check(),
        pmf_mean.check(),
        increment.check(),
        increasing.check(),
        balance.check(),
    ])
}

fn average_checks(grid: &Grid, findings: &mut Vec<Finding>) -> Result<Vec<CheckResult>> {
    let mut aoi = Tracker::new("average AoI closed form vs series", AVERAGE_TOL);
    let mut maoii = Tracker::new("average MAoII closed form vs series", AVERAGE_TOL);
    let mut active = Tracker::new("average active time closed form vs series", AVERAGE_TOL);
    let mut uncorrected = Tracker::new("uncorrected average MAoII vs series", AVERAGE_TOL);
    let mut scaled = Tracker::new("increment with an N r factor vs series", LADDER_TOL);
    for (i, params) in grid.points.iter().enumerate() {
        let rho = params.rho();
        for n in 1..=grid.avg_n_max {
            let series_aoi = avg_penalty_series(params, n, Metric::Aoi, ORACLE_SERIES_TOL)?;
            aoi.record(rel(avg_aoi(rho, n), series_aoi), || at(i, "n", n));
            let series_b = avg_penalty_series(params, n, Metric::Maoii, ORACLE_SERIES_TOL)?;
            maoii.record(rel(avg_maoii_closed(params, n)?, series_b), || {
                at(i, "n", n)
            });
            uncorrected.record(rel(avg_maoii_uncorrected(params, n)?, series_b), || {
                at(i, "n", n)
            });
            let series_d = avg_active_time_series(rho, n, ORACLE_SERIES_TOL)?;
            active.record((avg_active_time(rho, n) - series_d).abs(), || at(i, "n", n));
        }
        for j in 1..=grid.ladder_len.min(50) {
            let diff = maoii_value_series(params, j + 1) - maoii_value_series(params, j);
            let with_factor =
                params.nr() * (powu(1.0 - params.r(), j + 1) - powu(params.drift(), j + 1));
            scaled.record((with_factor - diff).abs(), || at(i, "j", j));
        }
    }
    findings
        .push(uncorrected.finding(
            "uses 1 - (1-rho)(1-r) where 1 - (1-rho)(p-r) belongs; exact only at rho = 1",
        ));
    findings.push(
        scaled.finding("consecutive differences carry no N r factor; exact only when N r = 1"),
    );
    Ok(vec![aoi.check(), maoii.check(), active.check()])
}

fn index_checks(grid: &Grid, findings: &mut Vec<Finding>) -> Result<Vec<CheckResult>> {
    let mut aoi = Tracker::new("AoI index closed form vs oracle", INDEX_TOL);
    let mut maoii = Tracker::new("MAoII index closed form vs oracle", INDEX_TOL);
    let mut uncorrected = Tracker::new("uncorrected MAoII index vs oracle", INDEX_TOL);
    let mut mono_aoi = Tracker::new("AoI index nondecreasing", 0.0);
    let mut mono_maoii = Tracker::new("MAoII index nondecreasing", 0.0);
    for (i, params) in grid.points.iter().enumerate() {
        for (metric, tracker) in [(Metric::Aoi, &mut aoi), (Metric::Maoii, &mut maoii)] {
            let oracle =
                IntersectionOracle::new(*params, metric, grid.index_n_max, ORACLE_SERIES_TOL)?;
            for n in 1..=grid.index_n_max {
                let reference = oracle.index(n)?;
                tracker.record(rel(whittle_closed(params, metric, n)?, reference), || {
                    at(i, "n", n)
                });
                if metric == Metric::Maoii {
                    uncorrected.record(
                        rel(whittle_maoii_uncorrected(params, n)?, reference),
                        || at(i, "n", n),
                    );
                }
            }
        }
        for (metric, tracker) in [
            (Metric::Aoi, &mut mono_aoi),
            (Metric::Maoii, &mut mono_maoii),
        ] {
            let w: Vec<f64> = (1..=grid.monotone_n_max + 1)
                .map(|n| whittle_closed(params, metric, n))
                .collect::<Result<_>>()?;
            for (k, pair) in w.windows(2).enumerate() {
                let drop = (pair[0] - pair[1]).max(0.0);
                tracker.record(drop, || at(i, "n", k as u32 + 1));
            }
        }
    }
    findings.push(
        uncorrected
            .finding("same denominator slip as the uncorrected average; exact only at rho = 1"),
    );
    Ok(vec![
        aoi.check(),
        maoii.check(),
        mono_aoi.check(),
        mono_maoii.check(),
    ])
}

fn mdp_checks(grid: &Grid) -> Result<Vec<CheckResult>> {
    let mut agree = Tracker::new("MDP bisection vs index table", grid.mdp_tol);
    let mut threshold = Tracker::new("optimal policy is a threshold", 0.0);
    let mut nested = Tracker::new("passive sets nested in the charge", 0.0);
    let search = WhittleSearch {
        tol_w: grid.mdp_tol,
        ..WhittleSearch::default()
    };
    for (i, params) in grid.points.iter().take(grid.mdp_points).enumerate() {
        for metric in [Metric::Aoi, Metric::Maoii] {
            let table = WhittleTable::validated(*params, metric, grid.mdp_n_max, 1e-6)?;
            for n in 1..=grid.mdp_n_max {
                let w = search.search(params, n, metric)?;
                agree.record((w - table.index(n)?).abs(), || {
                    format!("point {} {metric} n={n}", i + 1)
                });
            }
            let base = table.index(1)?;
            let charges: Vec<f64> = grid.scan_multipliers.iter().map(|m| m * base).collect();
            let scan = indexability_scan(params, metric, &charges, DEFAULT_J_MAX)?;
            let label = || format!("point {} {metric}", i + 1);
            threshold.record(if scan.threshold_structure { 0.0 } else { 1.0 }, label);
            nested.record(if scan.nested { 0.0 } else { 1.0 }, label);
        }
    }
    Ok(vec![agree.check(), threshold.check(), nested.check()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_parse_error() {
        assert!(matches!(
            parse_grid_str(r#"{"points": []}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(parse_grid_str("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn bad_point_is_validation_error() {
        let text = r#"{"points": [{"N": 3, "p": 0.5, "r": 0.3, "rho": 0.5}]}"#;
        assert!(matches!(parse_grid_str(text), Err(Error::Validation(_))));
    }

    #[test]
    fn small_grid_passes_and_flags_boundary() {
        let text = r#"{
            "points": [ {"N": 2, "r": 0.1, "rho": 0.5}, {"N": 2, "r": 0.5, "rho": 0.7} ],
            "ladder_len": 60, "avg_n_max": 10, "index_n_max": 10,
            "monotone_n_max": 50, "mdp_points": 1, "mdp_n_max": 3
        }"#;
        let report = verify(&parse_grid_str(text).unwrap()).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.degeneracies.len(), 1);
        assert_eq!(report.degeneracies[0].point, 2);
        let uncorrected = report
            .findings
            .iter()
            .find(|f| f.name.starts_with("uncorrected average"))
            .unwrap();
        assert!(uncorrected.max_deviation > 1e-3);
    }
}
