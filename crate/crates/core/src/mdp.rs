//! Average-cost solver for the single-source relaxed problem.
//!
//! With a charge `W` per transmission, each ladder state `j` pays `m^j` per
//! slot, and the Bellman equation reads
//!
//! ```text
//! theta + V(j) = min { m^j + V(j+1),
//!                      m^j + W + rho V(1) + (1 - rho) V(j+1) }
//! ```
//!
//! States are truncated at `J` with a saturating self-loop. The solver runs
//! relative value iteration on the aperiodic transform `tau I + (1 - tau) P`
//! (same gain, bias and policies) because threshold chains on a perfect
//! channel are periodic. Ties between the two actions resolve to idle.
//!
//! Nothing here uses the closed forms from [`crate::policy_eval`] or
//! [`crate::whittle`]; the point of this module is to check them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{MaoiiLadder, Metric, Penalty};
use crate::source::SourceParams;

pub const DEFAULT_J_MAX: u32 = 1000;
pub const DEFAULT_RVI_TOL: f64 = 1e-9;
pub const DEFAULT_ITER_CAP: usize = 1_000_000;
const APERIODICITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Idle,
    Transmit,
}

/// Optimal action pattern summarized as a single cut. `Never` (idle in every
/// state) orders above every finite threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Threshold {
    At(u32),
    Never,
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Threshold::At(n) => write!(f, "{n}"),
            Threshold::Never => f.write_str("never"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DualMdpSpec {
    pub params: SourceParams,
    pub metric: Metric,
    /// Lagrange charge per transmission.
    pub charge: f64,
    pub j_max: u32,
    pub tol: f64,
    pub iter_cap: usize,
}

impl DualMdpSpec {
    pub fn new(params: SourceParams, metric: Metric, charge: f64) -> Self {
        Self {
            params,
            metric,
            charge,
            j_max: DEFAULT_J_MAX,
            tol: DEFAULT_RVI_TOL,
            iter_cap: DEFAULT_ITER_CAP,
        }
    }

    pub fn with_j_max(mut self, j_max: u32) -> Self {
        self.j_max = j_max;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.j_max < 2 {
            return Err(Error::Config(format!(
                "J_max must be >= 2, got {}",
                self.j_max
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!(
                "tolerance must be > 0, got {}",
                self.tol
            )));
        }
        if !(self.charge.is_finite() && self.charge >= 0.0) {
            return Err(Error::Config(format!(
                "charge must be >= 0, got {}",
                self.charge
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    /// Optimal average cost `theta`.
    pub gain: f64,
    /// Differential cost `V(j)` for `j = 1..=J` (index 0 is state 1, pinned to 0).
    pub values: Vec<f64>,
    pub actions: Vec<Action>,
    pub iterations: usize,
    /// Largest `|min_a Q(j, a) - theta - V(j)|`.
    pub residual: f64,
}

impl DualSolution {
    pub fn threshold(&self) -> Result<Threshold> {
        extract_threshold(&self.actions)
    }

    pub fn action(&self, j: u32) -> Action {
        let idx = (j.max(1) as usize).min(self.actions.len()) - 1;
        self.actions[idx]
    }
}

/// Per-state costs and one-step dynamics of the truncated chain.
struct Model {
    costs: Vec<f64>,
    rho: f64,
    charge: f64,
}

impl Model {
    fn new(spec: &DualMdpSpec) -> Result<Self> {
        let costs = match spec.metric {
            Metric::Aoi => (1..=spec.j_max).map(f64::from).collect(),
            Metric::Maoii => {
                let ladder = MaoiiLadder::new(spec.params, spec.j_max);
                (1..=spec.j_max).map(|j| ladder.value(j)).collect()
            }
        };
        Ok(Self {
            costs,
            rho: spec.params.rho(),
            charge: spec.charge,
        })
    }

    fn len(&self) -> usize {
        self.costs.len()
    }

    #[inline]
    fn q_values(&self, values: &[f64], s: usize) -> (f64, f64) {
        let next = (s + 1).min(self.len() - 1);
        let idle = self.costs[s] + values[next];
        let transmit =
            self.costs[s] + self.charge + self.rho * values[0] + (1.0 - self.rho) * values[next];
        (idle, transmit)
    }

    /// Applies the Bellman operator; returns `(min, max)` of `T V - V`.
    fn sweep(&self, values: &[f64], out: &mut [f64]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..self.len() {
            let (idle, transmit) = self.q_values(values, s);
            let best = idle.min(transmit);
            let diff = best - values[s];
            lo = lo.min(diff);
            hi = hi.max(diff);
            out[s] = best;
        }
        (lo, hi)
    }

    fn actions(&self, values: &[f64]) -> Vec<Action> {
        (0..self.len())
            .map(|s| {
                let (idle, transmit) = self.q_values(values, s);
                if idle <= transmit {
                    Action::Idle
                } else {
                    Action::Transmit
                }
            })
            .collect()
    }
}

pub fn relative_value_iteration(spec: &DualMdpSpec) -> Result<DualSolution> {
    relative_value_iteration_from(spec, None)
}

/// Relative value iteration, optionally warm-started from a previous value
/// table of the same length.
pub fn relative_value_iteration_from(
    spec: &DualMdpSpec,
    warm: Option<&[f64]>,
) -> Result<DualSolution> {
    spec.validate()?;
    let model = Model::new(spec)?;
    let len = model.len();
    let mut values = match warm {
        Some(v) if v.len() == len => v.to_vec(),
        _ => vec![0.0; len],
    };
    let mut image = vec![0.0; len];
    let mut span = f64::INFINITY;
    let mut iterations = 0;
    while iterations < spec.iter_cap {
        iterations += 1;
        let (lo, hi) = model.sweep(&values, &mut image);
        span = hi - lo;
        if span < spec.tol {
            break;
        }
        for (v, t) in values.iter_mut().zip(&image) {
            *v = APERIODICITY * *v + (1.0 - APERIODICITY) * t;
        }
        let reference = values[0];
        values.iter_mut().for_each(|v| *v -= reference);
    }
    if span >= spec.tol {
        return Err(Error::NotConverged { iterations, span });
    }
    let (lo, hi) = model.sweep(&values, &mut image);
    let gain = 0.5 * (lo + hi);
    let residual = (hi - gain).max(gain - lo);
    let actions = model.actions(&values);
    Ok(DualSolution {
        gain,
        values,
        actions,
        iterations,
        residual,
    })
}

/// Reads a single idle-then-transmit cut off an action pattern.
pub fn extract_threshold(actions: &[Action]) -> Result<Threshold> {
    let Some(first) = actions.iter().position(|&a| a == Action::Transmit) else {
        return Ok(Threshold::Never);
    };
    if let Some(offset) = actions[first..].iter().position(|&a| a == Action::Idle) {
        return Err(Error::NotThreshold((first + offset) as u32 + 1));
    }
    Ok(Threshold::At(first as u32 + 1))
}

fn check_truncation(threshold: Threshold, j_max: u32) -> Result<Threshold> {
    match threshold {
        Threshold::At(n) if n > j_max / 2 => Err(Error::TruncationTooShort {
            threshold: n,
            j_max,
        }),
        t => Ok(t),
    }
}

/// Bisection over the charge for the smallest `W` that makes a given state
/// passive.
#[derive(Debug, Clone, Copy)]
pub struct WhittleSearch {
    pub j_max: u32,
    pub tol_w: f64,
    pub rvi_tol: f64,
    pub max_doublings: u32,
}

impl Default for WhittleSearch {
    fn default() -> Self {
        Self {
            j_max: DEFAULT_J_MAX,
            tol_w: 1e-3,
            rvi_tol: DEFAULT_RVI_TOL,
            max_doublings: 60,
        }
    }
}

impl WhittleSearch {
    pub fn search(&self, params: &SourceParams, n: u32, metric: Metric) -> Result<f64> {
        if n == 0 || n > self.j_max / 2 {
            return Err(Error::Config(format!(
                "state {n} must lie in 1..={}",
                self.j_max / 2
            )));
        }
        let mut warm: Option<Vec<f64>> = None;
        let mut passive = |charge: f64| -> Result<bool> {
            let spec = DualMdpSpec {
                params: *params,
                metric,
                charge,
                j_max: self.j_max,
                tol: self.rvi_tol,
                iter_cap: DEFAULT_ITER_CAP,
            };
            let sol = relative_value_iteration_from(&spec, warm.as_deref())?;
            check_truncation(sol.threshold()?, self.j_max)?;
            let idle = sol.action(n) == Action::Idle;
            warm = Some(sol.values);
            Ok(idle)
        };

        if passive(0.0)? {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut doublings = 0;
        while !passive(hi)? {
            doublings += 1;
            if doublings > self.max_doublings {
                return Err(Error::BracketFailure { n, upper: hi });
            }
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > self.tol_w {
            let mid = 0.5 * (lo + hi);
            if passive(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Whittle index of state `n` by bisection on the solver, default settings.
pub fn whittle_search(params: &SourceParams, n: u32, metric: Metric, tol_w: f64) -> Result<f64> {
    WhittleSearch {
        tol_w,
        ..WhittleSearch::default()
    }
    .search(params, n, metric)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub charge: f64,
    /// `None` when the optimal actions were not a single cut.
    pub threshold: Option<Threshold>,
    pub gain: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexabilityReport {
    pub metric: Metric,
    pub points: Vec<ScanPoint>,
    /// Every point had threshold structure.
    pub threshold_structure: bool,
    /// Thresholds (hence passive sets) never shrink as the charge grows.
    pub nested: bool,
}

impl IndexabilityReport {
    pub fn passed(&self) -> bool {
        self.threshold_structure && self.nested
    }
}

/// Solves the relaxed problem across an ascending charge grid and checks that
/// the passive sets are nested.
pub fn indexability_scan(
    params: &SourceParams,
    metric: Metric,
    charges: &[f64],
    j_max: u32,
) -> Result<IndexabilityReport> {
    if charges.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("charge grid must be sorted ascending".into()));
    }
    let mut warm: Option<Vec<f64>> = None;
    let mut points = Vec::with_capacity(charges.len());
    for &charge in charges {
        let spec = DualMdpSpec::new(*params, metric, charge).with_j_max(j_max);
        let sol = relative_value_iteration_from(&spec, warm.as_deref())?;
        let threshold = match sol.threshold() {
            Ok(t) => Some(check_truncation(t, j_max)?),
            Err(Error::NotThreshold(_)) => None,
            Err(e) => return Err(e),
        };
        points.push(ScanPoint {
            charge,
            threshold,
            gain: sol.gain,
        });
        warm = Some(sol.values);
    }
    let threshold_structure = points.iter().all(|p| p.threshold.is_some());
    let nested = points
        .windows(2)
        .all(|w| match (w[0].threshold, w[1].threshold) {
            (Some(a), Some(b)) => a <= b,
            _ => false,
        });
    Ok(IndexabilityReport {
        metric,
        points,
        threshold_structure,
        nested,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{Idle as I, Transmit as T};

    fn perfect_two_state() -> SourceParams {
        SourceParams::from_r(0.1, 2, 1.0).unwrap()
    }

    #[test]
    fn extract_threshold_patterns() {
        assert_eq!(extract_threshold(&[T, T, T]).unwrap(), Threshold::At(1));
        assert_eq!(extract_threshold(&[I, I, T, T]).unwrap(), Threshold::At(3));
        assert_eq!(extract_threshold(&[I, I, I]).unwrap(), Threshold::Never);
        assert!(matches!(
            extract_threshold(&[I, T, I, T]),
            Err(Error::NotThreshold(3))
        ));
        assert!(Threshold::At(900) < Threshold::Never);
    }

    #[test]
    fn free_transmission_is_always_used() {
        for metric in [Metric::Aoi, Metric::Maoii] {
            let s = SourceParams::from_r(0.3, 3, 0.5).unwrap();
            let spec = DualMdpSpec::new(s, metric, 0.0).with_j_max(200);
            let sol = relative_value_iteration(&spec).unwrap();
            assert_eq!(sol.threshold().unwrap(), Threshold::At(1));
            assert_eq!(sol.values[0], 0.0);
            assert!(sol.residual <= spec.tol);
        }
    }

    #[test]
    fn threshold_moves_past_first_index() {
        let s = perfect_two_state();
        let low = DualMdpSpec::new(s, Metric::Maoii, 0.1).with_j_max(200);
        assert_eq!(
            relative_value_iteration(&low).unwrap().threshold().unwrap(),
            Threshold::At(1)
        );
        let high = DualMdpSpec::new(s, Metric::Maoii, 0.25).with_j_max(200);
        assert_eq!(
            relative_value_iteration(&high)
                .unwrap()
                .threshold()
                .unwrap(),
            Threshold::At(2)
        );
    }

    #[test]
    fn gain_below_first_index_matches_threshold_one() {
        // threshold 1 on a perfect channel: cost b^1 + W d^1 = 0.1 + W
        let s = perfect_two_state();
        let spec = DualMdpSpec::new(s, Metric::Maoii, 0.16).with_j_max(200);
        let sol = relative_value_iteration(&spec).unwrap();
        assert!((sol.gain - 0.26).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_spec() {
        let s = perfect_two_state();
        assert!(
            relative_value_iteration(&DualMdpSpec::new(s, Metric::Aoi, 1.0).with_j_max(1)).is_err()
        );
        assert!(relative_value_iteration(&DualMdpSpec::new(s, Metric::Aoi, -1.0)).is_err());
        assert!(
            relative_value_iteration(&DualMdpSpec::new(s, Metric::Aoi, 1.0).with_tol(0.0)).is_err()
        );
    }

    #[test]
    fn iteration_cap_is_reported() {
        let s = SourceParams::from_r(0.1, 2, 0.3).unwrap();
        let mut spec = DualMdpSpec::new(s, Metric::Aoi, 3.0).with_j_max(100);
        spec.iter_cap = 3;
        assert!(matches!(
            relative_value_iteration(&spec),
            Err(Error::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn search_finds_aoi_index() {
        let s = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let search = WhittleSearch {
            j_max: 200,
            ..WhittleSearch::default()
        };
        let w = search.search(&s, 2, Metric::Aoi).unwrap();
        assert!((w - 2.5).abs() < 1e-3);
    }

    #[test]
    fn search_finds_first_maoii_index() {
        let search = WhittleSearch {
            j_max: 200,
            ..WhittleSearch::default()
        };
        let w = search
            .search(&perfect_two_state(), 1, Metric::Maoii)
            .unwrap();
        assert!((w - 0.17).abs() < 1e-3);
    }

    #[test]
    fn scan_is_nested() {
        let s = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let report = indexability_scan(&s, Metric::Aoi, &[0.0, 1.0, 2.5, 4.5, 10.0], 200).unwrap();
        assert!(report.passed());
        assert_eq!(report.points[0].threshold, Some(Threshold::At(1)));
        assert!(indexability_scan(&s, Metric::Aoi, &[2.0, 1.0], 200).is_err());
    }

    #[test]
    fn huge_charge_never_transmits_maoii() {
        let s = SourceParams::from_r(0.3, 3, 1.0).unwrap();
        let spec = DualMdpSpec::new(s, Metric::Maoii, 24.0).with_j_max(200);
        let sol = relative_value_iteration(&spec).unwrap();
        assert_eq!(sol.threshold().unwrap(), Threshold::Never);
    }
}
