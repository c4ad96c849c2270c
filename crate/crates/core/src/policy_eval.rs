//! Steady state of a single source under a threshold policy.
//!
//! Under threshold `n` the ladder index climbs deterministically through
//! `1..n` and, from `n` on, is reset to 1 with probability `rho` each slot.
//! The stationary law is flat on `1..=n` and geometric above:
//!
//! ```text
//! u(j) = rho / (n rho + 1 - rho)                    1 <= j <= n
//! u(j) = (1 - rho)^(j - n) rho / (n rho + 1 - rho)  j >= n
//! ```
//!
//! The closed-form averages here are regression-tested against
//! [`avg_penalty_series`], which sums `u(j) m^j` directly and is treated as
//! authoritative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{AoiPenalty, MaoiiLadder, Metric, Penalty};
use crate::source::{powu, SourceParams};

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
pub const DEFAULT_SERIES_CAP: usize = 1_000_000;

/// Transmit iff the ladder index is at least `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ThresholdPolicy(u32);

impl ThresholdPolicy {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Range {
                name: "threshold",
                value: 0.0,
                expected: "n >= 1",
            });
        }
        Ok(Self(n))
    }

    pub fn threshold(self) -> u32 {
        self.0
    }

    pub fn transmits(self, j: u32) -> bool {
        j >= self.0
    }
}

fn occupancy_scale(rho: f64, n: u32) -> f64 {
    rho / (f64::from(n) * rho + 1.0 - rho)
}

/// `u^n(j)`. Both branches of the piecewise law apply at `j = n` and agree
/// there.
pub fn stationary_probability(rho: f64, n: u32, j: u32) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let scale = occupancy_scale(rho, n);
    if j <= n {
        scale
    } else {
        powu(1.0 - rho, j - n) * scale
    }
}

/// Stationary probability from the upper branch alone, defined for `j >= n`.
pub fn stationary_upper_branch(rho: f64, n: u32, j: u32) -> Option<f64> {
    (j >= n).then(|| powu(1.0 - rho, j - n) * occupancy_scale(rho, n))
}

/// `d^n = 1 / (n rho + 1 - rho)`.
pub fn avg_active_time(rho: f64, n: u32) -> f64 {
    1.0 / (f64::from(n) * rho + 1.0 - rho)
}

/// Average age of information under threshold `n`.
pub fn avg_aoi(rho: f64, n: u32) -> f64 {
    let m = f64::from(n) - 1.0;
    ((m * m + m) * rho * rho + 2.0 * rho * m + 2.0) / (2.0 * rho * (m * rho + 1.0))
}

/// Average MAoII under threshold `n`.
///
/// With `x = 1 - r` and `q = p - r = 1 - N r`, using
/// `b^j = [(N-1) - N x^(j+1) + q^(j+1)] / (N r)`:
///
/// ```text
/// b^n = rho/(n rho + 1 - rho) * [ n(N-1)/(Nr) - q^(n+2)/(Nr)^2 + x^(n+2)/r^2
///       + (1-rho) q^(n+2) / (Nr (1 - (1-rho) q))
///       - (1-rho) x^(n+2) / (r (1 - (1-rho) x)) + C ]
/// C = q^2/(Nr)^2 - x^2/r^2 + (N-1)(1-rho)/(Nr rho)
/// ```
pub fn avg_maoii_closed(params: &SourceParams, n: u32) -> Result<f64> {
    maoii_average(params, n, 1.0 - (1.0 - params.rho()) * params.drift())
}

/// The same average with `1 - (1-rho)(1-r)` in the denominator of the
/// `q^(n+2)` term. Exact only for `rho = 1`; kept for comparison.
pub fn avg_maoii_uncorrected(params: &SourceParams, n: u32) -> Result<f64> {
    maoii_average(params, n, 1.0 - (1.0 - params.rho()) * (1.0 - params.r()))
}

fn maoii_average(params: &SourceParams, n: u32, q_den: f64) -> Result<f64> {
    let (r, rho) = (params.r(), params.rho());
    if r <= 0.0 || rho <= 0.0 {
        return Err(Error::DegenerateParams(format!(
            "average MAoII needs r > 0 and rho > 0 (r = {r}, rho = {rho})"
        )));
    }
    let nr = params.nr();
    let big_n = f64::from(params.n_states());
    let x = 1.0 - r;
    let q = params.drift();
    let idle = 1.0 - rho;
    let x_den = 1.0 - idle * x;
    let nf = f64::from(n);
    let qn = powu(q, n + 2);
    let xn = powu(x, n + 2);
    let c = q * q / (nr * nr) - x * x / (r * r) + (big_n - 1.0) * idle / (nr * rho);
    let bracket =
        nf * (big_n - 1.0) / nr - qn / (nr * nr) + xn / (r * r) + idle * qn / (nr * q_den)
            - idle * xn / (r * x_den)
            + c;
    Ok(occupancy_scale(rho, n) * bracket)
}

/// Number of terms `J >= n` after which the tail of `sum u(j) m^j` is below
/// `tol`. `supremum` bounds the penalty; without one, `m^j <= j` is assumed.
pub fn series_terms_needed(
    rho: f64,
    n: u32,
    supremum: Option<f64>,
    tol: f64,
    cap: usize,
) -> Result<u32> {
    let cap_j = u32::try_from(cap).unwrap_or(u32::MAX);
    let mut j = n;
    loop {
        if tail_bound(rho, n, j, supremum) <= tol {
            return Ok(j);
        }
        if j >= cap_j {
            return Err(Error::NonConvergent { tol, cap });
        }
        j += 1;
    }
}

/// Bound on `sum_{j > last} u(j) m^j` for `last >= n`.
fn tail_bound(rho: f64, n: u32, last: u32, supremum: Option<f64>) -> f64 {
    let s = 1.0 - rho;
    if s == 0.0 {
        return 0.0;
    }
    let scale = occupancy_scale(rho, n);
    let decay = powu(s, last + 1 - n);
    match supremum {
        Some(sup) => sup * scale * decay / rho,
        // sum_{j >= m} j s^(j-n) = s^(m-n) (m - (m-1) s) / (1-s)^2, m = last + 1
        None => {
            let m = f64::from(last) + 1.0;
            scale * decay * (m - (m - 1.0) * s) / (rho * rho)
        }
    }
}

/// `sum_j u^n(j) m^j` truncated once the tail bound drops below `tol`.
pub fn avg_penalty_series(params: &SourceParams, n: u32, metric: Metric, tol: f64) -> Result<f64> {
    let rho = params.rho();
    match metric {
        Metric::Aoi => avg_penalty_series_with(&AoiPenalty, rho, n, tol),
        Metric::Maoii => {
            let sup = crate::metrics::maoii_value_limit(params)?;
            let len = series_terms_needed(rho, n, Some(sup), tol, DEFAULT_SERIES_CAP)?;
            let ladder = MaoiiLadder::new(*params, len);
            avg_penalty_series_with(&ladder, rho, n, tol)
        }
    }
}

/// Series average for an arbitrary penalty. A [`MaoiiLadder`] must be at least
/// as long as [`series_terms_needed`] reports, or this returns an error.
pub fn avg_penalty_series_with<P: Penalty + LadderExtent>(
    penalty: &P,
    rho: f64,
    n: u32,
    tol: f64,
) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!(
            "series tolerance must be > 0, got {tol}"
        )));
    }
    let last = series_terms_needed(rho, n, penalty.supremum(), tol, DEFAULT_SERIES_CAP)?;
    if let Some(len) = penalty.extent() {
        if len < last {
            return Err(Error::Config(format!(
                "ladder of length {len} is shorter than the {last} terms needed"
            )));
        }
    }
    let mut sum = NeumaierSum::default();
    for j in 1..=last {
        sum.add(stationary_probability(rho, n, j) * penalty.value(j));
    }
    Ok(sum.total())
}

/// `d^n` as the series `sum_{j >= n} u^n(j)`.
pub fn avg_active_time_series(rho: f64, n: u32, tol: f64) -> Result<f64> {
    let n = n.max(1);
    let last = series_terms_needed(rho, n, Some(1.0), tol, DEFAULT_SERIES_CAP)?;
    let mut sum = NeumaierSum::default();
    for j in n..=last {
        sum.add(stationary_probability(rho, n, j));
    }
    Ok(sum.total())
}

/// How far a penalty's values are exact (None = everywhere).
pub trait LadderExtent {
    fn extent(&self) -> Option<u32>;
}

impl LadderExtent for AoiPenalty {
    fn extent(&self) -> Option<u32> {
        None
    }
}

impl LadderExtent for MaoiiLadder {
    fn extent(&self) -> Option<u32> {
        Some(self.len())
    }
}

/// Largest full-balance residual `|u(j) - sum_i u(i) P(i -> j)|` of the
/// threshold chain truncated to states `1..=len`.
pub fn balance_residual(rho: f64, n: u32, len: u32) -> f64 {
    let u: Vec<f64> = (1..=len)
        .map(|j| stationary_probability(rho, n, j))
        .collect();
    let policy = ThresholdPolicy(n.max(1));
    let mut inflow_one = NeumaierSum::default();
    for (i, &ui) in u.iter().enumerate() {
        let state = i as u32 + 1;
        if policy.transmits(state) {
            inflow_one.add(rho * ui);
        }
    }
    let mut worst = (u[0] - inflow_one.total()).abs();
    for j in 2..=len as usize {
        let from = (j - 1) as u32;
        let carry = if policy.transmits(from) {
            1.0 - rho
        } else {
            1.0
        };
        worst = worst.max((u[j - 1] - carry * u[j - 2]).abs());
    }
    worst
}

/// Occupancy frequencies of ladder states `1..=len` over `slots` steps of a
/// simulated single-source threshold chain started at `j = 1`. Visits above
/// `len` are dropped, so the result may sum to less than one.
pub fn empirical_occupancy<R: rand::Rng + ?Sized>(
    rho: f64,
    n: u32,
    slots: u64,
    len: u32,
    rng: &mut R,
) -> Vec<f64> {
    let policy = ThresholdPolicy(n.max(1));
    let mut counts = vec![0u64; len as usize];
    let mut j = 1u32;
    for _ in 0..slots {
        if let Some(c) = counts.get_mut(j as usize - 1) {
            *c += 1;
        }
        let delivered = policy.transmits(j) && rng.gen::<f64>() < rho;
        j = if delivered { 1 } else { j.saturating_add(1) };
    }
    counts.iter().map(|&c| c as f64 / slots as f64).collect()
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_examples() {
        assert_eq!(stationary_probability(1.0, 1, 1), 1.0);
        assert_eq!(stationary_probability(1.0, 1, 2), 0.0);
        for j in 1..=3 {
            assert!((stationary_probability(0.5, 3, j) - 0.25).abs() < 1e-15);
        }
        assert!((stationary_probability(0.5, 3, 4) - 0.125).abs() < 1e-15);
        assert_eq!(
            stationary_upper_branch(0.5, 3, 3),
            Some(stationary_probability(0.5, 3, 3))
        );
        assert_eq!(stationary_upper_branch(0.5, 3, 2), None);
    }

    #[test]
    fn stationary_sums_to_one() {
        for &rho in &[0.3, 0.5, 0.9, 1.0] {
            for n in [1, 4, 17] {
                let total: f64 = (1..2000).map(|j| stationary_probability(rho, n, j)).sum();
                assert!((total - 1.0).abs() < 1e-12, "rho {rho} n {n}");
            }
        }
    }

    #[test]
    fn occupancy_matches_stationary_law() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let emp = empirical_occupancy(0.5, 3, 200_000, 40, &mut rng);
        let l1: f64 = (1..=40)
            .map(|j| (emp[j as usize - 1] - stationary_probability(0.5, 3, j)).abs())
            .sum();
        assert!(l1 < 0.02, "{l1}");
    }

    #[test]
    fn active_time_examples() {
        assert_eq!(avg_active_time(0.37, 1), 1.0);
        assert!((avg_active_time(0.5, 3) - 0.5).abs() < 1e-15);
        let tail: f64 = (3..400).map(|j| stationary_probability(0.5, 3, j)).sum();
        assert!((tail - 0.5).abs() < 1e-14);
        assert!(avg_active_time(0.5, 1_000_000) < 1e-5);
        for (rho, n) in [(0.3, 1), (0.5, 3), (0.9, 17), (1.0, 4)] {
            let series = avg_active_time_series(rho, n, 1e-14).unwrap();
            assert!((series - avg_active_time(rho, n)).abs() < 1e-12);
        }
    }

    #[test]
    fn aoi_examples() {
        assert!((avg_aoi(0.5, 1) - 2.0).abs() < 1e-14);
        assert!((avg_aoi(0.5, 2) - 7.0 / 3.0).abs() < 1e-14);
        assert!((avg_aoi(1.0, 3) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn maoii_examples() {
        let s = SourceParams::from_r(0.1, 2, 1.0).unwrap();
        assert!((avg_maoii_closed(&s, 1).unwrap() - 0.1).abs() < 1e-12);
        assert!((avg_maoii_closed(&s, 2).unwrap() - 0.185).abs() < 1e-12);
        assert!((avg_maoii_closed(&s, 3).unwrap() - 0.857 / 3.0).abs() < 1e-12);
        // the uncorrected expression is exact when every transmission succeeds
        assert!((avg_maoii_uncorrected(&s, 3).unwrap() - 0.857 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uncorrected_average_is_off_for_lossy_channels() {
        let s = SourceParams::from_r(0.05, 10, 0.3).unwrap();
        let series = avg_penalty_series(&s, 1, Metric::Maoii, 1e-13).unwrap();
        assert!((avg_maoii_closed(&s, 1).unwrap() - series).abs() < 1e-10);
        assert!((avg_maoii_uncorrected(&s, 1).unwrap() - series).abs() > 1e-2);
    }

    #[test]
    fn series_single_state_chain() {
        let s = SourceParams::from_r(0.1, 2, 1.0).unwrap();
        let v = avg_penalty_series(&s, 1, Metric::Maoii, 1e-12).unwrap();
        assert!((v - 0.1).abs() < 1e-14);
    }

    #[test]
    fn series_matches_aoi_closed_form() {
        let s = SourceParams::from_r(0.1, 2, 0.3).unwrap();
        for n in 1..=50 {
            let series = avg_penalty_series(&s, n, Metric::Aoi, 1e-12).unwrap();
            assert!((series - avg_aoi(0.3, n)).abs() < 1e-9, "n {n}");
        }
    }

    #[test]
    fn series_rejects_short_ladder_and_bad_tol() {
        let s = SourceParams::from_r(0.1, 2, 0.3).unwrap();
        let short = MaoiiLadder::new(s, 5);
        assert!(avg_penalty_series_with(&short, 0.3, 3, 1e-12).is_err());
        assert!(avg_penalty_series_with(&AoiPenalty, 0.3, 3, 0.0).is_err());
    }

    #[test]
    fn series_cap_reports_non_convergence() {
        assert!(matches!(
            series_terms_needed(1e-9, 1, Some(1.0), 1e-12, 1000),
            Err(Error::NonConvergent { .. })
        ));
    }

    #[test]
    fn balance_equations_hold() {
        for &rho in &[0.3, 0.7, 1.0] {
            for n in [1, 3, 10] {
                assert!(balance_residual(rho, n, n + 200) < 1e-12);
            }
        }
    }

    #[test]
    fn threshold_policy_actions() {
        let tp = ThresholdPolicy::new(3).unwrap();
        assert!(!tp.transmits(2));
        assert!(tp.transmits(3));
        assert!(ThresholdPolicy::new(0).is_err());
    }
}
