//! Penalty ladders for the two metrics.
//!
//! Both metrics are indexed by the ladder index `j = t - g(t)`, the number of
//! slots since the last sample was taken. For the age of information the
//! penalty is `a^j = j`. For the mean age of incorrect information it is the
//! expectation of the monitor's AoII given only `j`:
//!
//! ```text
//! b^j = sum_{k=0}^{j} k (1-p) (1-r)^(k-1) pi^(j-k)
//! ```
//!
//! where the AoII itself is distributed as
//! `P(A=0) = pi^j`, `P(A=k) = pi^(j-k) (1-p) (1-r)^(k-1)` for `1 <= k <= j`.
//!
//! Unlike `a^j`, the MAoII ladder saturates at `b^inf = (N-1)/(N r)`.
//! Consecutive differences are `b^(j+1) - b^j = (1-r)^(j+1) - (p-r)^(j+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{pi_sequence, powu, SourceParams};

/// Default ladder truncation.
pub const DEFAULT_LADDER_LEN: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Aoi,
    Maoii,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Aoi => f.write_str("aoi"),
            Metric::Maoii => f.write_str("maoii"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aoi" => Ok(Metric::Aoi),
            "maoii" => Ok(Metric::Maoii),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// A penalty indexed by the ladder index `j >= 1`.
pub trait Penalty {
    fn value(&self, j: u32) -> f64;

    /// Upper bound on every value, if one exists.
    fn supremum(&self) -> Option<f64>;
}

/// `a^j = j`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AoiPenalty;

impl Penalty for AoiPenalty {
    fn value(&self, j: u32) -> f64 {
        f64::from(j)
    }

    fn supremum(&self) -> Option<f64> {
        None
    }
}

/// Probability mass of the AoII over `{0, ..., j}` given ladder index `j`.
///
/// For `j = 0` (sample just taken at this slot) the AoII is zero surely.
pub fn aoii_pmf(params: &SourceParams, j: u32) -> Vec<f64> {
    let j = j as usize;
    let pi = pi_sequence(params, j);
    let miss = 1.0 - params.p();
    let stay_wrong = 1.0 - params.r();
    let mut pmf = Vec::with_capacity(j + 1);
    pmf.push(pi[j]);
    let mut tail = 1.0;
    for k in 1..=j {
        pmf.push(pi[j - k] * miss * tail);
        tail *= stay_wrong;
    }
    pmf
}

/// `b^j` by direct evaluation of the defining sum. `O(j)`.
pub fn maoii_value_series(params: &SourceParams, j: u32) -> f64 {
    let pi = pi_sequence(params, j as usize);
    let miss = 1.0 - params.p();
    let stay_wrong = 1.0 - params.r();
    let mut total = 0.0;
    let mut tail = 1.0;
    for k in 1..=j as usize {
        total += k as f64 * miss * tail * pi[j as usize - k];
        tail *= stay_wrong;
    }
    total
}

/// `b^j` in closed form (denominator `1 + r - p = N r`).
pub fn maoii_value_closed(params: &SourceParams, j: u32) -> Result<f64> {
    let nr = degenerate_nr(params)?;
    let n = f64::from(params.n_states());
    let x = 1.0 - params.r();
    let q = params.drift();
    let jf = f64::from(j);
    let xj = powu(x, j);
    let first = (n - 1.0) / nr * (1.0 - (jf + 1.0) * xj + jf * xj * x);
    let second = (powu(q, j + 1) - (jf + 1.0) * xj * q + jf * xj * x) / nr;
    Ok(first + second)
}

/// `b^inf = (1-r)/r - (1-N r)/(N r) = (N-1)/(N r)`.
pub fn maoii_value_limit(params: &SourceParams) -> Result<f64> {
    let nr = degenerate_nr(params)?;
    Ok((f64::from(params.n_states()) - 1.0) / nr)
}

/// `b^(j+1) - b^j` as found from the series.
pub fn maoii_increment(params: &SourceParams, j: u32) -> f64 {
    powu(1.0 - params.r(), j + 1) - powu(params.drift(), j + 1)
}

fn degenerate_nr(params: &SourceParams) -> Result<f64> {
    let nr = params.nr();
    if nr <= 0.0 {
        Err(Error::DegenerateParams(format!(
            "N r = {nr}; the MAoII ladder needs r > 0"
        )))
    } else {
        Ok(nr)
    }
}

/// Precomputed `b^1, ..., b^J`; lookups past `J` saturate at `b^J`.
#[derive(Debug, Clone)]
pub struct MaoiiLadder {
    params: SourceParams,
    values: Vec<f64>,
}

impl MaoiiLadder {
    /// Builds the ladder in `O(len)` using the belief recurrence inside the
    /// defining sum: with `a_k = k (1-p) (1-r)^(k-1)` and `A_j = sum a_k`,
    /// `b^j = a_j + r A_(j-1) + (p - r) b^(j-1)`.
    pub fn new(params: SourceParams, len: u32) -> Self {
        let len = len.max(1) as usize;
        let miss = 1.0 - params.p();
        let x = 1.0 - params.r();
        let q = params.drift();
        let mut values = Vec::with_capacity(len);
        let mut prev = 0.0;
        let mut cumulative = 0.0;
        let mut x_pow = 1.0;
        for k in 1..=len {
            let a_k = k as f64 * miss * x_pow;
            let b = a_k + params.r() * cumulative + q * prev;
            values.push(b);
            cumulative += a_k;
            prev = b;
            x_pow *= x;
        }
        Self { params, values }
    }

    pub fn params(&self) -> &SourceParams {
        &self.params
    }

    pub fn len(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `b^1..=b^J`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn state(&self, j: u32) -> MaoiiState {
        let j = j.max(1);
        MaoiiState {
            j,
            value: self.value(j),
        }
    }
}

impl Penalty for MaoiiLadder {
    fn value(&self, j: u32) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let idx = (j as usize).min(self.values.len()) - 1;
        self.values[idx]
    }

    fn supremum(&self) -> Option<f64> {
        maoii_value_limit(&self.params).ok()
    }
}

/// Age of information `a^j = j`, `j >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AoiState(u32);

impl AoiState {
    pub fn new(j: u32) -> Result<Self> {
        if j == 0 {
            return Err(Error::Range {
                name: "AoI",
                value: 0.0,
                expected: "j >= 1",
            });
        }
        Ok(Self(j))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// Resets to 1 on a delivered update, otherwise grows by one.
pub fn aoi_transition(state: AoiState, scheduled: bool, success: bool) -> AoiState {
    if scheduled && success {
        AoiState(1)
    } else {
        AoiState(state.0.saturating_add(1))
    }
}

/// MAoII state: ladder index plus its derived value `b^j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaoiiState {
    pub j: u32,
    pub value: f64,
}

/// A delivered update lands on `b^1 = 1 - p`, not zero: the source may move
/// during the delivery slot.
pub fn maoii_transition(
    ladder: &MaoiiLadder,
    state: MaoiiState,
    scheduled: bool,
    success: bool,
) -> MaoiiState {
    if scheduled && success {
        ladder.state(1)
    } else {
        ladder.state(state.j.saturating_add(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> SourceParams {
        SourceParams::new(0.9, 0.1, 2, 1.0).unwrap()
    }

    #[test]
    fn pmf_small_cases() {
        let s = two_state();
        let p1 = aoii_pmf(&s, 1);
        assert!((p1[0] - 0.9).abs() < 1e-15 && (p1[1] - 0.1).abs() < 1e-15);
        let p2 = aoii_pmf(&s, 2);
        for (got, want) in p2.iter().zip([0.82, 0.09, 0.09]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(aoii_pmf(&s, 0), vec![1.0]);
    }

    #[test]
    fn series_small_cases() {
        let s = two_state();
        assert_eq!(maoii_value_series(&s, 0), 0.0);
        assert!((maoii_value_series(&s, 1) - 0.1).abs() < 1e-15);
        assert!((maoii_value_series(&s, 2) - 0.27).abs() < 1e-15);
        assert!((maoii_value_series(&s, 3) - 0.487).abs() < 1e-15);
    }

    #[test]
    fn closed_form_small_cases() {
        let s = two_state();
        assert!((maoii_value_closed(&s, 1).unwrap() - 0.1).abs() < 1e-12);
        assert!((maoii_value_closed(&s, 2).unwrap() - 0.27).abs() < 1e-12);
        assert!((maoii_value_limit(&s).unwrap() - 5.0).abs() < 1e-12);
        assert!((maoii_value_closed(&s, 2000).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_rejects_r_zero() {
        let s = SourceParams::new(1.0, 0.0, 3, 0.5).unwrap();
        assert!(matches!(
            maoii_value_closed(&s, 3),
            Err(Error::DegenerateParams(_))
        ));
    }

    #[test]
    fn increments_lack_nr_factor() {
        let s = two_state();
        let diff = maoii_value_series(&s, 2) - maoii_value_series(&s, 1);
        assert!((diff - 0.17).abs() < 1e-14);
        assert!((maoii_increment(&s, 1) - 0.17).abs() < 1e-14);
    }

    #[test]
    fn ladder_matches_series() {
        let s = SourceParams::from_r(0.05, 10, 0.4).unwrap();
        let ladder = MaoiiLadder::new(s, 300);
        for j in 1..=300 {
            let direct = maoii_value_series(&s, j);
            assert!((ladder.value(j) - direct).abs() < 1e-12, "j = {j}");
        }
        assert_eq!(ladder.value(0), 0.0);
        assert_eq!(ladder.value(10_000), ladder.value(300));
    }

    #[test]
    fn aoi_transitions() {
        let s = AoiState::new(7).unwrap();
        assert_eq!(aoi_transition(s, true, true).get(), 1);
        assert_eq!(aoi_transition(s, true, false).get(), 8);
        assert_eq!(
            aoi_transition(AoiState::new(1).unwrap(), false, false).get(),
            2
        );
        assert!(AoiState::new(0).is_err());
    }

    #[test]
    fn maoii_transitions() {
        let s = two_state();
        let ladder = MaoiiLadder::new(s, 50);
        let nine = ladder.state(9);
        let reset = maoii_transition(&ladder, nine, true, true);
        assert_eq!(reset.j, 1);
        assert!((reset.value - 0.1).abs() < 1e-15);
        assert_eq!(maoii_transition(&ladder, nine, false, false).j, 10);
        assert_eq!(maoii_transition(&ladder, ladder.state(1), true, false).j, 2);
    }
}
