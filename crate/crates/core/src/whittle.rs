//! Whittle indices for the AoI and MAoII ladders.
//!
//! The index of ladder state `n` is the charge at which thresholds `n` and
//! `n + 1` cost the same in the single-source relaxed problem:
//!
//! ```text
//! W(n) = (m^(n+1) - m^n) / (d^n - d^(n+1))
//! ```
//!
//! with averages from [`crate::policy_eval`]. When this sequence increases in
//! `n`, it is the Whittle index. [`IntersectionOracle`] evaluates the ratio
//! with series averages; [`whittle_aoi`] and [`whittle_maoii`] are the closed
//! forms checked against it.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{AoiPenalty, MaoiiLadder, Metric};
use crate::policy_eval::{
    avg_active_time, avg_penalty_series_with, series_terms_needed, DEFAULT_SERIES_CAP,
};
use crate::source::{powu, SourceParams};

/// Default table length; lookups beyond it are ladder overflows.
pub const DEFAULT_TABLE_LEN: u32 = 1000;

/// Series tolerance used by the intersection oracle.
pub const ORACLE_SERIES_TOL: f64 = 1e-14;

const SATURATION_TOL: f64 = 1e-12;

/// `W(a^n) = n (n - 1) rho / 2 + n`.
pub fn whittle_aoi(rho: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    nf * (nf - 1.0) * rho / 2.0 + nf
}

/// Closed-form MAoII index, with `x = 1 - r`, `q = p - r = 1 - N r`:
///
/// ```text
/// W(b^n) = rho x^2/r^2 - rho q^2/(Nr)^2
///        + q^(n+2) (n rho + 1 + rho q/(Nr)) rho / (Nr (1 - (1-rho) q))
///        - x^(n+2) (n rho + 1 + rho x/r)  rho / (r (1 - (1-rho) x))
/// ```
///
/// As `n` grows this increases to [`whittle_maoii_limit`].
pub fn whittle_maoii(params: &SourceParams, n: u32) -> Result<f64> {
    let rho = params.rho();
    let q_factor = rho / (params.nr() * (1.0 - (1.0 - rho) * params.drift()));
    maoii_index(params, n, q_factor)
}

/// The MAoII index with the `q^(n+2)` bracket
/// `[1 - (1-rho)(1 + (N-1) r)] / [N r (1 - (1-rho)(1-r))]`, a common slip.
/// Agrees with [`whittle_maoii`] only when `rho = 1`; kept for comparison.
pub fn whittle_maoii_uncorrected(params: &SourceParams, n: u32) -> Result<f64> {
    let (rho, r) = (params.rho(), params.r());
    let big_n = f64::from(params.n_states());
    let q_factor = (1.0 - (1.0 - rho) * (1.0 + (big_n - 1.0) * r))
        / (params.nr() * (1.0 - (1.0 - rho) * (1.0 - r)));
    maoii_index(params, n, q_factor)
}

fn maoii_index(params: &SourceParams, n: u32, q_factor: f64) -> Result<f64> {
    let r = params.r();
    if r <= 0.0 {
        return Err(Error::DegenerateParams(format!(
            "MAoII index needs r > 0 (r = {r})"
        )));
    }
    let rho = params.rho();
    let nr = params.nr();
    let x = 1.0 - r;
    let q = params.drift();
    let base = f64::from(n) * rho + 1.0;
    let x_factor = rho / (r * (1.0 - (1.0 - rho) * x));
    let q_term = powu(q, n + 2) * (base + rho * q / nr) * q_factor;
    let x_term = powu(x, n + 2) * (base + rho * x / r) * x_factor;
    // constant first, vanishing tail second: keeps the rounded sequence monotone
    Ok(whittle_maoii_limit(params)? + (q_term - x_term))
}

/// `sup_n W(b^n) = rho ((1-r)^2/r^2 - (1-Nr)^2/(Nr)^2)`. Charges above this
/// make idling optimal in every state.
pub fn whittle_maoii_limit(params: &SourceParams) -> Result<f64> {
    let r = params.r();
    if r <= 0.0 {
        return Err(Error::DegenerateParams(format!(
            "MAoII index needs r > 0 (r = {r})"
        )));
    }
    let nr = params.nr();
    let x = 1.0 - r;
    let q = params.drift();
    Ok(params.rho() * (x * x / (r * r) - q * q / (nr * nr)))
}

/// Closed-form index of ladder state `n` for either metric.
pub fn whittle_closed(params: &SourceParams, metric: Metric, n: u32) -> Result<f64> {
    match metric {
        Metric::Aoi => Ok(whittle_aoi(params.rho(), n)),
        Metric::Maoii => whittle_maoii(params, n),
    }
}

/// Intersection ratio evaluated from series averages. Reuses one MAoII ladder
/// long enough for every `n <= n_max`.
#[derive(Debug, Clone)]
pub struct IntersectionOracle {
    params: SourceParams,
    metric: Metric,
    ladder: Option<MaoiiLadder>,
    n_max: u32,
    tol: f64,
}

impl IntersectionOracle {
    pub fn new(params: SourceParams, metric: Metric, n_max: u32, tol: f64) -> Result<Self> {
        let ladder = match metric {
            Metric::Aoi => None,
            Metric::Maoii => {
                let sup = crate::metrics::maoii_value_limit(&params)?;
                let len = series_terms_needed(
                    params.rho(),
                    n_max.saturating_add(1),
                    Some(sup),
                    tol,
                    DEFAULT_SERIES_CAP,
                )?;
                Some(MaoiiLadder::new(params, len))
            }
        };
        Ok(Self {
            params,
            metric,
            ladder,
            n_max,
            tol,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Series average `m^n`.
    pub fn average(&self, n: u32) -> Result<f64> {
        let rho = self.params.rho();
        match &self.ladder {
            None => avg_penalty_series_with(&AoiPenalty, rho, n, self.tol),
            Some(ladder) => avg_penalty_series_with(ladder, rho, n, self.tol),
        }
    }

    pub fn index(&self, n: u32) -> Result<f64> {
        if n > self.n_max {
            return Err(Error::Config(format!(
                "oracle built for n <= {}, asked for {n}",
                self.n_max
            )));
        }
        let rho = self.params.rho();
        let gain = self.average(n + 1)? - self.average(n)?;
        let saved = avg_active_time(rho, n) - avg_active_time(rho, n + 1);
        Ok(gain / saved)
    }
}

/// `(m^(n+1) - m^n) / (d^n - d^(n+1))` from series averages.
pub fn whittle_intersection_oracle(params: &SourceParams, n: u32, metric: Metric) -> Result<f64> {
    IntersectionOracle::new(*params, metric, n, ORACLE_SERIES_TOL)?.index(n)
}

/// Indices `W(1)..=W(n_max)` for one source class and metric.
#[derive(Debug, Clone, Serialize)]
pub struct WhittleTable {
    params: SourceParams,
    metric: Metric,
    indices: Vec<f64>,
    /// States where the closed form disagreed with the oracle and the oracle
    /// value was stored instead.
    substituted: Vec<u32>,
}

impl WhittleTable {
    /// Closed-form table; fails on the first decrease.
    pub fn build(params: SourceParams, metric: Metric, n_max: u32) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Config("table length must be >= 1".into()));
        }
        let indices = (1..=n_max)
            .map(|n| whittle_closed(&params, metric, n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(params, metric, indices, Vec::new())
    }

    /// Closed-form table cross-checked against the intersection oracle; any
    /// entry off by more than `rel_tol * max(1, |W|)` is replaced by the
    /// oracle value.
    pub fn validated(
        params: SourceParams,
        metric: Metric,
        n_max: u32,
        rel_tol: f64,
    ) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Config("table length must be >= 1".into()));
        }
        let oracle = IntersectionOracle::new(params, metric, n_max, ORACLE_SERIES_TOL)?;
        let mut indices = Vec::with_capacity(n_max as usize);
        let mut substituted = Vec::new();
        for n in 1..=n_max {
            let closed = whittle_closed(&params, metric, n)?;
            let reference = oracle.index(n)?;
            if (closed - reference).abs() > rel_tol * reference.abs().max(1.0) {
                substituted.push(n);
                indices.push(reference);
            } else {
                indices.push(closed);
            }
        }
        Self::from_indices(params, metric, indices, substituted)
    }

    fn from_indices(
        params: SourceParams,
        metric: Metric,
        indices: Vec<f64>,
        substituted: Vec<u32>,
    ) -> Result<Self> {
        if let Some(n) = first_decrease(&indices) {
            return Err(Error::MonotonicityViolation {
                n,
                prev: indices[n as usize - 1],
                next: indices[n as usize],
            });
        }
        Ok(Self {
            params,
            metric,
            indices,
            substituted,
        })
    }

    pub fn params(&self) -> &SourceParams {
        &self.params
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_max(&self) -> u32 {
        self.indices.len() as u32
    }

    pub fn indices(&self) -> &[f64] {
        &self.indices
    }

    pub fn substituted(&self) -> &[u32] {
        &self.substituted
    }

    /// `W(j)`; ladder indices past the table are an error.
    pub fn index(&self, j: u32) -> Result<f64> {
        if j == 0 || j > self.n_max() {
            return Err(Error::LadderOverflow {
                j,
                n_max: self.n_max(),
            });
        }
        Ok(self.indices[j as usize - 1])
    }

    /// Whether the table has reached its limit, so that lookups past the end
    /// may saturate: the last increment is below `1e-12 * max(1, |W|)`.
    pub fn saturates(&self) -> bool {
        match self.indices.as_slice() {
            [.., prev, last] => last - prev <= SATURATION_TOL * last.abs().max(1.0),
            _ => false,
        }
    }

    /// `W(min(j, n_max))`.
    pub fn index_saturating(&self, j: u32) -> f64 {
        let idx = (j.max(1) as usize).min(self.indices.len()) - 1;
        self.indices[idx]
    }
}

/// First `n` (1-based) with `W(n+1) < W(n)`.
pub fn first_decrease(indices: &[f64]) -> Option<u32> {
    indices
        .windows(2)
        .position(|w| w[1] < w[0])
        .map(|i| i as u32 + 1)
}

/// Writes `n,W_aoi,W_maoii` rows for `n = 1..=n_max`.
pub fn write_table_csv<W: Write>(params: &SourceParams, n_max: u32, out: W) -> Result<()> {
    let aoi = WhittleTable::build(*params, Metric::Aoi, n_max)?;
    let maoii = WhittleTable::build(*params, Metric::Maoii, n_max)?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["n", "W_aoi", "W_maoii"])?;
    for n in 1..=n_max {
        writer.write_record([
            n.to_string(),
            aoi.index(n)?.to_string(),
            maoii.index(n)?.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perfect_two_state() -> SourceParams {
        SourceParams::from_r(0.1, 2, 1.0).unwrap()
    }

    #[test]
    fn aoi_examples() {
        assert_eq!(whittle_aoi(0.3, 1), 1.0);
        assert_eq!(whittle_aoi(0.5, 2), 2.5);
        assert_eq!(whittle_aoi(1.0, 3), 6.0);
    }

    #[test]
    fn aoi_oracle_example() {
        let s = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let w = whittle_intersection_oracle(&s, 2, Metric::Aoi).unwrap();
        assert!((w - 2.5).abs() < 1e-10);
    }

    #[test]
    fn maoii_first_index() {
        let s = perfect_two_state();
        assert!((whittle_maoii(&s, 1).unwrap() - 0.17).abs() < 1e-12);
        let oracle = whittle_intersection_oracle(&s, 1, Metric::Maoii).unwrap();
        assert!((oracle - 0.17).abs() < 1e-12);
        // second state, from the series averages (b^1+b^2+b^3)/3 vs (b^1+b^2)/2
        let second = (0.857 / 3.0 - 0.185) / (0.5 - 1.0 / 3.0);
        assert!((whittle_maoii(&s, 2).unwrap() - second).abs() < 1e-12);
    }

    #[test]
    fn uncorrected_index_only_exact_for_perfect_channel() {
        let s = perfect_two_state();
        for n in 1..20 {
            let a = whittle_maoii(&s, n).unwrap();
            let b = whittle_maoii_uncorrected(&s, n).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        let lossy = SourceParams::from_r(0.1, 2, 0.3).unwrap();
        let a = whittle_maoii(&lossy, 1).unwrap();
        let b = whittle_maoii_uncorrected(&lossy, 1).unwrap();
        assert!((a - b).abs() > 0.1);
    }

    #[test]
    fn limit_bounds_table() {
        let s = SourceParams::from_r(0.3, 3, 0.3).unwrap();
        let lim = whittle_maoii_limit(&s).unwrap();
        let table = WhittleTable::build(s, Metric::Maoii, 1000).unwrap();
        assert!(table.indices().iter().all(|&w| w <= lim));
        assert!((table.index(1000).unwrap() - lim).abs() < 1e-12);
        assert!(table.saturates());
        let aoi = WhittleTable::build(s, Metric::Aoi, 1000).unwrap();
        assert!(!aoi.saturates());
    }

    #[test]
    fn build_table_examples() {
        let s = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let t = WhittleTable::build(s, Metric::Aoi, 3).unwrap();
        assert_eq!(t.indices(), &[1.0, 2.5, 4.5]);
        let m = WhittleTable::build(perfect_two_state(), Metric::Maoii, 2).unwrap();
        assert!((m.indices()[0] - 0.17).abs() < 1e-12);
        assert!(WhittleTable::build(s, Metric::Aoi, 0).is_err());
    }

    #[test]
    fn table_lookup_overflow() {
        let s = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let t = WhittleTable::build(s, Metric::Aoi, 3).unwrap();
        assert!(matches!(
            t.index(4),
            Err(Error::LadderOverflow { j: 4, n_max: 3 })
        ));
        assert_eq!(t.index_saturating(10), 4.5);
    }

    #[test]
    fn detects_decrease() {
        assert_eq!(first_decrease(&[1.0, 2.0, 2.0, 1.5, 3.0]), Some(3));
        assert_eq!(first_decrease(&[1.0, 1.0]), None);
    }

    #[test]
    fn validated_table_needs_no_substitution() {
        let s = SourceParams::from_r(0.05, 10, 0.4).unwrap();
        let t = WhittleTable::validated(s, Metric::Maoii, 200, 1e-6).unwrap();
        assert!(t.substituted().is_empty());
    }

    #[test]
    fn csv_export_layout() {
        let s = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let mut buf = Vec::new();
        write_table_csv(&s, 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,W_aoi,W_maoii"));
        assert!(lines.next().unwrap().starts_with("1,1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
