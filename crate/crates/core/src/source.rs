//! Source and channel parameters, and the monitor's belief that its estimate
//! is still correct.
//!
//! Each source is a symmetric Markov chain over `N` states: it stays put with
//! probability `p` and jumps to each specific other state with probability
//! `r`, so `p + (N - 1) r = 1`. Updates cross an i.i.d. erasure channel that
//! delivers with probability `rho`.
//!
//! After a successful delivery the belief restarts at `p`, and otherwise it
//! follows the affine map `pi -> p pi + r (1 - pi)`, whose fixed point is
//! `1/N`. Started from `pi^0 = 1`, the iterates form the deterministic
//! sequence
//!
//! ```text
//! pi^k = 1/N + (1 - 1/N) (p - r)^k
//! ```
//!
//! which every ladder quantity in [`crate::metrics`] is built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `p + (N - 1) r = 1` accepted at construction.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// One source/channel pair `(p, r, N, rho)`.
///
/// The stored `p` is always recomputed from `r` so that the chain constraint
/// holds to rounding precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceParams {
    p: f64,
    r: f64,
    n_states: u32,
    rho: f64,
}

impl SourceParams {
    /// Builds parameters from explicit `p` and `r`.
    pub fn new(p: f64, r: f64, n_states: u32, rho: f64) -> Result<Self> {
        Self::make(Some(p), Some(r), n_states, rho)
    }

    /// Derives `p = 1 - (N - 1) r`.
    pub fn from_r(r: f64, n_states: u32, rho: f64) -> Result<Self> {
        Self::make(None, Some(r), n_states, rho)
    }

    /// Derives `r = (1 - p) / (N - 1)`.
    pub fn from_p(p: f64, n_states: u32, rho: f64) -> Result<Self> {
        Self::make(Some(p), None, n_states, rho)
    }

    /// Validates a parameter tuple where either `p` or `r` may be omitted.
    pub fn make(p: Option<f64>, r: Option<f64>, n_states: u32, rho: f64) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::Range {
                name: "N",
                value: f64::from(n_states),
                expected: "N >= 2",
            });
        }
        check_unit("rho", rho)?;
        if rho == 0.0 {
            return Err(Error::Range {
                name: "rho",
                value: rho,
                expected: "0 < rho <= 1",
            });
        }
        let others = f64::from(n_states - 1);
        let r = match (p, r) {
            (Some(p), Some(r)) => {
                check_unit("p", p)?;
                check_unit("r", r)?;
                let sum = p + others * r;
                if (sum - 1.0).abs() > CONSTRAINT_TOL {
                    return Err(Error::ConstraintViolated {
                        sum,
                        tol: CONSTRAINT_TOL,
                    });
                }
                r
            }
            (None, Some(r)) => {
                check_unit("r", r)?;
                r
            }
            (Some(p), None) => {
                check_unit("p", p)?;
                (1.0 - p) / others
            }
            (None, None) => {
                return Err(Error::Config("one of p or r must be given".into()));
            }
        };
        if r * others > 1.0 + CONSTRAINT_TOL {
            return Err(Error::ConstraintViolated {
                sum: r * others,
                tol: CONSTRAINT_TOL,
            });
        }
        let p = (1.0 - others * r).max(0.0);
        if p < r {
            return Err(Error::RegimeViolated { p, r });
        }
        Ok(Self {
            p,
            r,
            n_states,
            rho,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_states(&self) -> u32 {
        self.n_states
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `p - r`, the contraction factor of the belief map (equals `1 - N r`).
    pub fn drift(&self) -> f64 {
        self.p - self.r
    }

    /// `N r`, which also equals `1 + r - p`.
    pub fn nr(&self) -> f64 {
        f64::from(self.n_states) * self.r
    }

    /// True on the `p = r` boundary (uniform chain).
    pub fn is_uniform(&self) -> bool {
        (self.p - self.r).abs() <= CONSTRAINT_TOL
    }
}

impl<'de> Deserialize<'de> for SourceParams {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            p: Option<f64>,
            r: Option<f64>,
            #[serde(alias = "N")]
            n_states: u32,
            rho: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        SourceParams::make(raw.p, raw.r, raw.n_states, raw.rho).map_err(serde::de::Error::custom)
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Range {
            name,
            value,
            expected: "a probability in [0, 1]",
        })
    }
}

/// Probability that the monitor's estimate equals the true source state.
///
/// Any value in `[0, 1]` is accepted; trajectories that start from a fresh
/// delivery stay inside `[1/N, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Belief(f64);

impl Belief {
    pub fn new(pi: f64) -> Result<Self> {
        check_unit("pi", pi)?;
        Ok(Self(pi))
    }

    /// Belief right after a sample is taken (certainty).
    pub fn certain() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// One-slot belief update. `updated` means scheduled and delivered.
pub fn belief_update(params: &SourceParams, pi: Belief, updated: bool) -> Belief {
    if updated {
        Belief(params.p)
    } else {
        Belief(pi.0 * params.p + params.r * (1.0 - pi.0))
    }
}

/// Closed form of `pi^k`.
pub fn pi_k(params: &SourceParams, k: u32) -> f64 {
    let inv_n = 1.0 / f64::from(params.n_states);
    inv_n + (1.0 - inv_n) * powu(params.drift(), k)
}

/// `pi^k` by iterating `pi^k = r + (p - r) pi^{k-1}` from `pi^0 = 1`.
pub fn pi_k_recursive(params: &SourceParams, k: u32) -> f64 {
    pi_sequence(params, k as usize).pop().unwrap_or(1.0)
}

/// `[pi^0, pi^1, ..., pi^len]` by recurrence.
pub fn pi_sequence(params: &SourceParams, len: usize) -> Vec<f64> {
    let mut seq = Vec::with_capacity(len + 1);
    let mut pi = 1.0;
    seq.push(pi);
    for _ in 0..len {
        pi = params.r + params.drift() * pi;
        seq.push(pi);
    }
    seq
}

/// `x^k` for a nonnegative integer exponent of any size.
pub(crate) fn powu(x: f64, k: u32) -> f64 {
    match i32::try_from(k) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(f64::from(k)),
    }
}
