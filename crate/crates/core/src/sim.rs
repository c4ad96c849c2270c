//! Multi-source Monte Carlo simulation of index scheduling.
//!
//! Each slot the scheduler ranks every source by its index and hands the `M`
//! channels to the top `M` (ties to the lower user id). The scheduler sees
//! only a [`SchedulerView`]: class, ladder index and slots since last being
//! scheduled. The true source state and the empirical AoII stay on the
//! simulator side.
//!
//! Two dynamics are available. `Reduced` evolves the empirical AoII directly
//! as a Markov chain; `GroundTruth` simulates the source state and the
//! monitor's estimate and derives the AoII from them. Both give the same law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::source::SourceParams;
use crate::whittle::{WhittleTable, DEFAULT_TABLE_LEN};

/// Relative tolerance used when validating index tables against the oracle.
const TABLE_VALIDATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyId {
    WipMaoii,
    WipAoi,
    RoundRobin,
    Random,
}

impl PolicyId {
    pub const ALL: [PolicyId; 4] = [
        PolicyId::WipMaoii,
        PolicyId::WipAoi,
        PolicyId::RoundRobin,
        PolicyId::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::WipMaoii => "wip-maoii",
            PolicyId::WipAoi => "wip-aoi",
            PolicyId::RoundRobin => "round-robin",
            PolicyId::Random => "random",
        }
    }

    fn metric(self) -> Option<Metric> {
        match self {
            PolicyId::WipMaoii => Some(Metric::Maoii),
            PolicyId::WipAoi => Some(Metric::Aoi),
            PolicyId::RoundRobin | PolicyId::Random => None,
        }
    }
}

impl std::fmt::Display for PolicyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    #[default]
    Reduced,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub params: SourceParams,
    pub count: usize,
}

/// Channel budget per slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channels {
    /// `M = round(alpha N_u)`, at least 1 when `alpha > 0`.
    Fraction(f64),
    Count(usize),
}

impl Channels {
    pub fn resolve(self, n_users: usize) -> usize {
        match self {
            Channels::Count(m) => m,
            Channels::Fraction(alpha) => {
                let m = (alpha * n_users as f64).round() as usize;
                if alpha > 0.0 && n_users >= 1 {
                    m.max(1)
                } else {
                    m
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub classes: Vec<ClassSpec>,
    pub channels: Channels,
    pub horizon: u64,
    pub warmup: u64,
    pub replications: usize,
    pub seed: u64,
    pub policy: PolicyId,
    pub dynamics: Dynamics,
    /// Length of the per-class index tables.
    pub table_len: u32,
}

impl SimConfig {
    /// Defaults: `alpha = 0.2`, warmup 10% of the horizon, 20 replications.
    pub fn new(classes: Vec<ClassSpec>, policy: PolicyId, horizon: u64, seed: u64) -> Self {
        Self {
            classes,
            channels: Channels::Fraction(0.2),
            horizon,
            warmup: horizon / 10,
            replications: 20,
            seed,
            policy,
            dynamics: Dynamics::Reduced,
            table_len: DEFAULT_TABLE_LEN,
        }
    }

    pub fn n_users(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    pub fn channels_per_slot(&self) -> usize {
        self.channels.resolve(self.n_users())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users() == 0 {
            return Err(Error::Config("no users configured".into()));
        }
        if let Channels::Fraction(alpha) = self.channels {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
            }
        }
        if self.horizon <= self.warmup {
            return Err(Error::Config(format!(
                "horizon {} must exceed warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.table_len == 0 {
            return Err(Error::Config("table length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Simulator-side state of one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRuntime {
    pub class_id: usize,
    pub params: SourceParams,
    /// Slots since the last sample the monitor received, `j >= 1`.
    pub ladder_index: u32,
    /// Ground-truth AoII.
    pub emp_age: u64,
    /// True source state (ground-truth mode).
    pub truth: u32,
    /// Monitor's estimate (ground-truth mode).
    pub estimate: u32,
    pub since_scheduled: u64,
}

impl UserRuntime {
    pub fn new(class_id: usize, params: SourceParams) -> Self {
        Self {
            class_id,
            params,
            ladder_index: 1,
            emp_age: 0,
            truth: 0,
            estimate: 0,
            since_scheduled: 0,
        }
    }

    pub fn view(&self) -> SchedulerView {
        SchedulerView {
            class_id: self.class_id,
            ladder_index: self.ladder_index,
            since_scheduled: self.since_scheduled,
        }
    }
}

/// Everything the scheduler is allowed to observe about a source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerView {
    pub class_id: usize,
    pub ladder_index: u32,
    pub since_scheduled: u64,
}

fn advance_bookkeeping(next: &mut UserRuntime, scheduled: bool, delivered: bool) {
    next.ladder_index = if delivered {
        1
    } else {
        next.ladder_index.saturating_add(1)
    };
    next.since_scheduled = if scheduled {
        0
    } else {
        next.since_scheduled + 1
    };
}

/// One slot of the reduced AoII chain.
///
/// From `m = 0`, or after a delivery, the next age is 0 with probability `p`
/// and 1 otherwise. Without a delivery a nonzero age drops to 0 with
/// probability `r` and grows by one otherwise.
pub fn empirical_step<R: Rng + ?Sized>(
    user: &UserRuntime,
    scheduled: bool,
    rng: &mut R,
) -> UserRuntime {
    let params = &user.params;
    let delivered = scheduled && rng.gen::<f64>() < params.rho();
    let u: f64 = rng.gen();
    let mut next = *user;
    next.emp_age = if user.emp_age == 0 || delivered {
        u64::from(u >= params.p())
    } else if u < params.r() {
        0
    } else {
        user.emp_age + 1
    };
    advance_bookkeeping(&mut next, scheduled, delivered);
    next
}

/// One slot with an explicit source state and estimate. A delivery at slot
/// `t` sets the estimate to the state at `t`; the source then moves.
pub fn ground_truth_step<R: Rng + ?Sized>(
    user: &UserRuntime,
    scheduled: bool,
    rng: &mut R,
) -> UserRuntime {
    let params = &user.params;
    let delivered = scheduled && rng.gen::<f64>() < params.rho();
    let mut next = *user;
    if delivered {
        next.estimate = user.truth;
    }
    if rng.gen::<f64>() >= params.p() {
        let other = rng.gen_range(0..params.n_states() - 1);
        next.truth = if other >= user.truth {
            other + 1
        } else {
            other
        };
    }
    next.emp_age = if next.truth == next.estimate {
        0
    } else if user.truth == next.estimate {
        1
    } else {
        user.emp_age + 1
    };
    advance_bookkeeping(&mut next, scheduled, delivered);
    next
}

/// Ids of the `min(m, len)` largest values, ties to the lower id, ascending.
pub fn select_top_m(values: &[f64], m: usize) -> Vec<usize> {
    let mut order = Vec::new();
    select_top_m_into(values, m, &mut order);
    order
}

fn select_top_m_into(values: &[f64], m: usize, order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..values.len());
    let m = m.min(values.len());
    if m < values.len() && m > 0 {
        order.select_nth_unstable_by(m - 1, |&a, &b| {
            values[b].total_cmp(&values[a]).then(a.cmp(&b))
        });
    }
    order.truncate(m);
    order.sort_unstable();
}

/// Per-class Whittle tables for one metric.
#[derive(Debug, Clone)]
pub struct IndexTables {
    tables: Vec<WhittleTable>,
}

impl IndexTables {
    /// Oracle-validated tables for each class.
    pub fn build(classes: &[ClassSpec], metric: Metric, len: u32) -> Result<Self> {
        let tables = classes
            .iter()
            .map(|c| WhittleTable::validated(c.params, metric, len, TABLE_VALIDATION_TOL))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }

    pub fn get(&self, class_id: usize) -> Option<&WhittleTable> {
        self.tables.get(class_id)
    }
}

/// Scheduling priority of one source. `saturated` marks a lookup past the end
/// of a converged index table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priority {
    pub value: f64,
    pub saturated: bool,
}

/// Scheduling priority of one source under a policy.
pub fn policy_index<R: Rng + ?Sized>(
    policy: PolicyId,
    view: &SchedulerView,
    tables: Option<&IndexTables>,
    rng: &mut R,
) -> Result<Priority> {
    let exact = |value| Priority {
        value,
        saturated: false,
    };
    match policy {
        PolicyId::WipMaoii | PolicyId::WipAoi => {
            let table = tables.and_then(|t| t.get(view.class_id)).ok_or_else(|| {
                Error::Config(format!("no index table for class {}", view.class_id))
            })?;
            match table.index(view.ladder_index) {
                Ok(w) => Ok(exact(w)),
                Err(overflow) if !table.saturates() => Err(overflow),
                Err(_) => Ok(Priority {
                    value: table.index_saturating(view.ladder_index),
                    saturated: true,
                }),
            }
        }
        PolicyId::RoundRobin => Ok(exact(view.since_scheduled as f64)),
        PolicyId::Random => Ok(exact(rng.gen())),
    }
}

/// Reusable per-slot buffers.
#[derive(Debug, Default)]
struct SlotScratch {
    values: Vec<f64>,
    order: Vec<usize>,
    scheduled: Vec<bool>,
    saturated: u64,
}

/// Picks this slot's transmitters. Reads only [`SchedulerView`]s.
fn schedule_slot<R: Rng + ?Sized>(
    policy: PolicyId,
    views: impl Iterator<Item = SchedulerView>,
    tables: Option<&IndexTables>,
    channels: usize,
    rng: &mut R,
    scratch: &mut SlotScratch,
) -> Result<usize> {
    scratch.values.clear();
    for view in views {
        let priority = policy_index(policy, &view, tables, rng)?;
        scratch.saturated += u64::from(priority.saturated);
        scratch.values.push(priority.value);
    }
    select_top_m_into(&scratch.values, channels, &mut scratch.order);
    scratch.scheduled.clear();
    scratch.scheduled.resize(scratch.values.len(), false);
    for &i in &scratch.order {
        scratch.scheduled[i] = true;
    }
    Ok(scratch.order.len())
}

/// The scheduling decision for one slot, exposed for inspection.
pub fn schedule<R: Rng + ?Sized>(
    policy: PolicyId,
    users: &[UserRuntime],
    tables: Option<&IndexTables>,
    channels: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut scratch = SlotScratch::default();
    schedule_slot(
        policy,
        users.iter().map(UserRuntime::view),
        tables,
        channels,
        rng,
        &mut scratch,
    )?;
    Ok(scratch.order)
}

/// Number of transmitters per slot, over all slots and replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleAudit {
    pub slots: u64,
    pub expected_per_slot: usize,
    pub min_scheduled: usize,
    pub max_scheduled: usize,
    /// Index lookups that ran past a (converged) table.
    pub saturated_lookups: u64,
}

impl ScheduleAudit {
    fn new(expected_per_slot: usize) -> Self {
        Self {
            slots: 0,
            expected_per_slot,
            min_scheduled: usize::MAX,
            max_scheduled: 0,
            saturated_lookups: 0,
        }
    }

    fn record(&mut self, count: usize) {
        self.slots += 1;
        self.min_scheduled = self.min_scheduled.min(count);
        self.max_scheduled = self.max_scheduled.max(count);
    }

    fn merge(self, other: Self) -> Self {
        Self {
            slots: self.slots + other.slots,
            expected_per_slot: self.expected_per_slot,
            min_scheduled: self.min_scheduled.min(other.min_scheduled),
            max_scheduled: self.max_scheduled.max(other.max_scheduled),
            saturated_lookups: self.saturated_lookups + other.saturated_lookups,
        }
    }

    /// Every slot used exactly `min(M, N_u)` channels.
    pub fn exact(&self) -> bool {
        self.slots > 0
            && self.min_scheduled == self.expected_per_slot
            && self.max_scheduled == self.expected_per_slot
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub policy: PolicyId,
    pub dynamics: Dynamics,
    pub n_users: usize,
    pub channels: usize,
    /// Time- and user-averaged empirical AoII, averaged over replications.
    pub mean_cost: f64,
    /// Half-width of the 95% Student-t interval across replications (NaN for
    /// a single replication).
    pub ci95: f64,
    pub replication_means: Vec<f64>,
    /// Mean empirical AoII per class, averaged over replications.
    pub class_means: Vec<f64>,
    pub audit: ScheduleAudit,
}

impl SimResult {
    pub fn interval(&self) -> (f64, f64) {
        (self.mean_cost - self.ci95, self.mean_cost + self.ci95)
    }
}

struct ReplicationOutcome {
    mean: f64,
    class_means: Vec<f64>,
    audit: ScheduleAudit,
}

/// Runs every replication of `config` and aggregates.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let tables = config
        .policy
        .metric()
        .map(|metric| IndexTables::build(&config.classes, metric, config.table_len))
        .transpose()?;
    let outcomes = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, tables.as_ref(), rep as u64))
        .collect::<Result<Vec<_>>>()?;

    let replication_means: Vec<f64> = outcomes.iter().map(|o| o.mean).collect();
    let (mean_cost, ci95) = mean_and_ci95(&replication_means);
    let reps = outcomes.len() as f64;
    let class_means = (0..config.classes.len())
        .map(|c| outcomes.iter().map(|o| o.class_means[c]).sum::<f64>() / reps)
        .collect();
    let audit = outcomes
        .iter()
        .map(|o| o.audit)
        .reduce(ScheduleAudit::merge)
        .expect("at least one replication");
    Ok(SimResult {
        policy: config.policy,
        dynamics: config.dynamics,
        n_users: config.n_users(),
        channels: config.channels_per_slot(),
        mean_cost,
        ci95,
        replication_means,
        class_means,
        audit,
    })
}

fn run_replication(
    config: &SimConfig,
    tables: Option<&IndexTables>,
    rep: u64,
) -> Result<ReplicationOutcome> {
    let mut dynamics_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dynamics_rng.set_stream(2 * rep);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(config.seed);
    policy_rng.set_stream(2 * rep + 1);

    let mut users: Vec<UserRuntime> = config
        .classes
        .iter()
        .enumerate()
        .flat_map(|(class_id, c)| (0..c.count).map(move |_| UserRuntime::new(class_id, c.params)))
        .collect();
    let channels = config.channels_per_slot();
    let mut audit = ScheduleAudit::new(channels.min(users.len()));
    let mut class_totals = vec![0u128; config.classes.len()];
    let mut scratch = SlotScratch::default();
    let step = match config.dynamics {
        Dynamics::Reduced => empirical_step::<ChaCha8Rng>,
        Dynamics::GroundTruth => ground_truth_step::<ChaCha8Rng>,
    };

    for t in 0..config.horizon {
        let count = schedule_slot(
            config.policy,
            users.iter().map(UserRuntime::view),
            tables,
            channels,
            &mut policy_rng,
            &mut scratch,
        )?;
        audit.record(count);
        let measure = t >= config.warmup;
        for (user, &scheduled) in users.iter_mut().zip(&scratch.scheduled) {
            if measure {
                class_totals[user.class_id] += u128::from(user.emp_age);
            }
            *user = step(user, scheduled, &mut dynamics_rng);
        }
    }

    audit.saturated_lookups = scratch.saturated;
    let slots = (config.horizon - config.warmup) as f64;
    let total: u128 = class_totals.iter().sum();
    let mean = total as f64 / (slots * users.len() as f64);
    let class_means = class_totals
        .iter()
        .zip(&config.classes)
        .map(|(&sum, c)| {
            if c.count == 0 {
                0.0
            } else {
                sum as f64 / (slots * c.count as f64)
            }
        })
        .collect();
    Ok(ReplicationOutcome {
        mean,
        class_means,
        audit,
    })
}

/// Sample mean and 95% Student-t half-width.
pub fn mean_and_ci95(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(p_r_n: (f64, u32), rho: f64) -> UserRuntime {
        UserRuntime::new(0, SourceParams::from_r(p_r_n.0, p_r_n.1, rho).unwrap())
    }

    #[test]
    fn top_m_examples() {
        assert_eq!(select_top_m(&[3.0, 1.0, 3.0, 2.0], 2), vec![0, 2]);
        assert!(select_top_m(&[3.0, 1.0], 0).is_empty());
        assert_eq!(select_top_m(&[3.0, 1.0, 2.0], 5), vec![0, 1, 2]);
        assert_eq!(select_top_m(&[1.0, 1.0, 1.0, 1.0], 3), vec![0, 1, 2]);
    }

    #[test]
    fn channel_rounding() {
        assert_eq!(Channels::Fraction(0.2).resolve(5), 1);
        assert_eq!(Channels::Fraction(0.2).resolve(12), 2);
        assert_eq!(Channels::Fraction(0.2).resolve(2), 1);
        assert_eq!(Channels::Fraction(0.0).resolve(10), 0);
        assert_eq!(Channels::Count(3).resolve(10), 3);
    }

    #[test]
    fn policy_index_lookups() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let aoi_class = ClassSpec {
            params: SourceParams::from_r(0.1, 2, 0.5).unwrap(),
            count: 1,
        };
        let aoi = IndexTables::build(&[aoi_class], Metric::Aoi, 10).unwrap();
        let view = SchedulerView {
            class_id: 0,
            ladder_index: 2,
            since_scheduled: 4,
        };
        let value = |p: Result<Priority>| p.unwrap().value;
        assert_eq!(
            value(policy_index(PolicyId::WipAoi, &view, Some(&aoi), &mut rng)),
            2.5
        );
        assert_eq!(
            value(policy_index(PolicyId::RoundRobin, &view, None, &mut rng)),
            4.0
        );

        let perfect = ClassSpec {
            params: SourceParams::from_r(0.1, 2, 1.0).unwrap(),
            count: 1,
        };
        let maoii = IndexTables::build(&[perfect], Metric::Maoii, 10).unwrap();
        let first = SchedulerView {
            ladder_index: 1,
            ..view
        };
        let w = value(policy_index(
            PolicyId::WipMaoii,
            &first,
            Some(&maoii),
            &mut rng,
        ));
        assert!((w - 0.17).abs() < 1e-12);

        // a short, still-growing table cannot saturate
        let far = SchedulerView {
            ladder_index: 11,
            ..view
        };
        assert!(matches!(
            policy_index(PolicyId::WipMaoii, &far, Some(&maoii), &mut rng),
            Err(Error::LadderOverflow { j: 11, n_max: 10 })
        ));
        assert!(matches!(
            policy_index(PolicyId::WipAoi, &far, Some(&aoi), &mut rng),
            Err(Error::LadderOverflow { .. })
        ));

        // a converged MAoII table saturates and flags it
        let long = IndexTables::build(&[perfect], Metric::Maoii, 1000).unwrap();
        let beyond = SchedulerView {
            ladder_index: 5000,
            ..view
        };
        let p = policy_index(PolicyId::WipMaoii, &beyond, Some(&long), &mut rng).unwrap();
        assert!(p.saturated);
        assert_eq!(p.value, long.get(0).unwrap().index(1000).unwrap());
    }

    #[test]
    fn round_robin_is_periodic() {
        let params = SourceParams::from_r(0.1, 2, 0.5).unwrap();
        let mut users: Vec<_> = (0..4).map(|_| UserRuntime::new(0, params)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut picks = Vec::new();
        for _ in 0..8 {
            let chosen = schedule(PolicyId::RoundRobin, &users, None, 1, &mut rng).unwrap();
            picks.push(chosen[0]);
            for (i, u) in users.iter_mut().enumerate() {
                *u = empirical_step(u, chosen.contains(&i), &mut rng);
            }
        }
        assert_eq!(picks, vec![0, 1, 2, 3, 0, 1, 2, 3]);
    }

    #[test]
    fn empirical_step_branch_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 200_000;
        // m = 0, p = 0.55
        let fresh = user((0.05, 10), 0.4);
        let zeros = (0..draws)
            .filter(|_| empirical_step(&fresh, false, &mut rng).emp_age == 0)
            .count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.55).abs() < 4.0 * (0.55f64 * 0.45 / draws as f64).sqrt());

        // m = 4, idle, r = 0.3
        let mut stale = user((0.3, 3), 0.4);
        stale.emp_age = 4;
        let mut counts = [0usize; 2];
        for _ in 0..draws {
            match empirical_step(&stale, false, &mut rng).emp_age {
                0 => counts[0] += 1,
                5 => counts[1] += 1,
                other => panic!("unexpected age {other}"),
            }
        }
        let freq = counts[0] as f64 / draws as f64;
        assert!((freq - 0.3).abs() < 4.0 * (0.3f64 * 0.7 / draws as f64).sqrt());
    }

    #[test]
    fn ground_truth_delivery_copies_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut u = user((0.1, 8), 1.0);
        u.truth = 5;
        u.estimate = 2;
        u.emp_age = 3;
        let next = ground_truth_step(&u, true, &mut rng);
        assert_eq!(next.estimate, 5);
        assert_eq!(next.ladder_index, 1);
        assert!(next.emp_age <= 1);
        assert_eq!(next.emp_age == 0, next.truth == next.estimate);
    }

    #[test]
    fn ground_truth_idle_return_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u = user((0.3, 3), 0.4);
        u.truth = 1;
        u.estimate = 0;
        u.emp_age = 2;
        let draws = 200_000;
        let back = (0..draws)
            .filter(|_| ground_truth_step(&u, false, &mut rng).emp_age == 0)
            .count();
        let freq = back as f64 / draws as f64;
        assert!((freq - 0.3).abs() < 4.0 * (0.21f64 / draws as f64).sqrt());
    }

    #[test]
    fn ci_of_constant_samples_is_zero() {
        let (m, h) = mean_and_ci95(&[2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(h, 0.0);
        assert!(mean_and_ci95(&[1.0]).1.is_nan());
    }

    #[test]
    fn config_validation() {
        let class = ClassSpec {
            params: SourceParams::from_r(0.1, 2, 0.5).unwrap(),
            count: 3,
        };
        let mut cfg = SimConfig::new(vec![class], PolicyId::WipAoi, 100, 1);
        assert!(cfg.validate().is_ok());
        cfg.warmup = 100;
        assert!(cfg.validate().is_err());
        cfg.warmup = 10;
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyId::ALL {
            assert_eq!(p.as_str().parse::<PolicyId>().unwrap(), p);
        }
        assert!("fifo".parse::<PolicyId>().is_err());
    }
}
