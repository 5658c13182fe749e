//! Combinatorial successive elimination over sampled configurations.
//!
//! A run proceeds in rounds. While at least `k` configurations survive,
//! each round shuffles them into groups of `k` (a trailing smaller group
//! passes through unevaluated) and keeps the top `f_rho(k)` of every
//! group; once fewer than `k` survive, the whole remainder is eliminated
//! as a single group per round until one configuration is left. Round `r`
//! gives each evaluated group `b_r = floor(B / (P_r * R))` fresh
//! instances, where `P_r` counts that round's evaluated groups and `R` the
//! total rounds, so the run can never consume more than `B` instances.
//!
//! The round count and per-round group counts are obtained by simulating
//! the attrition trajectory exactly. The closed-form compositions of
//! `g(x) = f_rho(k) * floor(x/k) + x mod k` (reported as `r1`) and of
//! `f_rho` from `k` agree with the simulation whenever the trajectory
//! lands on `k` exactly, and bound it from above otherwise.

use serde::{Deserialize, Serialize};

use crate::domain::{rank_with_ties, ConfigId, InstanceId, SeededRng};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::statistics::{StatisticKind, StatisticState};
use crate::trace::TraceLog;

/// Per-group survivor count: `floor(x / 2^rho)`, clamped to at least one
/// survivor for groups of two or more.
///
/// `rho = 1` halves a group, `rho = log2(x)` keeps only the winner, and
/// `rho` near zero eliminates a single member.
pub fn f_rho(x: usize, rho: f64) -> Result<usize> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rho must be a positive finite number, got {rho}"
        )));
    }
    // The guard absorbs float noise when x / 2^rho is an exact integer,
    // e.g. rho = log2((e + k - 1) / e) makes the quotient rational.
    let kept = (x as f64 / 2f64.powf(rho) + 1e-9).floor() as usize;
    if x >= 2 {
        Ok(kept.max(1))
    } else {
        Ok(kept)
    }
}

/// Round plan for one elimination run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CseSchedule {
    pub rho: f64,
    pub k: usize,
    pub n: usize,
    /// Rounds spent above `k` survivors (iterations of `g` until the
    /// count first reaches `k` or below).
    pub r1: usize,
    /// Remaining rounds down to a single survivor.
    pub r2: usize,
    pub rounds: usize,
    /// Survivor count entering each round.
    pub sizes: Vec<usize>,
    /// Evaluated groups per round, `P_r`; trailing pass-through groups do
    /// not count.
    pub partitions: Vec<usize>,
    /// Instances per evaluated group per round, `b_r`.
    pub budgets: Vec<usize>,
}

impl CseSchedule {
    /// Instances reserved for round `r` (zero-based): `P_r * b_r`.
    pub fn instance_quota(&self, r: usize) -> usize {
        self.partitions[r] * self.budgets[r]
    }

    /// Total reserved instances, at most the budget by construction.
    pub fn total_instances(&self) -> usize {
        (0..self.rounds).map(|r| self.instance_quota(r)).sum()
    }

    pub fn max_partitions(&self) -> usize {
        self.partitions.iter().copied().max().unwrap_or(0)
    }
}

fn validate_shape_inputs(n: usize, k: usize, rho: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "n must be at least 2, got {n}"
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rho must be a positive finite number, got {rho}"
        )));
    }
    if rho > (k as f64).log2() + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "rho must not exceed log2(k) = {}, got {rho}",
            (k as f64).log2()
        )));
    }
    Ok(())
}

/// Attrition trajectory of the two elimination phases: survivor counts
/// and evaluated-group counts per round, plus the `g`-composition label
/// `r1`.
pub(crate) fn cse_shape(n: usize, k: usize, rho: f64) -> Result<(usize, Vec<usize>, Vec<usize>)> {
    validate_shape_inputs(n, k, rho)?;
    let fk = f_rho(k, rho)?;

    // r1 counts compositions of g until the survivor count first reaches
    // k or below.
    let g = |x: usize| fk * (x / k) + x % k;
    let mut r1 = 0usize;
    let mut v = n;
    while v > k {
        v = g(v);
        r1 += 1;
    }

    let mut sizes = Vec::new();
    let mut partitions = Vec::new();
    let mut v = n;
    while v >= k && v > 1 {
        sizes.push(v);
        partitions.push(v / k);
        v = g(v);
    }
    while v > 1 {
        sizes.push(v);
        partitions.push(1);
        v = f_rho(v, rho)?;
    }
    Ok((r1, sizes, partitions))
}

/// Compute the full round plan for eliminating `n` configurations down to
/// one within an instance budget.
pub fn cse_schedule(rho: f64, k: usize, n: usize, budget: usize) -> Result<CseSchedule> {
    let (r1, sizes, partitions) = cse_shape(n, k, rho)?;
    let rounds = sizes.len();
    let mut budgets = Vec::with_capacity(rounds);
    for (r, &p) in partitions.iter().enumerate() {
        let b = budget / (p * rounds);
        if b == 0 {
            return Err(Error::InsufficientBudget(format!(
                "round {} needs b_r = floor(B / (P_r * R)) >= 1, got B={budget}, P_r={p}, R={rounds}",
                r + 1
            )));
        }
        budgets.push(b);
    }
    Ok(CseSchedule {
        rho,
        k,
        n,
        r1,
        r2: rounds - r1,
        rounds,
        sizes,
        partitions,
        budgets,
    })
}

/// Shuffled split of the surviving configurations for one round.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    /// Full groups of exactly `k` members.
    pub groups: Vec<Vec<ConfigId>>,
    /// Trailing members left over when the count does not divide by `k`;
    /// they pass through the round unevaluated.
    pub passthrough: Vec<ConfigId>,
}

/// Shuffle `configs` and cut them into consecutive groups of `k`; a
/// trailing group of fewer than `k` becomes the pass-through remainder.
pub fn partition_configs(configs: &[ConfigId], k: usize, rng: &mut SeededRng) -> GroupPartition {
    debug_assert!(k >= 2);
    let mut shuffled = configs.to_vec();
    shuffle(&mut shuffled, rng);
    let full = shuffled.len() / k;
    let mut groups = Vec::with_capacity(full);
    for j in 0..full {
        groups.push(shuffled[j * k..(j + 1) * k].to_vec());
    }
    let passthrough = shuffled[full * k..].to_vec();
    GroupPartition {
        groups,
        passthrough,
    }
}

// Fisher-Yates on our own stream so the draw pattern is pinned down by
// this crate rather than by a rand implementation detail.
fn shuffle(items: &mut [ConfigId], rng: &mut SeededRng) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// One elimination decision: evaluate `group` on every instance of the
/// slice, then keep the `keep` best under the statistic.
#[derive(Debug, Clone)]
pub struct EliminationPlan<'a> {
    pub group: Vec<ConfigId>,
    pub keep: usize,
    pub instances: &'a [InstanceId],
}

/// Run the plan and return survivors in rank order.
///
/// Scores are computed from this call's evaluations only; a fresh
/// statistic state is created per call and discarded afterwards.
pub fn arm_elimination(
    plan: &EliminationPlan<'_>,
    oracle: &mut dyn Oracle,
    kind: StatisticKind,
    rng: &mut SeededRng,
    trace: &mut TraceLog,
    round: usize,
    partition: usize,
) -> Result<Vec<ConfigId>> {
    debug_assert!(plan.group.len() >= 2);
    debug_assert!(plan.keep >= 1 && plan.keep < plan.group.len());
    let mut state = StatisticState::new(oracle.timeout());
    for &instance in plan.instances {
        let outcome = oracle.evaluate_group(&plan.group, instance)?;
        state.update(&outcome);
        trace.group_eval(round, partition, &outcome);
    }
    let scores: Vec<(ConfigId, f64)> = plan
        .group
        .iter()
        .map(|&c| (c, state.score(c, kind)))
        .collect();
    let ranked = rank_with_ties(&scores, rng);
    let kept: Vec<ConfigId> = ranked[..plan.keep].to_vec();
    let dropped: Vec<usize> = ranked[plan.keep..].iter().map(|c| c.0).collect();
    let kept_raw: Vec<usize> = kept.iter().map(|c| c.0).collect();
    trace.elimination(round, partition, &kept_raw, &dropped);
    Ok(kept)
}

/// Result of one elimination run.
#[derive(Debug, Clone)]
pub struct CseOutcome {
    pub winner: ConfigId,
    pub schedule: CseSchedule,
    pub rounds_executed: usize,
    pub instances_consumed: usize,
}

/// Eliminate `configs` down to a single survivor within an instance
/// budget of `B = budget`.
///
/// `instances` is the allotment the run draws from; it must cover the
/// schedule's reservation, which is at most `budget` and usually below
/// it. Instances are consumed left to right in disjoint per-(round,
/// partition) slices. Group membership, tie-breaking, and the returned
/// winner are pure functions of `(configs, k, rho, budget, instances,
/// oracle content, rng seed)`.
pub fn run_cse(
    configs: &[ConfigId],
    k: usize,
    rho: f64,
    budget: usize,
    instances: &[InstanceId],
    oracle: &mut dyn Oracle,
    kind: StatisticKind,
    rng: &SeededRng,
    trace: &mut TraceLog,
) -> Result<CseOutcome> {
    let schedule = cse_schedule(rho, k, configs.len(), budget)?;
    if instances.len() < schedule.total_instances() {
        return Err(Error::InvalidParameter(format!(
            "the instance allotment holds {} but the schedule reserves {}",
            instances.len(),
            schedule.total_instances()
        )));
    }
    let mut active = configs.to_vec();
    let mut cursor = 0usize;

    for r in 0..schedule.rounds {
        debug_assert_eq!(active.len(), schedule.sizes[r]);
        let b = schedule.budgets[r];
        let mut next = Vec::with_capacity(active.len());
        if active.len() >= k {
            let mut shuffle_rng = rng.fork_with("cse-partition", &[r as u64]);
            let split = partition_configs(&active, k, &mut shuffle_rng);
            debug_assert_eq!(split.groups.len(), schedule.partitions[r]);
            next.extend_from_slice(&split.passthrough);
            for (j, group) in split.groups.into_iter().enumerate() {
                let keep = f_rho(group.len(), rho)?;
                let plan = EliminationPlan {
                    group,
                    keep,
                    instances: &instances[cursor..cursor + b],
                };
                cursor += b;
                let mut elim_rng = rng.fork_with("cse-elim", &[r as u64, j as u64]);
                let kept =
                    arm_elimination(&plan, oracle, kind, &mut elim_rng, trace, r + 1, j + 1)?;
                next.extend(kept);
            }
        } else {
            let keep = f_rho(active.len(), rho)?;
            let plan = EliminationPlan {
                group: active.clone(),
                keep,
                instances: &instances[cursor..cursor + b],
            };
            cursor += b;
            let mut elim_rng = rng.fork_with("cse-elim", &[r as u64, 0]);
            let kept = arm_elimination(&plan, oracle, kind, &mut elim_rng, trace, r + 1, 1)?;
            next = kept;
        }
        debug_assert!(next.len() < active.len(), "attrition must be monotone");
        active = next;
    }

    debug_assert_eq!(active.len(), 1);
    Ok(CseOutcome {
        winner: active[0],
        rounds_executed: schedule.rounds,
        instances_consumed: cursor,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{MatrixOracle, RuntimeMatrix};

    #[test]
    fn f_rho_matches_hand_values() {
        assert_eq!(f_rho(8, 1.0).unwrap(), 4);
        assert_eq!(f_rho(8, 3.0).unwrap(), 1);
        assert_eq!(f_rho(8, 0.1).unwrap(), 7);
        assert_eq!(f_rho(3, 1.0).unwrap(), 1);
        // Clamp: a group of two must keep its winner even for large rho.
        assert_eq!(f_rho(2, 1.0).unwrap(), 1);
        // Below two members there is nothing to protect.
        assert_eq!(f_rho(1, 1.0).unwrap(), 0);
        assert!(f_rho(8, 0.0).is_err());
        assert!(f_rho(8, -1.0).is_err());
    }

    #[test]
    fn schedule_regression_sixteen_configs() {
        let s = cse_schedule(1.0, 4, 16, 120).unwrap();
        assert_eq!(s.r1, 2);
        assert_eq!(s.r2, 2);
        assert_eq!(s.rounds, 4);
        assert_eq!(s.sizes, vec![16, 8, 4, 2]);
        assert_eq!(s.partitions, vec![4, 2, 1, 1]);
        assert_eq!(s.budgets, vec![7, 15, 30, 30]);
        assert_eq!(s.total_instances(), 118);
    }

    #[test]
    fn schedule_two_configs_single_round() {
        let s = cse_schedule(1.0, 2, 2, 3).unwrap();
        assert_eq!(s.r1, 0);
        assert_eq!(s.r2, 1);
        assert_eq!(s.partitions, vec![1]);
        assert_eq!(s.budgets, vec![3]);
    }

    #[test]
    fn schedule_winner_takes_all_when_k_equals_n() {
        let s = cse_schedule(3.0, 8, 8, 64).unwrap();
        assert_eq!(s.r1, 0);
        assert_eq!(s.rounds, 1);
        assert_eq!(s.partitions, vec![1]);
    }

    #[test]
    fn schedule_rejects_budget_below_round_minimum() {
        // n=16, k=4, rho=1 has R=4 and max P_r=4, so B < 16 cannot give
        // every round's groups one instance each.
        let err = cse_schedule(1.0, 4, 16, 15).unwrap_err();
        assert!(matches!(err, Error::InsufficientBudget(_)));
    }

    #[test]
    fn schedule_rejects_rho_above_log2_k() {
        assert!(cse_schedule(2.1, 4, 16, 120).is_err());
        assert!(cse_schedule(2.0, 4, 16, 120).is_ok());
    }

    #[test]
    fn partition_flags_trailing_remainder() {
        let configs: Vec<ConfigId> = (0..10).map(ConfigId).collect();
        let mut rng = SeededRng::new(5);
        let split = partition_configs(&configs, 4, &mut rng);
        assert_eq!(split.groups.len(), 2);
        assert!(split.groups.iter().all(|g| g.len() == 4));
        assert_eq!(split.passthrough.len(), 2);
        let mut all: Vec<usize> = split
            .groups
            .iter()
            .flatten()
            .chain(split.passthrough.iter())
            .map(|c| c.0)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn partition_exact_multiple_has_no_remainder() {
        let configs: Vec<ConfigId> = (0..8).map(ConfigId).collect();
        let mut rng = SeededRng::new(5);
        let split = partition_configs(&configs, 4, &mut rng);
        assert_eq!(split.groups.len(), 2);
        assert!(split.passthrough.is_empty());
    }

    #[test]
    fn partition_below_k_is_all_passthrough() {
        let configs: Vec<ConfigId> = (0..3).map(ConfigId).collect();
        let mut rng = SeededRng::new(5);
        let split = partition_configs(&configs, 4, &mut rng);
        assert!(split.groups.is_empty());
        assert_eq!(split.passthrough.len(), 3);
    }

    /// Matrix where configuration 0 is fastest everywhere.
    fn dominant_matrix(n: usize, m: usize) -> RuntimeMatrix {
        let mut values = Vec::with_capacity(n * m);
        for c in 0..n {
            for i in 0..m {
                let v = if c == 0 {
                    1.0
                } else {
                    2.0 + ((c * 31 + i * 17) % 97) as f64 / 10.0
                };
                values.push(v);
            }
        }
        RuntimeMatrix::from_values(n, m, 900.0, values).unwrap()
    }

    #[test]
    fn dominant_arm_survives_every_seed() {
        let m = dominant_matrix(16, 120);
        let configs: Vec<ConfigId> = (0..16).map(ConfigId).collect();
        let instances: Vec<InstanceId> = (0..120).map(InstanceId).collect();
        for seed in 0..20 {
            let mut oracle = MatrixOracle::new(&m, seed);
            let mut trace = TraceLog::new();
            let out = run_cse(
                &configs,
                4,
                1.0,
                instances.len(),
                &instances,
                &mut oracle,
                StatisticKind::WinFrequency,
                &SeededRng::new(seed),
                &mut trace,
            )
            .unwrap();
            assert_eq!(out.winner, ConfigId(0));
            assert_eq!(out.rounds_executed, 4);
            assert_eq!(out.instances_consumed, 118);
        }
    }

    #[test]
    fn run_is_bit_identical_for_equal_seeds() {
        let m = dominant_matrix(10, 90);
        let configs: Vec<ConfigId> = (0..10).map(ConfigId).collect();
        let instances: Vec<InstanceId> = (0..90).map(InstanceId).collect();
        let run = |seed: u64| {
            let mut oracle = MatrixOracle::new(&m, seed);
            let mut trace = TraceLog::new();
            let out = run_cse(
                &configs,
                3,
                1.0,
                instances.len(),
                &instances,
                &mut oracle,
                StatisticKind::WinFrequency,
                &SeededRng::new(seed),
                &mut trace,
            )
            .unwrap();
            (out.winner, oracle.cpu_total(), trace.into_events().len())
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn elimination_all_timeouts_keeps_someone_via_tie_break() {
        let m = RuntimeMatrix::from_values(4, 6, 900.0, vec![900.0; 24]).unwrap();
        let instances: Vec<InstanceId> = (0..6).map(InstanceId).collect();
        let plan = EliminationPlan {
            group: (0..4).map(ConfigId).collect(),
            keep: 2,
            instances: &instances,
        };
        let mut oracle = MatrixOracle::new(&m, 3);
        let mut trace = TraceLog::new();
        let kept = arm_elimination(
            &plan,
            &mut oracle,
            StatisticKind::WinFrequency,
            &mut SeededRng::new(3),
            &mut trace,
            1,
            1,
        )
        .unwrap();
        assert_eq!(kept.len(), 2);
    }
}

#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        /// Budget safety and monotone attrition of the schedule.
        #[test]
        fn schedule_is_budget_safe(k in 2usize..8, n in 2usize..60, extra in 0usize..200, t in 0.05f64..=1.0) {
            let rho = t * (k as f64).log2();
            let (_, sizes, partitions) = cse_shape(n, k, rho).unwrap();
            let rounds = sizes.len();
            let min_budget: usize = rounds * partitions.iter().max().unwrap();
            let budget = min_budget + extra;
            let s = cse_schedule(rho, k, n, budget).unwrap();
            prop_assert!(s.total_instances() <= budget);
            prop_assert!(s.budgets.iter().all(|&b| b >= 1));
            for w in s.sizes.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
            prop_assert_eq!(s.rounds, s.r1 + s.r2);
        }

        /// The g-composition label never exceeds the simulated rounds and
        /// phase-one group counts match floor(size / k).
        #[test]
        fn shape_internals_consistent(k in 2usize..8, n in 2usize..80, t in 0.05f64..=1.0) {
            let rho = t * (k as f64).log2();
            let (r1, sizes, partitions) = cse_shape(n, k, rho).unwrap();
            prop_assert!(r1 <= sizes.len());
            for (i, &size) in sizes.iter().enumerate() {
                if size >= k {
                    prop_assert_eq!(partitions[i], size / k);
                } else {
                    prop_assert_eq!(partitions[i], 1);
                }
            }
            prop_assert_eq!(*sizes.first().unwrap(), n);
        }
    }
}
