//! Epoch-level driver: iterated elimination with geometric budget shares.
//!
//! A run spans `E = ceil(log2(n0 / (n0 - N)))` epochs, where `N` is the
//! sample size that makes the best of `n0` draws epsilon-good with the
//! requested confidence. Epoch `e` pits the incumbent against
//! `n_e - 1 = ceil(n0 / 2^e)` freshly sampled configurations under an
//! elimination run with aggressiveness `rho_e = log2((e + k - 1) / e)`,
//! funded with `B_e = floor(B / c_e)` instances; the cost shares `c_e`
//! satisfy `sum_e 1/c_e = 1`, so the epochs never overdraw the budget.
//! Later epochs field fewer configurations but larger budgets and lower
//! aggressiveness, which is what lets a lucky early winner be unseated.

use serde::{Deserialize, Serialize};

use crate::cse::{cse_schedule, run_cse};
use crate::domain::{guarded_ceil, AcBandParams, ConfigId, InstanceId, SeededRng};
use crate::error::{Error, Result};
use crate::oracle::{CpuLedger, Oracle};
use crate::statistics::StatisticKind;
use crate::trace::{TraceEvent, TraceLog};

/// Smallest sample count whose best draw is epsilon-good with probability
/// at least `1 - delta`, when an `alpha` fraction of the configuration
/// space is epsilon-good: `ceil(ln(delta) / ln(1 - alpha))`.
pub fn n_alpha_delta(alpha: f64, delta: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(guarded_ceil(delta.ln() / (1.0 - alpha).ln()) as u64)
}

/// Constants shared by the epoch schedule and its budget analysis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub(crate) struct ScheduleConstants {
    pub epochs: usize,
    pub q: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `C1*E - (2^E - 1)*(2*C1 - C2 - C3)`, the shared numerator of every
    /// cost share.
    pub base: f64,
}

impl ScheduleConstants {
    /// Cost share `c_e` of epoch `e` (1-based).
    pub fn cost_share(&self, e: usize) -> f64 {
        let denom = -(e as f64) * self.c1 + self.c2 + self.c3;
        self.base * 2f64.powi(e as i32) / (2f64.powi(self.epochs as i32) * denom)
    }
}

/// Derive `E`, `q = 1 + (k - 1)/E`, and the logarithmic constants from
/// the pool size and the sample target.
pub(crate) fn schedule_constants(k: usize, n0: u64, n_target: u64) -> Result<ScheduleConstants> {
    debug_assert!(n0 > n_target);
    let ratio = n0 as f64 / (n0 - n_target) as f64;
    let epochs = guarded_ceil(ratio.log2()) as usize;
    debug_assert!(epochs >= 1);
    let q = 1.0 + (k as f64 - 1.0) / epochs as f64;
    let lq = q.ln();
    let c1 = 2f64.ln() / lq;
    let c2 = 1.0 + (n0 as f64 + 4.0 * n0 as f64 / (n0 - n_target) as f64).ln() / lq;
    let c3 = guarded_ceil((k as f64).ln() / lq);
    let pow = 2f64.powi(epochs as i32);
    let base = c1 * epochs as f64 - (pow - 1.0) * (2.0 * c1 - c2 - c3);
    for e in 1..=epochs {
        if -(e as f64) * c1 + c2 + c3 <= 0.0 || base <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cost shares are undefined for k={k}, n0={n0}: epoch {e} gets a non-positive share"
            )));
        }
    }
    Ok(ScheduleConstants {
        epochs,
        q,
        c1,
        c2,
        c3,
        base,
    })
}

/// One epoch's row in the schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRow {
    /// Epoch number, 1-based.
    pub epoch: usize,
    /// Configurations in play: the incumbent plus `fresh` new draws.
    pub size: usize,
    /// Freshly sampled configurations, `size - 1`.
    pub fresh: usize,
    /// Elimination aggressiveness for the epoch.
    pub rho: f64,
    /// Budget divisor `c_e`.
    pub cost_share: f64,
    /// Instance budget `floor(B / c_e)` handed to the elimination run.
    pub budget: usize,
    /// Instances the run actually consumes, at most `budget`.
    pub reserved: usize,
}

/// Full epoch plan for one parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochSchedule {
    /// Sample-size target `N` from the `(alpha, delta)` guarantee.
    pub n_target: u64,
    pub epochs: usize,
    pub q: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub rows: Vec<EpochRow>,
    /// Distinct configurations drawn over the whole run, incumbent
    /// included: `1 + sum_e (n_e - 1)`.
    pub total_sampled: usize,
    /// Instances consumed over the whole run.
    pub total_reserved: usize,
}

/// Build the epoch plan, checking that `n0` is admissible and that every
/// epoch's elimination run is fundable.
pub fn epoch_schedule(params: &AcBandParams) -> Result<EpochSchedule> {
    params.validate()?;
    let n_target = n_alpha_delta(params.alpha, params.delta)?;
    if params.n0 <= n_target || params.n0 > 2 * n_target {
        return Err(Error::InvalidN0 {
            n0: params.n0,
            n: n_target,
            two_n: 2 * n_target,
        });
    }
    let consts = schedule_constants(params.k, params.n0, n_target)?;
    let mut rows = Vec::with_capacity(consts.epochs);
    for e in 1..=consts.epochs {
        let size = (params.n0.div_ceil(1u64 << e) + 1) as usize;
        let rho = ((e + params.k - 1) as f64 / e as f64).log2();
        let cost_share = consts.cost_share(e);
        let budget = (params.budget as f64 / cost_share).floor() as usize;
        let cse = cse_schedule(rho, params.k, size, budget).map_err(|err| match err {
            Error::InsufficientBudget(msg) => {
                Error::InsufficientBudget(format!("epoch {e}: {msg}"))
            }
            other => other,
        })?;
        rows.push(EpochRow {
            epoch: e,
            size,
            fresh: size - 1,
            rho,
            cost_share,
            budget,
            reserved: cse.total_instances(),
        });
    }
    let total_sampled = 1 + rows.iter().map(|r| r.fresh).sum::<usize>();
    let total_reserved = rows.iter().map(|r| r.reserved).sum();
    Ok(EpochSchedule {
        n_target,
        epochs: consts.epochs,
        q: consts.q,
        c1: consts.c1,
        c2: consts.c2,
        c3: consts.c3,
        rows,
        total_sampled,
        total_reserved,
    })
}

/// Per-epoch record of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Incumbent entering the epoch.
    pub carried: ConfigId,
    /// Fresh draws joining it.
    pub fresh: Vec<ConfigId>,
    /// Survivor, the next incumbent.
    pub winner: ConfigId,
    pub instances_used: usize,
    pub cpu_seconds: f64,
}

/// Outcome of a full run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub winner: ConfigId,
    pub params: AcBandParams,
    pub schedule: EpochSchedule,
    pub epochs: Vec<EpochTrace>,
    pub cpu: CpuLedger,
    pub total_configs_sampled: usize,
    pub total_instances_used: usize,
    /// Full event log; serialized separately as JSON lines, not embedded
    /// in the result document.
    #[serde(skip)]
    pub events: Vec<TraceEvent>,
}

/// Run the full epoch loop against an oracle.
///
/// Configurations and instances are dealt from two decks shuffled once
/// from the run seed, so no configuration is sampled twice and no
/// instance is evaluated twice across the whole run. The incumbent of
/// each epoch joins the next; the last epoch's survivor is the winner.
pub fn run_acband(
    params: &AcBandParams,
    oracle: &mut dyn Oracle,
    kind: StatisticKind,
) -> Result<RunResult> {
    let schedule = epoch_schedule(params)?;
    if schedule.total_sampled > oracle.n_configs() {
        return Err(Error::PoolExhausted(format!(
            "schedule samples {} configurations but the oracle provides {}",
            schedule.total_sampled,
            oracle.n_configs()
        )));
    }
    if schedule.total_reserved > oracle.n_instances() {
        return Err(Error::PoolExhausted(format!(
            "schedule reserves {} fresh instances but the oracle provides {}",
            schedule.total_reserved,
            oracle.n_instances()
        )));
    }

    let rng = SeededRng::new(params.seed);
    let mut config_deck: Vec<ConfigId> = (0..oracle.n_configs()).map(ConfigId).collect();
    shuffle_deck(&mut config_deck, &mut rng.fork("config-deck"));
    let mut instance_deck: Vec<InstanceId> = (0..oracle.n_instances()).map(InstanceId).collect();
    shuffle_deck(&mut instance_deck, &mut rng.fork("instance-deck"));

    let mut trace = TraceLog::new();
    let mut epochs = Vec::with_capacity(schedule.epochs);
    let mut incumbent = config_deck[0];
    let mut config_cursor = 1usize;
    let mut instance_cursor = 0usize;

    for row in &schedule.rows {
        let fresh = config_deck[config_cursor..config_cursor + row.fresh].to_vec();
        config_cursor += row.fresh;
        let mut active = Vec::with_capacity(row.size);
        active.push(incumbent);
        active.extend_from_slice(&fresh);

        let slice = &instance_deck[instance_cursor..instance_cursor + row.reserved];
        instance_cursor += row.reserved;

        trace.set_epoch(row.epoch);
        let cpu_before = oracle.cpu_total();
        let outcome = run_cse(
            &active,
            params.k,
            row.rho,
            row.budget,
            slice,
            oracle,
            kind,
            &rng.fork_with("epoch", &[row.epoch as u64]),
            &mut trace,
        )?;
        debug_assert_eq!(outcome.instances_consumed, row.reserved);

        epochs.push(EpochTrace {
            epoch: row.epoch,
            carried: incumbent,
            fresh,
            winner: outcome.winner,
            instances_used: outcome.instances_consumed,
            cpu_seconds: oracle.cpu_total() - cpu_before,
        });
        incumbent = outcome.winner;
    }

    let events = trace.into_events();
    let cpu = fold_ledger(&events, oracle.cpu_total(), schedule.epochs);
    Ok(RunResult {
        winner: incumbent,
        params: params.clone(),
        schedule,
        epochs,
        cpu,
        total_configs_sampled: config_cursor,
        total_instances_used: instance_cursor,
        events,
    })
}

fn shuffle_deck<T>(items: &mut [T], rng: &mut SeededRng) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Break the oracle's CPU total down by epoch and round. The breakdown
/// is informational; the authoritative figure is the ordered sum over
/// the event log, which equals the oracle's accumulator bit for bit.
fn fold_ledger(events: &[TraceEvent], total: f64, epochs: usize) -> CpuLedger {
    let mut per_epoch = vec![0.0; epochs];
    let mut per_round: Vec<Vec<f64>> = vec![Vec::new(); epochs];
    for ev in events {
        if let TraceEvent::GroupEval {
            epoch,
            round,
            cpu_charge,
            ..
        } = ev
        {
            per_epoch[epoch - 1] += cpu_charge;
            let rounds = &mut per_round[epoch - 1];
            if rounds.len() < *round {
                rounds.resize(*round, 0.0);
            }
            rounds[round - 1] += cpu_charge;
        }
    }
    CpuLedger {
        total_seconds: total,
        per_epoch,
        per_round,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{MatrixOracle, RuntimeMatrix};
    use crate::trace::recompute_cpu_total;

    #[test]
    fn sample_target_matches_hand_values() {
        assert_eq!(n_alpha_delta(0.05, 0.05).unwrap(), 59);
        assert_eq!(n_alpha_delta(0.01, 0.05).unwrap(), 299);
        assert_eq!(n_alpha_delta(0.5, 0.5).unwrap(), 1);
        assert_eq!(n_alpha_delta(0.2, 0.1).unwrap(), 11);
        assert_eq!(n_alpha_delta(0.02, 0.05).unwrap(), 149);
        assert!(n_alpha_delta(0.0, 0.05).is_err());
        assert!(n_alpha_delta(0.05, 1.0).is_err());
    }

    fn params(k: usize, alpha: f64, delta: f64, n0: u64, budget: usize) -> AcBandParams {
        AcBandParams {
            k,
            alpha,
            delta,
            epsilon: 0.1,
            n0,
            budget,
            seed: 7,
        }
    }

    #[test]
    fn n0_window_is_half_open() {
        // N = 59 here, so n0 must lie in (59, 118].
        assert!(epoch_schedule(&params(2, 0.05, 0.05, 59, 100_000)).is_err());
        assert!(epoch_schedule(&params(2, 0.05, 0.05, 119, 100_000)).is_err());
        assert!(epoch_schedule(&params(2, 0.05, 0.05, 60, 100_000)).is_ok());
        assert!(epoch_schedule(&params(2, 0.05, 0.05, 118, 100_000)).is_ok());
    }

    #[test]
    fn sampled_totals_match_hand_values() {
        let s = epoch_schedule(&params(2, 0.05, 0.05, 118, 10_000)).unwrap();
        assert_eq!(s.epochs, 1);
        assert_eq!(s.total_sampled, 60);

        let s = epoch_schedule(&params(2, 0.02, 0.05, 202, 100_000)).unwrap();
        assert_eq!(s.epochs, 2);
        assert_eq!(s.rows[0].size, 102);
        assert_eq!(s.rows[1].size, 52);
        assert_eq!(s.total_sampled, 153);

        let s = epoch_schedule(&params(2, 0.01, 0.05, 402, 100_000)).unwrap();
        assert_eq!(s.epochs, 2);
        assert_eq!(s.total_sampled, 303);
    }

    #[test]
    fn cost_shares_match_hand_values() {
        // k=2, alpha=0.01, delta=0.05, n0=402: two epochs with shares
        // 1.447 and 3.236.
        let s = epoch_schedule(&params(2, 0.01, 0.05, 402, 100_000)).unwrap();
        assert!((s.rows[0].cost_share - 1.447).abs() < 1e-3);
        assert!((s.rows[1].cost_share - 3.236).abs() < 1e-3);
    }

    #[test]
    fn cost_shares_sum_to_unit_fraction() {
        for (k, alpha, delta, n0) in [
            (2usize, 0.05, 0.05, 118u64),
            (2, 0.01, 0.05, 402),
            (4, 0.02, 0.05, 200),
            (8, 0.1, 0.1, 40),
        ] {
            let n = n_alpha_delta(alpha, delta).unwrap();
            let consts = schedule_constants(k, n0, n).unwrap();
            let sum: f64 = (1..=consts.epochs)
                .map(|e| 1.0 / consts.cost_share(e))
                .sum();
            assert!(
                (sum - 1.0).abs() < 1e-9,
                "shares for k={k}, n0={n0} sum to {sum}"
            );
        }
    }

    #[test]
    fn single_epoch_gets_the_whole_budget() {
        // E=1 forces c_1 = 1 exactly, so B_1 = B.
        let s = epoch_schedule(&params(2, 0.05, 0.05, 118, 600)).unwrap();
        assert!((s.rows[0].cost_share - 1.0).abs() < 1e-12);
        assert_eq!(s.rows[0].budget, 600);
    }

    #[test]
    fn rho_declines_across_epochs() {
        let s = epoch_schedule(&params(2, 0.01, 0.05, 402, 100_000)).unwrap();
        assert!((s.rows[0].rho - 1.0).abs() < 1e-12);
        assert!((s.rows[1].rho - 1.5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn underfunded_epoch_is_rejected_before_any_evaluation() {
        let err = epoch_schedule(&params(2, 0.05, 0.05, 118, 100)).unwrap_err();
        match err {
            Error::InsufficientBudget(msg) => assert!(msg.starts_with("epoch 1:")),
            other => panic!("expected InsufficientBudget, got {other:?}"),
        }
    }

    /// Matrix where configuration 0 dominates everywhere.
    fn dominant_matrix(n: usize, m: usize) -> RuntimeMatrix {
        let mut values = Vec::with_capacity(n * m);
        for c in 0..n {
            for i in 0..m {
                let v = if c == 0 {
                    1.0
                } else {
                    3.0 + ((c * 131 + i * 37) % 211) as f64 / 13.0
                };
                values.push(v);
            }
        }
        RuntimeMatrix::from_values(n, m, 900.0, values).unwrap()
    }

    #[test]
    fn full_run_finds_the_dominant_configuration() {
        let p = params(2, 0.05, 0.05, 118, 600);
        // total_sampled = 60, so a 60-configuration pool is fully dealt
        // and the dominant arm is guaranteed to enter.
        let m = dominant_matrix(60, 600);
        let mut oracle = MatrixOracle::new(&m, p.seed);
        let result = run_acband(&p, &mut oracle, StatisticKind::WinFrequency).unwrap();
        assert_eq!(result.winner, ConfigId(0));
        assert_eq!(result.total_configs_sampled, 60);
        assert_eq!(result.epochs.len(), 1);
        assert!(result.total_instances_used <= 600);
    }

    #[test]
    fn ledger_total_equals_ordered_event_sum() {
        let p = params(2, 0.05, 0.05, 118, 600);
        let m = dominant_matrix(60, 600);
        let mut oracle = MatrixOracle::new(&m, p.seed);
        let result = run_acband(&p, &mut oracle, StatisticKind::WinFrequency).unwrap();
        let recomputed = recompute_cpu_total(&result.events);
        assert_eq!(recomputed.to_bits(), result.cpu.total_seconds.to_bits());
        assert_eq!(
            result.cpu.total_seconds.to_bits(),
            oracle.cpu_total().to_bits()
        );
    }

    #[test]
    fn equal_seeds_reproduce_bit_identical_results() {
        let p = params(2, 0.05, 0.05, 118, 600);
        let m = dominant_matrix(70, 620);
        let run = |seed: u64| {
            let mut p = p.clone();
            p.seed = seed;
            let mut oracle = MatrixOracle::new(&m, seed);
            let r = run_acband(&p, &mut oracle, StatisticKind::WinFrequency).unwrap();
            (
                r.winner,
                serde_json::to_string(&r).unwrap(),
                r.events.len(),
            )
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn run_rejects_pools_smaller_than_the_schedule() {
        let p = params(2, 0.05, 0.05, 118, 600);
        // 59 configurations cannot seat 60 distinct draws.
        let m = dominant_matrix(59, 600);
        let mut oracle = MatrixOracle::new(&m, p.seed);
        let err = run_acband(&p, &mut oracle, StatisticKind::WinFrequency).unwrap_err();
        assert!(matches!(err, Error::PoolExhausted(_)));
    }
}
