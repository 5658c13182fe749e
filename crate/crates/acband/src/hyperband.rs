//! Successive-halving brackets adapted to a fixed instance budget.
//!
//! The classic bracket ladder is kept: `s_max = ceil(log_eta(n_max))`
//! brackets, bracket `s` starting `n_s = ceil((s_max + 1)/(s + 1) * eta^s)`
//! configurations and thinning them by `eta` per round while the instance
//! allotment grows by `eta`. What the budget fixes is `R`, the instance
//! count a finalist receives: the largest value whose planned consumption
//! stays within `B`, found by binary search over the (monotone) plan
//! cost. Runs are uncapped: every evaluation charges its full runtime,
//! which is exactly the baseline's handicap against capped group racing.
//!
//! All configurations in a bracket work through the same shuffled
//! instance order, so promotion from `r` to `r'` instances costs exactly
//! `r' - r` fresh evaluations and means over seen instances stay
//! comparable within a round.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{guarded_ceil, ConfigId, InstanceId, SeededRng};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::trace::{TraceEvent, TraceLog};

/// Inputs for one baseline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbandParams {
    /// Thinning factor between rounds, greater than one.
    pub eta: f64,
    /// Configuration count of the most exploratory bracket.
    pub n_max: usize,
    /// Total instance-evaluation budget `B`.
    pub budget: usize,
    pub seed: u64,
}

impl HyperbandParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be a finite number above 1, got {}",
                self.eta
            )));
        }
        if self.n_max < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_max must be at least 2, got {}",
                self.n_max
            )));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter(
                "budget must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// One round inside a bracket: `configs` survivors, each extended to
/// `resources` instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HbRound {
    pub round: usize,
    pub configs: usize,
    pub resources: usize,
}

/// One bracket of the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    /// Fresh configurations the bracket draws.
    pub n_configs: usize,
    pub rounds: Vec<HbRound>,
    /// Instance evaluations the bracket performs.
    pub consumption: usize,
}

/// Complete plan: every bracket's rounds plus the chosen `R`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketPlan {
    pub s_max: usize,
    /// Instances a finalist receives.
    pub r_per_config: usize,
    /// True when the budget would afford more instances per finalist
    /// than the pool holds, so `R` was clamped to the pool size.
    pub truncated: bool,
    pub brackets: Vec<Bracket>,
    pub total_consumption: usize,
    pub total_configs: usize,
}

fn round_counts(n_s: usize, s: usize, eta: f64, r: usize) -> Vec<HbRound> {
    (0..=s)
        .map(|i| {
            let configs = ((n_s as f64 / eta.powi(i as i32) + 1e-9).floor() as usize).max(1);
            let resources = if i == s {
                r
            } else {
                ((r as f64 / eta.powi((s - i) as i32) + 1e-9).floor() as usize).max(1)
            };
            HbRound {
                round: i,
                configs,
                resources,
            }
        })
        .collect()
}

fn bracket_consumption(rounds: &[HbRound]) -> usize {
    let mut prev = 0usize;
    let mut total = 0usize;
    for round in rounds {
        total += round.configs * (round.resources - prev);
        prev = round.resources;
    }
    total
}

fn plan_for(s_max: usize, eta: f64, r: usize) -> Vec<Bracket> {
    (0..=s_max)
        .rev()
        .map(|s| {
            let n_s = guarded_ceil((s_max as f64 + 1.0) / (s as f64 + 1.0) * eta.powi(s as i32))
                as usize;
            let rounds = round_counts(n_s, s, eta, r);
            let consumption = bracket_consumption(&rounds);
            Bracket {
                s,
                n_configs: n_s,
                rounds,
                consumption,
            }
        })
        .collect()
}

/// Lay out the bracket ladder for a budget and an instance pool of size
/// `n_instances`.
///
/// `R` is the largest finalist allotment whose planned consumption fits
/// the budget; plan cost is non-decreasing in `R`, so binary search
/// applies. A budget below one instance per drawn configuration is not
/// fundable.
pub fn hb_plan(params: &HyperbandParams, n_instances: usize) -> Result<BracketPlan> {
    params.validate()?;
    if n_instances == 0 {
        return Err(Error::InvalidParameter(
            "the instance pool is empty".to_string(),
        ));
    }
    let s_max = guarded_ceil((params.n_max as f64).ln() / params.eta.ln()) as usize;
    let cost = |r: usize| -> usize {
        plan_for(s_max, params.eta, r)
            .iter()
            .map(|b| b.consumption)
            .sum()
    };
    if cost(1) > params.budget {
        return Err(Error::InsufficientBudget(format!(
            "the ladder needs at least {} evaluations (one instance per draw), budget is {}",
            cost(1),
            params.budget
        )));
    }
    // Maximal R with cost(R) <= B; cost(B + 1) > B because the last
    // bracket alone evaluates at least one configuration on R instances.
    let (mut lo, mut hi) = (1usize, params.budget);
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if cost(mid) <= params.budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let truncated = lo > n_instances;
    let r = lo.min(n_instances);
    let brackets = plan_for(s_max, params.eta, r);
    let total_consumption = brackets.iter().map(|b| b.consumption).sum();
    let total_configs = brackets.iter().map(|b| b.n_configs).sum();
    Ok(BracketPlan {
        s_max,
        r_per_config: r,
        truncated,
        brackets,
        total_consumption,
        total_configs,
    })
}

/// Final score of one bracket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketOutcome {
    pub s: usize,
    pub winner: ConfigId,
    /// Mean runtime of the winner over the instances it saw.
    pub loss: f64,
}

/// Outcome of a full baseline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HbRunResult {
    /// Configuration with the lowest mean runtime among everything
    /// evaluated, across all brackets.
    pub winner: ConfigId,
    pub winner_loss: f64,
    pub plan: BracketPlan,
    pub brackets: Vec<BracketOutcome>,
    pub cpu_seconds: f64,
    pub total_configs_sampled: usize,
    pub total_evaluations: usize,
    /// Full event log; serialized separately as JSON lines.
    #[serde(skip)]
    pub events: Vec<TraceEvent>,
}

/// Run the ladder against an oracle.
///
/// Each bracket draws fresh configurations from a deck shuffled once per
/// run, so no configuration appears in two brackets; instances are
/// revisited freely, as uncapped single runs allow. Within a round,
/// survivors are the configurations with the lowest mean runtime, ties
/// resolved toward the lower identifier.
pub fn run_hyperband(params: &HyperbandParams, oracle: &mut dyn Oracle) -> Result<HbRunResult> {
    let plan = hb_plan(params, oracle.n_instances())?;
    if plan.total_configs > oracle.n_configs() {
        return Err(Error::PoolExhausted(format!(
            "the ladder draws {} configurations but the oracle provides {}",
            plan.total_configs,
            oracle.n_configs()
        )));
    }

    let rng = SeededRng::new(params.seed);
    let mut config_deck: Vec<ConfigId> = (0..oracle.n_configs()).map(ConfigId).collect();
    shuffle_deck(&mut config_deck, &mut rng.fork("config-deck"));
    let mut instance_order: Vec<InstanceId> = (0..oracle.n_instances()).map(InstanceId).collect();
    shuffle_deck(&mut instance_order, &mut rng.fork("instance-order"));

    let mut trace = TraceLog::new();
    let mut deck_cursor = 0usize;
    let mut evaluations = 0usize;
    let mut best: Option<(f64, ConfigId)> = None;
    let mut bracket_outcomes = Vec::with_capacity(plan.brackets.len());

    for bracket in &plan.brackets {
        let mut active = config_deck[deck_cursor..deck_cursor + bracket.n_configs].to_vec();
        deck_cursor += bracket.n_configs;
        // (instances seen, runtime sum) per configuration in this bracket.
        let mut stats: BTreeMap<ConfigId, (usize, f64)> = BTreeMap::new();

        for round in &bracket.rounds {
            debug_assert_eq!(active.len(), round.configs);
            for &config in &active {
                let entry = stats.entry(config).or_insert((0, 0.0));
                while entry.0 < round.resources {
                    let instance = instance_order[entry.0];
                    let (runtime, finished) = oracle.evaluate_single(config, instance)?;
                    trace.single_eval(
                        bracket.s,
                        round.round,
                        config.0,
                        instance.0,
                        runtime,
                        finished,
                    );
                    entry.0 += 1;
                    entry.1 += runtime;
                    evaluations += 1;
                }
            }
            if round.round < bracket.s {
                let next = bracket.rounds[round.round + 1].configs;
                active.sort_by(|a, b| {
                    let la = stats[a].1 / stats[a].0 as f64;
                    let lb = stats[b].1 / stats[b].0 as f64;
                    la.total_cmp(&lb).then(a.cmp(b))
                });
                active.truncate(next);
            }
        }

        // Every configuration the bracket touched competes for the global
        // minimum with its final mean.
        let mut bracket_best: Option<(f64, ConfigId)> = None;
        for (&config, &(count, sum)) in &stats {
            let loss = sum / count as f64;
            if bracket_best.is_none_or(|(l, c)| (loss, config) < (l, c)) {
                bracket_best = Some((loss, config));
            }
            if best.is_none_or(|(l, c)| (loss, config) < (l, c)) {
                best = Some((loss, config));
            }
        }
        let (loss, winner) = bracket_best.expect("brackets are never empty");
        bracket_outcomes.push(BracketOutcome {
            s: bracket.s,
            winner,
            loss,
        });
    }

    let (winner_loss, winner) = best.expect("plans always evaluate something");
    Ok(HbRunResult {
        winner,
        winner_loss,
        plan,
        brackets: bracket_outcomes,
        cpu_seconds: oracle.cpu_total(),
        total_configs_sampled: deck_cursor,
        total_evaluations: evaluations,
        events: trace.into_events(),
    })
}

fn shuffle_deck<T>(items: &mut [T], rng: &mut SeededRng) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        /// Plan cost never exceeds the budget and is monotone in R.
        #[test]
        fn plans_respect_the_budget(n_max in 2usize..40, budget in 1usize..4_000, pool in 1usize..200) {
            let p = HyperbandParams { eta: 3.0, n_max, budget, seed: 0 };
            match hb_plan(&p, pool) {
                Ok(plan) => {
                    prop_assert!(plan.total_consumption <= budget);
                    prop_assert!(plan.r_per_config <= pool);
                    for b in &plan.brackets {
                        let mut prev = 0usize;
                        for r in &b.rounds {
                            prop_assert!(r.resources >= prev);
                            prev = r.resources;
                        }
                    }
                }
                Err(Error::InsufficientBudget(_)) => {}
                Err(other) => return Err(TestCaseError::fail(format!("{other}"))),
            }
        }

        /// Round sizes thin by eta and never grow.
        #[test]
        fn round_sizes_thin(n_max in 2usize..60, r in 1usize..100) {
            let s_max = guarded_ceil((n_max as f64).ln() / 3f64.ln()) as usize;
            for b in plan_for(s_max, 3.0, r) {
                for w in b.rounds.windows(2) {
                    prop_assert!(w[1].configs <= w[0].configs);
                }
                prop_assert_eq!(b.rounds.last().unwrap().resources, r);
            }
        }
    }
}
