//! Summary statistics over censored group observations.
//!
//! A capped group evaluation reveals the winner's runtime and nothing but
//! the loss event for everyone else. Both statistics below are oriented so
//! that higher is better.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::ConfigId;
use crate::oracle::GroupOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Fraction of participations won: `wins / trials`.
    #[default]
    WinFrequency,
    /// Negated mean of the uncensored runtimes observed for a
    /// configuration.
    NegMeanRuntime,
}

#[derive(Debug, Clone, Copy, Default)]
struct ConfigStats {
    wins: u64,
    trials: u64,
    runtime_sum: f64,
    observations: u64,
}

/// Running tallies for one elimination call.
///
/// Every elimination decision builds a fresh state from its own block of
/// evaluations; nothing carries over between rounds or epochs.
#[derive(Debug, Clone)]
pub struct StatisticState {
    per_config: BTreeMap<ConfigId, ConfigStats>,
    timeout: f64,
}

impl StatisticState {
    pub fn new(timeout: f64) -> Self {
        StatisticState {
            per_config: BTreeMap::new(),
            timeout,
        }
    }

    /// Fold one group outcome into the tallies: every participant gains a
    /// trial, the winner (if any) gains a win and its uncensored runtime.
    pub fn update(&mut self, outcome: &GroupOutcome) {
        for &id in &outcome.participants {
            let entry = self.per_config.entry(id).or_default();
            entry.trials += 1;
        }
        if let Some(winner) = outcome.winner {
            let entry = self.per_config.entry(winner).or_default();
            entry.wins += 1;
            if let Some(rt) = outcome.winner_runtime {
                entry.runtime_sum += rt;
                entry.observations += 1;
            }
        }
    }

    /// Score for `id` under `kind`; higher is better.
    ///
    /// Sentinels: an id with zero trials scores 0.0 under `WinFrequency`,
    /// and an id with zero uncensored observations scores `-timeout` (the
    /// worst plausible mean) under `NegMeanRuntime`.
    pub fn score(&self, id: ConfigId, kind: StatisticKind) -> f64 {
        let stats = self.per_config.get(&id).copied().unwrap_or_default();
        match kind {
            StatisticKind::WinFrequency => {
                if stats.trials == 0 {
                    0.0
                } else {
                    stats.wins as f64 / stats.trials as f64
                }
            }
            StatisticKind::NegMeanRuntime => {
                if stats.observations == 0 {
                    -self.timeout
                } else {
                    -(stats.runtime_sum / stats.observations as f64)
                }
            }
        }
    }

    pub fn wins(&self, id: ConfigId) -> u64 {
        self.per_config.get(&id).map_or(0, |s| s.wins)
    }

    pub fn trials(&self, id: ConfigId) -> u64 {
        self.per_config.get(&id).map_or(0, |s| s.trials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InstanceId;

    fn outcome(
        participants: &[usize],
        winner: Option<usize>,
        runtime: Option<f64>,
    ) -> GroupOutcome {
        GroupOutcome {
            instance: InstanceId(0),
            participants: participants.iter().map(|&i| ConfigId(i)).collect(),
            winner: winner.map(ConfigId),
            winner_runtime: runtime,
            cpu_charge: 0.0,
        }
    }

    #[test]
    fn single_win_updates_both_sides() {
        let mut state = StatisticState::new(900.0);
        state.update(&outcome(&[0, 1], Some(0), Some(3.0)));
        assert_eq!(state.wins(ConfigId(0)), 1);
        assert_eq!(state.trials(ConfigId(0)), 1);
        assert_eq!(state.wins(ConfigId(1)), 0);
        assert_eq!(state.trials(ConfigId(1)), 1);
        assert_eq!(state.score(ConfigId(0), StatisticKind::WinFrequency), 1.0);
        assert_eq!(state.score(ConfigId(1), StatisticKind::WinFrequency), 0.0);
    }

    #[test]
    fn all_timeout_rounds_leave_scores_at_sentinels() {
        let mut state = StatisticState::new(900.0);
        state.update(&outcome(&[0, 1], None, None));
        assert_eq!(state.score(ConfigId(0), StatisticKind::WinFrequency), 0.0);
        assert_eq!(
            state.score(ConfigId(0), StatisticKind::NegMeanRuntime),
            -900.0
        );
    }

    #[test]
    fn neg_mean_runtime_averages_uncensored_observations() {
        let mut state = StatisticState::new(900.0);
        state.update(&outcome(&[0, 1], Some(0), Some(2.0)));
        state.update(&outcome(&[0, 1], Some(0), Some(4.0)));
        state.update(&outcome(&[0, 1], Some(1), Some(1.0)));
        assert_eq!(state.score(ConfigId(0), StatisticKind::NegMeanRuntime), -3.0);
        assert_eq!(state.score(ConfigId(1), StatisticKind::NegMeanRuntime), -1.0);
        // Higher is better: the faster mean must outrank the slower one.
        assert!(
            state.score(ConfigId(1), StatisticKind::NegMeanRuntime)
                > state.score(ConfigId(0), StatisticKind::NegMeanRuntime)
        );
    }

    #[test]
    fn unknown_ids_score_like_zero_trial_ids() {
        let state = StatisticState::new(60.0);
        assert_eq!(state.score(ConfigId(9), StatisticKind::WinFrequency), 0.0);
        assert_eq!(
            state.score(ConfigId(9), StatisticKind::NegMeanRuntime),
            -60.0
        );
    }
}
