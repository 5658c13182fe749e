//! Quality metrics for a returned configuration.
//!
//! Everything here reads a runtime matrix after the fact; nothing
//! consumes budget. The headline figure is the relative gap between the
//! returned configuration's total runtime and the best total in the
//! matrix (or in a stated subset, when only sampled configurations are a
//! fair comparison). The trimmed mean discards the worst `delta_m`
//! fraction of a configuration's runtimes first, which is the natural
//! summary when a small share of instances is allowed to time out.

use serde::{Deserialize, Serialize};

use crate::domain::{guarded_ceil, ConfigId};
use crate::error::{Error, Result};
use crate::oracle::RuntimeMatrix;

/// Total runtime of one configuration across every instance, timeouts
/// counted at the cap.
pub fn total_runtime(matrix: &RuntimeMatrix, config: ConfigId) -> Result<f64> {
    Ok(matrix.row(config)?.iter().sum())
}

fn best_total(matrix: &RuntimeMatrix, configs: &[ConfigId]) -> Result<(ConfigId, f64)> {
    let mut best: Option<(f64, ConfigId)> = None;
    for &c in configs {
        let total = total_runtime(matrix, c)?;
        if best.is_none_or(|(t, id)| (total, c) < (t, id)) {
            best = Some((total, c));
        }
    }
    best.map(|(t, c)| (c, t))
        .ok_or_else(|| Error::InvalidParameter("the comparison set is empty".to_string()))
}

fn all_configs(matrix: &RuntimeMatrix) -> Vec<ConfigId> {
    (0..matrix.n_configs()).map(ConfigId).collect()
}

/// Relative excess of `config`'s total runtime over the best total in
/// the matrix: `(T - T_min) / T_min`, zero for the best configuration.
pub fn percent_gap(matrix: &RuntimeMatrix, config: ConfigId) -> Result<f64> {
    let (_, t_min) = best_total(matrix, &all_configs(matrix))?;
    let t = total_runtime(matrix, config)?;
    Ok((t - t_min) / t_min)
}

/// Relative excess over the best total within `subset`; `config` must be
/// a member, otherwise the comparison would flatter it.
pub fn percent_gap_within(
    matrix: &RuntimeMatrix,
    config: ConfigId,
    subset: &[ConfigId],
) -> Result<f64> {
    if !subset.contains(&config) {
        return Err(Error::ConfigNotInSubset(config));
    }
    let (_, t_min) = best_total(matrix, subset)?;
    let t = total_runtime(matrix, config)?;
    Ok((t - t_min) / t_min)
}

/// Mean of the best `ceil((1 - delta_m) * m)` runtimes: the worst
/// `delta_m` fraction of instances is discarded before averaging.
pub fn r_delta_mean(runtimes: &[f64], delta_m: f64) -> Result<f64> {
    if runtimes.is_empty() {
        return Err(Error::InvalidParameter(
            "the runtime list is empty".to_string(),
        ));
    }
    if !((0.0..1.0).contains(&delta_m)) {
        return Err(Error::InvalidParameter(format!(
            "delta_m must lie in [0, 1), got {delta_m}"
        )));
    }
    let mut sorted = runtimes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let keep = guarded_ceil((1.0 - delta_m) * runtimes.len() as f64) as usize;
    debug_assert!(keep >= 1);
    Ok(sorted[..keep].iter().sum::<f64>() / keep as f64)
}

/// Metric bundle for one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigScore {
    pub config: ConfigId,
    pub total_runtime: f64,
    /// Gap against the best configuration in the whole matrix.
    pub percent_gap: f64,
    pub r_delta_mean: f64,
}

fn score(matrix: &RuntimeMatrix, config: ConfigId, delta_m: f64) -> Result<ConfigScore> {
    Ok(ConfigScore {
        config,
        total_runtime: total_runtime(matrix, config)?,
        percent_gap: percent_gap(matrix, config)?,
        r_delta_mean: r_delta_mean(matrix.row(config)?, delta_m)?,
    })
}

/// Post-hoc evaluation of a run's returned configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub winner: ConfigScore,
    /// Best configuration in the whole matrix.
    pub oracle_best: ConfigScore,
    /// Best configuration among those the run actually sampled, when the
    /// sampled set is supplied.
    pub subset_best: Option<ConfigScore>,
    /// Winner's gap against `subset_best`.
    pub gap_within_subset: Option<f64>,
    pub delta_m: f64,
    pub n_configs: usize,
    pub n_instances: usize,
}

/// Score `winner` against the matrix, and against `subset` when the
/// sampled configurations are known.
pub fn evaluate(
    matrix: &RuntimeMatrix,
    winner: ConfigId,
    subset: Option<&[ConfigId]>,
    delta_m: f64,
) -> Result<EvalReport> {
    let winner_score = score(matrix, winner, delta_m)?;
    let (best_id, _) = best_total(matrix, &all_configs(matrix))?;
    let oracle_best = score(matrix, best_id, delta_m)?;
    let (subset_best, gap_within_subset) = match subset {
        Some(ids) => {
            let gap = percent_gap_within(matrix, winner, ids)?;
            let (sub_id, _) = best_total(matrix, ids)?;
            (Some(score(matrix, sub_id, delta_m)?), Some(gap))
        }
        None => (None, None),
    };
    Ok(EvalReport {
        winner: winner_score,
        oracle_best,
        subset_best,
        gap_within_subset,
        delta_m,
        n_configs: matrix.n_configs(),
        n_instances: matrix.n_instances(),
    })
}
