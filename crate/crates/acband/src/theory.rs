//! Sufficient-budget analysis for the elimination schedules.
//!
//! The driver modules answer "what does this budget buy"; this module
//! answers the converse: how large a budget provably suffices. For a
//! single elimination run the bound is per-round sample complexity times
//! the schedule's footprint; for the full epoch loop it is the closed
//! form of the geometric cost-share sum. Both are exposed to the CLI so
//! budgets can be sized before anything is evaluated.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::acband::{n_alpha_delta, schedule_constants};
use crate::cse::CseSchedule;
use crate::error::{Error, Result};

/// Per-round sample-complexity envelope: how many instances one group
/// needs before its empirical ranking resolves differences of size `t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvergenceEnvelope {
    /// Fixed per-round allotment, independent of the resolution scale.
    Constant { value: f64 },
    /// Sub-Gaussian concentration: `ceil(ln(2 / failure) / (2 t^2))`
    /// samples resolve a difference of `t` with probability at least
    /// `1 - failure`.
    Hoeffding { failure: f64 },
}

impl ConvergenceEnvelope {
    /// Samples needed to resolve differences of size `t > 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "resolution scale must be a positive finite number, got {t}"
            )));
        }
        match self {
            ConvergenceEnvelope::Constant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "constant envelope must be non-negative and finite, got {value}"
                    )));
                }
                Ok(*value)
            }
            ConvergenceEnvelope::Hoeffding { failure } => {
                if !(*failure > 0.0 && *failure < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "failure probability must lie in (0, 1), got {failure}"
                    )));
                }
                Ok(((2.0 / failure).ln() / (2.0 * t * t)).ceil())
            }
        }
    }
}

/// Decision margin of one elimination round: the win-rate lead the
/// worst-case group's best member holds over the first configuration
/// that round drops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundGap {
    /// Round number, 1-based.
    pub round: usize,
    pub group_size: usize,
    /// Survivors per group in this round.
    pub keep: usize,
    /// Normalized margin in `[0, 1]`.
    pub gap: f64,
}

/// Per-round decision margins for one schedule, worst group per round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapProfile {
    pub rounds: Vec<RoundGap>,
}

impl GapProfile {
    pub fn max_gap(&self) -> Option<f64> {
        self.rounds
            .iter()
            .map(|r| r.gap)
            .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.max(g))))
    }
}

/// Instances that provably suffice for one elimination run: footprint
/// `R * max_r P_r` groups, each funded with one instance more than the
/// envelope demands at the schedule's resolution scale.
///
/// The scale is `max(epsilon / 2, max_r gap_r / 2)`: margins below
/// `epsilon` never need resolving, because every configuration inside
/// such a margin is an acceptable winner.
pub fn cse_sufficient_budget(
    schedule: &CseSchedule,
    profile: &GapProfile,
    epsilon: f64,
    envelope: &ConvergenceEnvelope,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be a positive finite number, got {epsilon}"
        )));
    }
    if profile.rounds.len() != schedule.rounds {
        return Err(Error::MissingGapData(format!(
            "profile covers {} rounds but the schedule has {}",
            profile.rounds.len(),
            schedule.rounds
        )));
    }
    let max_gap = profile
        .max_gap()
        .ok_or_else(|| Error::MissingGapData("profile has no rounds".to_string()))?;
    if !(max_gap.is_finite() && max_gap >= 0.0) {
        return Err(Error::MissingGapData(format!(
            "gaps must be finite and non-negative, got {max_gap}"
        )));
    }
    let scale = (epsilon / 2.0).max(max_gap / 2.0);
    let per_group = 1.0 + envelope.eval(scale)?;
    Ok((schedule.rounds * schedule.max_partitions()) as f64 * per_group)
}

/// Budget that provably funds the whole epoch loop:
/// `(n0 / (k * gamma_bar)) * (C1*E - (2^E - 1)*(2*C1 - C2 - C3)) / 2^E`,
/// where `gamma_bar` is the mean per-instance evaluation cost.
pub fn acband_sufficient_budget(
    gamma_bar: f64,
    k: usize,
    alpha: f64,
    delta: f64,
    n0: u64,
) -> Result<f64> {
    if !(gamma_bar > 0.0 && gamma_bar.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma_bar must be a positive finite number, got {gamma_bar}"
        )));
    }
    let consts = constants_for(k, alpha, delta, n0)?;
    Ok(n0 as f64 / (k as f64 * gamma_bar) * consts.1 / 2f64.powi(consts.0 as i32))
}

/// Sum of the budget fractions `1 / c_e` over all epochs; identically one
/// up to rounding, which is what makes the epoch budgets exhaustive.
pub fn epoch_fraction_sum(k: usize, alpha: f64, delta: f64, n0: u64) -> Result<f64> {
    let n = n_alpha_delta(alpha, delta)?;
    validate_n0(n0, n)?;
    let consts = schedule_constants(k, n0, n)?;
    Ok((1..=consts.epochs)
        .map(|e| 1.0 / consts.cost_share(e))
        .sum())
}

fn validate_n0(n0: u64, n: u64) -> Result<()> {
    if n0 <= n || n0 > 2 * n {
        return Err(Error::InvalidN0 {
            n0,
            n,
            two_n: 2 * n,
        });
    }
    Ok(())
}

/// `(epochs, base)` where `base = C1*E - (2^E - 1)*(2*C1 - C2 - C3)`.
fn constants_for(k: usize, alpha: f64, delta: f64, n0: u64) -> Result<(usize, f64)> {
    let n = n_alpha_delta(alpha, delta)?;
    validate_n0(n0, n)?;
    let consts = schedule_constants(k, n0, n)?;
    Ok((consts.epochs, consts.base))
}

/// Direct evaluation of `sum_{e=1}^{n} (-e*a + b + c) / 2^e`.
pub fn epoch_weight_sum(a: f64, b: f64, c: f64, n: u32) -> f64 {
    (1..=n)
        .map(|e| (-(e as f64) * a + b + c) / 2f64.powi(e as i32))
        .sum()
}

/// The same sum in closed form:
/// `(a*n - (2^n - 1)*(2*a - b - c)) / 2^n`.
pub fn epoch_weight_closed_form(a: f64, b: f64, c: f64, n: u32) -> f64 {
    let pow = 2f64.powi(n as i32);
    (a * n as f64 - (pow - 1.0) * (2.0 * a - b - c)) / pow
}

/// Pool-size rule mapping the sample target `N` to a pool size `n0` in
/// the admissible window `(N, 2N]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum N0Rule {
    /// Smallest admissible pool, `N + 1`.
    NPlusOne,
    /// `floor(1.5 * N)`, nudged up to `N + 1` when `N` is one.
    ThreeHalves,
    /// Largest admissible pool, `2 * N`.
    Double,
}

impl N0Rule {
    pub fn apply(&self, n: u64) -> u64 {
        match self {
            N0Rule::NPlusOne => n + 1,
            N0Rule::ThreeHalves => (n + n / 2).max(n + 1),
            N0Rule::Double => 2 * n,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            N0Rule::NPlusOne => "n+1",
            N0Rule::ThreeHalves => "1.5n",
            N0Rule::Double => "2n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n+1" => Ok(N0Rule::NPlusOne),
            "1.5n" => Ok(N0Rule::ThreeHalves),
            "2n" => Ok(N0Rule::Double),
            other => Err(Error::InvalidParameter(format!(
                "unknown pool-size rule {other:?}; expected n+1, 1.5n, or 2n"
            ))),
        }
    }
}

/// One grid point of the sufficient-budget curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub k: usize,
    pub alpha: f64,
    pub delta: f64,
    pub n0: u64,
    pub epochs: usize,
    pub budget: f64,
}

/// Evaluate the sufficient budget over the cross product of the grids,
/// with the pool size chosen by `rule`.
pub fn budget_curve(
    ks: &[usize],
    alphas: &[f64],
    deltas: &[f64],
    rule: N0Rule,
    gamma_bar: f64,
) -> Result<Vec<BudgetPoint>> {
    let mut points = Vec::with_capacity(ks.len() * alphas.len() * deltas.len());
    for &k in ks {
        for &alpha in alphas {
            for &delta in deltas {
                let n = n_alpha_delta(alpha, delta)?;
                let n0 = rule.apply(n);
                let (epochs, _) = constants_for(k, alpha, delta, n0)?;
                let budget = acband_sufficient_budget(gamma_bar, k, alpha, delta, n0)?;
                points.push(BudgetPoint {
                    k,
                    alpha,
                    delta,
                    n0,
                    epochs,
                    budget,
                });
            }
        }
    }
    Ok(points)
}

/// Write the curve as CSV with the fixed header `k,alpha,delta,n0,E,budget`.
pub fn write_budget_curve_csv<W: Write>(points: &[BudgetPoint], mut out: W) -> Result<()> {
    writeln!(out, "k,alpha,delta,n0,E,budget")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.k, p.alpha, p.delta, p.n0, p.epochs, p.budget
        )?;
    }
    Ok(())
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        /// The geometric identity holds across the constant ranges the
        /// schedules produce.
        #[test]
        fn weight_identity(a in 0.1f64..20.0, b in 0.0f64..40.0, c in 0.0f64..10.0, n in 1u32..16) {
            let direct = epoch_weight_sum(a, b, c, n);
            let closed = epoch_weight_closed_form(a, b, c, n);
            prop_assert!((direct - closed).abs() < 1e-8 * (1.0 + closed.abs()));
        }

        /// Hoeffding sample counts shrink as the scale grows.
        #[test]
        fn envelope_is_monotone(failure in 0.001f64..0.5, t in 0.01f64..0.5, bump in 0.01f64..0.5) {
            let env = ConvergenceEnvelope::Hoeffding { failure };
            let lo = env.eval(t).unwrap();
            let hi = env.eval(t + bump).unwrap();
            prop_assert!(hi <= lo);
        }
    }
}
