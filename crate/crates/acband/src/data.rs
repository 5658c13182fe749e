//! Synthetic runtime scenarios with known ground truth.
//!
//! A scenario fixes an exponential rate per configuration; higher rate
//! means faster solves. A configuration is epsilon-best when its
//! head-to-head disadvantage against the fastest rate,
//! `(lambda_max - lambda) / (lambda_max + lambda)` — exactly its deficit
//! in the two-horse win probability — is at most `epsilon`. The
//! generator places an exact count of configurations inside that band
//! and everyone else well below it, so tests can assert membership
//! rather than estimate it. Rates are then scaled so even the slowest
//! configuration times out with probability below 1e-9 per run, which
//! keeps the drawn matrix faithful to the rates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::cse::{cse_shape, f_rho};
use crate::domain::{guarded_ceil, ConfigId, SeededRng};
use crate::error::{Error, Result};
use crate::oracle::{RuntimeMatrix, BINARY_MAGIC};
use crate::theory::{GapProfile, RoundGap};

/// `-ln(1e-9)`: the rate-timeout product above which a single run times
/// out with probability below 1e-9.
const MIN_RATE_TIMEOUT: f64 = 20.723265836946414;

/// Ground truth of a generated scenario, stored beside the matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticScenario {
    /// Exponential rate per configuration id.
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    /// Achieved fraction of epsilon-best configurations, `t / n`.
    pub alpha_realized: f64,
    pub seed: u64,
}

/// Head-to-head deficit of `lambda` against `lambda_max`, in `[0, 1]`.
fn pairwise_deficit(lambda: f64, lambda_max: f64) -> f64 {
    (lambda_max - lambda) / (lambda_max + lambda)
}

/// Configurations whose deficit against the fastest rate is at most
/// `epsilon`, in id order.
pub fn epsilon_best_set(lambdas: &[f64], epsilon: f64) -> Vec<ConfigId> {
    let lambda_max = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lambdas
        .iter()
        .enumerate()
        .filter(|(_, &l)| pairwise_deficit(l, lambda_max) <= epsilon)
        .map(|(i, _)| ConfigId(i))
        .collect()
}

/// Draw a runtime matrix from exponential rates: entry `(c, i)` is an
/// independent `Exp(lambdas[c])` draw, capped at the timeout.
pub fn matrix_from_lambdas(
    lambdas: &[f64],
    n_instances: usize,
    timeout: f64,
    seed: u64,
) -> Result<RuntimeMatrix> {
    if lambdas.is_empty() || n_instances == 0 {
        return Err(Error::InvalidParameter(
            "the matrix needs at least one configuration and one instance".to_string(),
        ));
    }
    for (i, &l) in lambdas.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate {i} must be a positive finite number, got {l}"
            )));
        }
    }
    let mut rng = SeededRng::new(seed).fork("matrix-draws");
    let mut values = Vec::with_capacity(lambdas.len() * n_instances);
    for &lambda in lambdas {
        let dist = Exp::new(lambda)
            .map_err(|e| Error::InvalidParameter(format!("invalid rate {lambda}: {e}")))?;
        for _ in 0..n_instances {
            let draw: f64 = dist.sample(&mut rng);
            // A zero draw is possible in principle and would be rejected
            // as a non-positive runtime; the cap is applied by the matrix
            // constructor, which also counts it.
            values.push(draw.max(1e-12));
        }
    }
    RuntimeMatrix::from_values(lambdas.len(), n_instances, timeout, values)
}

/// Generate a scenario with exactly `ceil(target_alpha * n)`
/// epsilon-best configurations, assigned to shuffled ids.
///
/// Relative rates are placed with margins on both sides of the band
/// edge `(1 - epsilon) / (1 + epsilon)`: members land in the top five
/// percent-of-band-width and above, non-members between thirty and
/// eighty percent of the edge. Rates are scaled so the slowest
/// configuration still satisfies `lambda * timeout >= 20.72`.
pub fn generate_exponential_scenario(
    n_configs: usize,
    n_instances: usize,
    target_alpha: f64,
    epsilon: f64,
    timeout: f64,
    seed: u64,
) -> Result<(RuntimeMatrix, SyntheticScenario)> {
    if n_configs < 2 {
        return Err(Error::InvalidParameter(format!(
            "the scenario needs at least 2 configurations, got {n_configs}"
        )));
    }
    if !(target_alpha > 0.0 && target_alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target_alpha must lie in (0, 1), got {target_alpha}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "timeout must be a positive finite number, got {timeout}"
        )));
    }
    let t = guarded_ceil(target_alpha * n_configs as f64) as usize;
    if t >= n_configs {
        return Err(Error::InfeasibleAlpha(format!(
            "target_alpha {target_alpha} makes all {n_configs} configurations epsilon-best; \
             no contrast is left to recover"
        )));
    }

    use rand::Rng;
    let rng = SeededRng::new(seed);
    let mut band_rng = rng.fork("band-draws");
    let low = (1.0 - epsilon) / (1.0 + epsilon);
    let mut rates = Vec::with_capacity(n_configs);
    // The anchor defines lambda_max; the rest of the band sits at least
    // five percent of the band width above the edge.
    rates.push(1.0);
    for _ in 1..t {
        rates.push(band_rng.random_range(low + 0.05 * (1.0 - low)..=1.0));
    }
    for _ in t..n_configs {
        rates.push(band_rng.random_range(0.30 * low..=0.80 * low));
    }
    shuffle(&mut rates, &mut rng.fork("assign"));

    let rel_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = MIN_RATE_TIMEOUT / (rel_min * timeout);
    let lambdas: Vec<f64> = rates.iter().map(|r| r * scale).collect();

    let matrix = matrix_from_lambdas(&lambdas, n_instances, timeout, seed)?;
    let scenario = SyntheticScenario {
        lambdas,
        epsilon,
        alpha_realized: t as f64 / n_configs as f64,
        seed,
    };
    Ok((matrix, scenario))
}

/// Rates drawn log-uniformly from `[lo, hi]`: a heavy-tailed spread
/// where a few configurations are far faster than the pack.
pub fn log_uniform_lambdas(
    n_configs: usize,
    lo: f64,
    hi: f64,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rate bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    use rand::Rng;
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    Ok((0..n_configs)
        .map(|_| rng.random_range(ln_lo..=ln_hi).exp())
        .collect())
}

/// Worst-case decision margins of an elimination schedule over these
/// rates: per round, the margin of the group holding the top rates.
///
/// While at least `k` configurations survive the group size is `k`;
/// afterwards it is the survivor count itself. The margin is the win
/// probability lead of the group's best rate over the first rate the
/// round would drop.
pub fn gap_profile(lambdas: &[f64], k: usize, rho: f64) -> Result<GapProfile> {
    if lambdas.len() < 2 {
        return Err(Error::MissingGapData(format!(
            "gap profiles need at least 2 rates, got {}",
            lambdas.len()
        )));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (_, sizes, _) = cse_shape(lambdas.len(), k, rho)?;
    let mut rounds = Vec::with_capacity(sizes.len());
    for (r, &size) in sizes.iter().enumerate() {
        let group_size = size.min(k);
        let keep = f_rho(group_size, rho)?;
        let group = &sorted[..group_size];
        let total: f64 = group.iter().sum();
        let gap = (group[0] - group[keep]) / total;
        rounds.push(RoundGap {
            round: r + 1,
            group_size,
            keep,
            gap,
        });
    }
    Ok(GapProfile { rounds })
}

/// Save scenario ground truth as a JSON sidecar.
pub fn save_scenario(path: &Path, scenario: &SyntheticScenario) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), scenario)?;
    Ok(())
}

/// Load scenario ground truth from a JSON sidecar.
pub fn load_scenario(path: &Path) -> Result<SyntheticScenario> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Load a runtime matrix from either on-disk format, telling them apart
/// by the binary magic rather than the file name.
pub fn load_matrix(path: &Path) -> Result<RuntimeMatrix> {
    let mut head = [0u8; 5];
    let n = File::open(path)?.read(&mut head)?;
    if n == head.len() && &head == BINARY_MAGIC {
        RuntimeMatrix::load_binary(path)
    } else {
        RuntimeMatrix::load_csv(path)
    }
}

fn shuffle(items: &mut [f64], rng: &mut SeededRng) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
