//! Shared vocabulary: configuration and instance identifiers, run
//! parameters, seeded randomness, and deterministic tie-breaking.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a parameter configuration within a scenario.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ConfigId(pub usize);

/// Index of a problem instance within a scenario.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct InstanceId(pub usize);

/// Parameters of one configuration run.
///
/// `alpha` is the assumed fraction of epsilon-best configurations, `delta`
/// the acceptable failure probability, and `n0` the nominal sample size
/// constrained to `(N, 2N]` where `N = n_alpha_delta(alpha, delta)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcBandParams {
    pub k: usize,
    pub alpha: f64,
    pub delta: f64,
    /// Suboptimality relaxation carried through to reports and budget
    /// formulas; the epoch schedule itself never reads it.
    pub epsilon: f64,
    pub n0: u64,
    /// Total number of distinct instances the run may consume.
    pub budget: usize,
    pub seed: u64,
}

impl AcBandParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.budget < 1 {
            return Err(Error::InvalidParameter(
                "budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Ceiling that tolerates values sitting a hair above an exact integer.
///
/// Schedule quantities such as `log2(n0 / (n0 - N))` are exact integers for
/// common parameter choices; floating-point noise must not push their
/// ceiling up by one.
pub(crate) fn guarded_ceil(x: f64) -> f64 {
    (x - 1e-9).ceil()
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic random stream with labelled forking.
///
/// Child streams derive from `(seed, label, indices)` rather than from the
/// parent's draw position, so the order in which forks are taken or
/// evaluated never shifts downstream sampling. Identical seeds therefore
/// yield bit-identical results regardless of host or thread count.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream for the given purpose label.
    pub fn fork(&self, label: &str) -> SeededRng {
        self.fork_with(label, &[])
    }

    /// Child stream for a labelled purpose plus positional indices, e.g.
    /// one stream per (round, partition).
    pub fn fork_with(&self, label: &str, indices: &[u64]) -> SeededRng {
        let mut h = fnv1a(0, label.as_bytes());
        for &i in indices {
            h = fnv1a(h, &i.to_le_bytes());
        }
        SeededRng::new(splitmix64(self.seed ^ h))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Order ids by score, highest first; equal scores are permuted uniformly
/// at random from `rng`.
///
/// Ties are broken by attaching one draw per entry in input order, so the
/// result is a pure function of `(scores, rng state)`.
pub fn rank_with_ties(scores: &[(ConfigId, f64)], rng: &mut SeededRng) -> Vec<ConfigId> {
    let mut keyed: Vec<(ConfigId, f64, u64)> = scores
        .iter()
        .map(|&(id, score)| (id, score, rng.next_u64()))
        .collect();
    keyed.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    keyed.into_iter().map(|(id, _, _)| id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn ranks_strictly_ordered_scores() {
        let mut rng = SeededRng::new(7);
        let scores = vec![
            (ConfigId(0), 0.1),
            (ConfigId(1), 0.9),
            (ConfigId(2), 0.5),
        ];
        let ranked = rank_with_ties(&scores, &mut rng);
        assert_eq!(ranked, vec![ConfigId(1), ConfigId(2), ConfigId(0)]);
    }

    #[test]
    fn tie_break_is_uniform_over_seeds_and_never_promotes_worse_scores() {
        // a and b tie; c is strictly worse and must come last every time.
        let scores = vec![
            (ConfigId(0), 1.0),
            (ConfigId(1), 1.0),
            (ConfigId(2), 0.2),
        ];
        let mut orders = BTreeSet::new();
        for seed in 0..64 {
            let mut rng = SeededRng::new(seed);
            let ranked = rank_with_ties(&scores, &mut rng);
            assert_eq!(ranked[2], ConfigId(2));
            orders.insert((ranked[0], ranked[1]));
        }
        assert_eq!(orders.len(), 2, "both tie orders should appear");
    }

    #[test]
    fn equal_seeds_give_bit_identical_rankings() {
        let scores: Vec<(ConfigId, f64)> =
            (0..20).map(|i| (ConfigId(i), (i % 5) as f64)).collect();
        let a = rank_with_ties(&scores, &mut SeededRng::new(42));
        let b = rank_with_ties(&scores, &mut SeededRng::new(42));
        assert_eq!(a, b);
    }

    #[test]
    fn forks_are_independent_of_draw_order() {
        let parent = SeededRng::new(3);
        let mut touched = SeededRng::new(3);
        let _ = touched.next_u64();
        let mut a = parent.fork_with("x", &[1, 2]);
        let mut b = touched.fork_with("x", &[1, 2]);
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = parent.fork_with("x", &[2, 1]);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn params_validation_rejects_out_of_range_values() {
        let base = AcBandParams {
            k: 2,
            alpha: 0.05,
            delta: 0.05,
            epsilon: 0.05,
            n0: 118,
            budget: 100,
            seed: 0,
        };
        assert!(base.validate().is_ok());
        let mut bad = base.clone();
        bad.k = 1;
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.alpha = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.epsilon = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = base;
        bad.budget = 0;
        assert!(bad.validate().is_err());
    }
}
