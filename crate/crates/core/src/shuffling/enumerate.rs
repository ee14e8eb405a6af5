//! Exact permutation distributions by exhaustive enumeration of a
//! shuffler's internal random decisions.
//!
//! Supports are indexed by Lehmer rank so a distribution over all `n!`
//! permutations is a dense probability vector.

use crate::error::{Error, Result};

use super::{apply_riffle_word, apply_top_to_random, ShuffleAlgorithm, ShufflerSpec};

/// Guard against accidental factorial blowups; roughly the number of atomic
/// outcomes an enumeration may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Lehmer rank of a permutation of `0..n` (lexicographic index).
pub fn permutation_rank(perm: &[usize]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller_after = perm[i + 1..].iter().filter(|&&v| v < perm[i]).count();
        rank = rank * (n - i) + smaller_after;
    }
    rank
}

/// Inverse of [`permutation_rank`].
pub fn permutation_unrank(n: usize, mut rank: usize) -> Vec<usize> {
    let mut digits = vec![0usize; n];
    for i in (0..n).rev() {
        let base = n - i;
        digits[i] = rank % base;
        rank /= base;
    }
    let mut pool: Vec<usize> = (0..n).collect();
    digits
        .into_iter()
        .map(|d| pool.remove(d))
        .collect()
}

/// Exact probability `v_π` for every permutation `π` of `0..n`.
#[derive(Debug, Clone)]
pub struct PermutationDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl PermutationDistribution {
    pub fn uniform(n: usize) -> Self {
        let size = factorial(n);
        Self {
            n,
            probs: vec![1.0 / size as f64; size],
        }
    }

    fn point_mass(n: usize, perm: &[usize]) -> Self {
        let mut probs = vec![0.0; factorial(n)];
        probs[permutation_rank(perm)] = 1.0;
        Self { n, probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, perm: &[usize]) -> f64 {
        self.probs[permutation_rank(perm)]
    }

    pub fn prob_by_rank(&self, rank: usize) -> f64 {
        self.probs[rank]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Iterate `(permutation, probability)` pairs in rank order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(rank, &p)| (permutation_unrank(self.n, rank), p))
    }

    /// Total-variation distance to the uniform distribution.
    pub fn tv_to_uniform(&self) -> f64 {
        let u = 1.0 / self.probs.len() as f64;
        0.5 * self.probs.iter().map(|&p| (p - u).abs()).sum::<f64>()
    }

    /// Total-variation distance to another distribution on the same n.
    pub fn tv_to(&self, other: &Self) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
    }
}

fn enumeration_cost(spec: &ShufflerSpec, n: usize) -> u128 {
    let fact = (1..=n as u128).product::<u128>();
    match spec.algorithm {
        ShuffleAlgorithm::FisherYates => fact,
        ShuffleAlgorithm::Riffle => u128::from(spec.rounds.max(1)) * (1u128 << n) * fact,
        ShuffleAlgorithm::TopToRandom => u128::from(spec.rounds.max(1)) * n as u128 * fact,
        ShuffleAlgorithm::Identity => 1,
    }
}

/// Exact output distribution of `spec` on `n` items, enumerating every
/// internal random decision: all `∏ (n-k)` Fisher-Yates branch choices, all
/// `2^n` riffle cut/interleave words per round, all `n` top-to-random
/// insertion positions per round.
pub fn enumerate_distribution(spec: &ShufflerSpec, n: usize) -> Result<PermutationDistribution> {
    enumerate_distribution_with_budget(spec, n, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_distribution_with_budget(
    spec: &ShufflerSpec,
    n: usize,
    budget: u128,
) -> Result<PermutationDistribution> {
    if n < 1 {
        return Err(Error::InvalidSpec("n must be >= 1".into()));
    }
    if n > 12 {
        // 13! overflows the rank space long before any budget is relevant.
        return Err(Error::BudgetExceeded {
            required: u128::MAX,
            budget,
        });
    }
    let required = enumeration_cost(spec, n);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let identity: Vec<usize> = (0..n).collect();
    let dist = match spec.algorithm {
        ShuffleAlgorithm::Identity => PermutationDistribution::point_mass(n, &identity),
        ShuffleAlgorithm::FisherYates => {
            let mut probs = vec![0.0; factorial(n)];
            let mut deck = identity;
            fisher_yates_branches(&mut deck, 0, 1.0, &mut probs);
            PermutationDistribution { n, probs }
        }
        ShuffleAlgorithm::Riffle => {
            let mut dist = PermutationDistribution::point_mass(n, &identity);
            let word_prob = 1.0 / (1u64 << n) as f64;
            let mut bits = vec![false; n];
            for _ in 0..spec.rounds {
                let mut next = vec![0.0; dist.probs.len()];
                for (rank, &p) in dist.probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let perm = permutation_unrank(n, rank);
                    for word in 0u64..(1 << n) {
                        for (k, bit) in bits.iter_mut().enumerate() {
                            *bit = (word >> k) & 1 == 1;
                        }
                        let mut deck = perm.clone();
                        apply_riffle_word(&mut deck, &bits);
                        next[permutation_rank(&deck)] += p * word_prob;
                    }
                }
                dist.probs = next;
            }
            dist
        }
        ShuffleAlgorithm::TopToRandom => {
            let mut dist = PermutationDistribution::point_mass(n, &identity);
            let pos_prob = 1.0 / n as f64;
            for _ in 0..spec.rounds {
                let mut next = vec![0.0; dist.probs.len()];
                for (rank, &p) in dist.probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let perm = permutation_unrank(n, rank);
                    for j in 0..n {
                        let mut deck = perm.clone();
                        apply_top_to_random(&mut deck, j);
                        next[permutation_rank(&deck)] += p * pos_prob;
                    }
                }
                dist.probs = next;
            }
            dist
        }
    };
    debug_assert!((dist.total() - 1.0).abs() < 1e-12);
    Ok(dist)
}

/// Depth-first walk over all Fisher-Yates branch choices.
fn fisher_yates_branches(deck: &mut Vec<usize>, step: usize, prob: f64, out: &mut [f64]) {
    let n = deck.len();
    if step + 1 >= n {
        out[permutation_rank(deck)] += prob;
        return;
    }
    let branches = n - step;
    let child = prob / branches as f64;
    for j in step..n {
        deck.swap(step, j);
        fisher_yates_branches(deck, step + 1, child, out);
        deck.swap(step, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomnessSource;
    use crate::shuffling::shuffle;
    use std::collections::HashMap;

    #[test]
    fn rank_unrank_roundtrip() {
        for n in 1..=6 {
            for rank in 0..factorial(n) {
                let perm = permutation_unrank(n, rank);
                assert_eq!(permutation_rank(&perm), rank);
            }
        }
    }

    #[test]
    fn fisher_yates_is_exactly_uniform() {
        for n in 2..=5 {
            let dist = enumerate_distribution(&ShufflerSpec::fisher_yates(), n).unwrap();
            let u = 1.0 / factorial(n) as f64;
            for (_, p) in dist.iter() {
                assert!((p - u).abs() < 1e-15, "n={n}: p={p} vs uniform {u}");
            }
        }
    }

    #[test]
    fn identity_is_a_point_mass() {
        let dist = enumerate_distribution(&ShufflerSpec::identity(), 3).unwrap();
        assert_eq!(dist.prob(&[0, 1, 2]), 1.0);
        assert_eq!(dist.prob(&[0, 2, 1]), 0.0);
    }

    #[test]
    fn top_to_random_one_round_n3() {
        // Three insertion positions, each 1/3: (0,1,2), (1,0,2), (1,2,0).
        let dist = enumerate_distribution(&ShufflerSpec::top_to_random(1), 3).unwrap();
        let third = 1.0 / 3.0;
        assert!((dist.prob(&[0, 1, 2]) - third).abs() < 1e-15);
        assert!((dist.prob(&[1, 0, 2]) - third).abs() < 1e-15);
        assert!((dist.prob(&[1, 2, 0]) - third).abs() < 1e-15);
        assert_eq!(dist.prob(&[2, 1, 0]), 0.0);
    }

    #[test]
    fn riffle_one_round_n3_exact() {
        // Eight equally likely bit words collapse to:
        // (0,1,2) 1/2; (0,2,1), (2,0,1), (1,0,2), (1,2,0) each 1/8.
        let dist = enumerate_distribution(&ShufflerSpec::riffle(1), 3).unwrap();
        assert!((dist.prob(&[0, 1, 2]) - 0.5).abs() < 1e-15);
        for perm in [[0, 2, 1], [2, 0, 1], [1, 0, 2], [1, 2, 0]] {
            assert!((dist.prob(&perm) - 0.125).abs() < 1e-15);
        }
        assert_eq!(dist.prob(&[2, 1, 0]), 0.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for spec in [
            ShufflerSpec::fisher_yates(),
            ShufflerSpec::riffle(3),
            ShufflerSpec::top_to_random(5),
            ShufflerSpec::identity(),
        ] {
            let dist = enumerate_distribution(&spec, 4).unwrap();
            assert!((dist.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_guard_fires() {
        let spec = ShufflerSpec::riffle(1_000_000);
        assert!(matches!(
            enumerate_distribution(&spec, 6),
            Err(crate::Error::BudgetExceeded { .. })
        ));
    }

    /// Sampled histogram agrees with the enumeration: the sampler and the
    /// enumerator share the same decision mechanics.
    #[test]
    fn monte_carlo_matches_enumeration() {
        let trials = 200_000;
        for spec in [ShufflerSpec::riffle(1), ShufflerSpec::top_to_random(1)] {
            let dist = enumerate_distribution(&spec, 3).unwrap();
            let mut rng = RandomnessSource::from_seed(99);
            let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
            for _ in 0..trials {
                let p = shuffle(&spec, 3, &mut rng).unwrap();
                *counts.entry(p.into_vec()).or_default() += 1;
            }
            let mut tv = 0.0;
            for (perm, p) in dist.iter() {
                let emp = counts.get(&perm).copied().unwrap_or(0) as f64 / trials as f64;
                tv += (p - emp).abs();
            }
            assert!(tv / 2.0 < 0.005, "{}: tv {}", spec.label(), tv / 2.0);
        }
    }

    /// Monotone mixing: TV to uniform is non-increasing in the round count.
    #[test]
    fn mixing_is_monotone_in_rounds() {
        for make in [ShufflerSpec::riffle, ShufflerSpec::top_to_random] {
            let mut last = f64::INFINITY;
            for h in 0..=8 {
                let dist = enumerate_distribution(&make(h), 4).unwrap();
                let tv = dist.tv_to_uniform();
                assert!(
                    tv <= last + 1e-12,
                    "{}: tv rose from {last} to {tv}",
                    make(h).label()
                );
                last = tv;
            }
        }
    }
}
