//! Random feasible sequences: the one downstream application built directly
//! on the basis finders.
//!
//! A random feasible sequence picks, step by step, a uniformly random element
//! that extends the current independent set. It is generated here without
//! sequential steps: draw one random permutation, compute the rank of every
//! prefix with parallel finder invocations, and keep exactly the elements
//! whose prefix rank jumps.

use serde::Serialize;

use crate::basis::{run_algorithm, Algo};
use crate::config::AlgorithmConfig;
use crate::decomposition::restrict_to;
use crate::error::Result;
use crate::oracle::MatroidView;
use crate::scheduler::{random_permutation, RoundLedger};
use crate::ElementId;

/// An ordered sequence whose every prefix is independent; its length is the
/// rank of the matroid.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeasibleSequence {
    pub elements: Vec<ElementId>,
    /// Rounds under parallel accounting (the n prefix-rank invocations run
    /// side by side; the cost is their maximum).
    pub rounds_parallel: u64,
    /// The same work counted sequentially, for comparison.
    pub rounds_sequential: u64,
}

/// Generate a random feasible sequence. Prefix ranks come from the exact
/// greedy scan when the ground set is small (n <= 512); above that the
/// requested finder runs once per prefix, in parallel, and the ledger is
/// charged the maximum round count across those invocations.
pub fn random_feasible_sequence(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    finder: Algo,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<FeasibleSequence> {
    let live = view.live_elements();
    let n = live.len();
    if n == 0 {
        return Ok(FeasibleSequence { elements: Vec::new(), rounds_parallel: 0, rounds_sequential: 0 });
    }
    let mut rng = ledger.fork_rng(label);
    let perm = random_permutation(&live, &mut rng);

    let mut ranks = Vec::with_capacity(n + 1);
    ranks.push(0usize);
    let (rounds_parallel, rounds_sequential);
    if n <= 512 || finder == Algo::Greedy {
        // All n greedy invocations share one trajectory (the greedy basis of
        // a prefix is the greedy scan truncated), so one sequential scan
        // answers every prefix rank at once.
        let mut kept: Vec<ElementId> = Vec::new();
        for &x in &perm {
            let mut probe = kept.clone();
            probe.push(x);
            let ans = ledger.submit_batch(&[crate::scheduler::Query::new(
                view,
                crate::scheduler::QuerySpec::Subset(probe),
            )])?;
            if ans[0].boolean() {
                kept.push(x);
            }
            ranks.push(kept.len());
        }
        rounds_parallel = n as u64;
        rounds_sequential = (n as u64 * (n as u64 + 1)) / 2;
    } else {
        // One finder run per prefix, each with its own sub-ledger; rounds
        // merge as the maximum, queries as the sum.
        let mut max_rounds = 0u64;
        let mut sum_rounds = 0u64;
        let mut per_round: Vec<u64> = Vec::new();
        for i in 1..=n {
            let restricted = restrict_to(view, &perm[..i])?;
            let sub = run_algorithm(finder, &restricted, cfg, ledger.seed ^ i as u64)?;
            ranks.push(sub.basis.len());
            max_rounds = max_rounds.max(sub.ledger.rounds);
            sum_rounds += sub.ledger.rounds;
            for (j, q) in sub.ledger.per_round.iter().enumerate() {
                if j >= per_round.len() {
                    per_round.push(0);
                }
                per_round[j] += q;
            }
        }
        for q in per_round {
            ledger.rounds += 1;
            ledger.total_queries += q;
            ledger.per_round.push(q);
        }
        rounds_parallel = max_rounds;
        rounds_sequential = sum_rounds;
    }

    let elements: Vec<ElementId> =
        (1..=n).filter(|&j| ranks[j] == ranks[j - 1] + 1).map(|j| perm[j - 1]).collect();
    debug_assert!(view.is_independent(&elements)?, "sequence prefix must stay independent");
    Ok(FeasibleSequence { elements, rounds_parallel, rounds_sequential })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::MatroidInstance;

    #[test]
    fn triangle_sequence_is_two_earliest_edges() {
        let v = MatroidView::of(
            MatroidInstance::graphic(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap(),
        );
        let mut ledger = RoundLedger::new(5);
        let cfg = AlgorithmConfig::default();
        let s = random_feasible_sequence(&v, &cfg, Algo::Greedy, &mut ledger, "seq").unwrap();
        assert_eq!(s.elements.len(), 2);
        assert!(v.is_independent(&s.elements).unwrap());
    }

    #[test]
    fn free_matroid_sequence_is_full_permutation() {
        let v = MatroidView::of(MatroidInstance::uniform(5, 5));
        let mut ledger = RoundLedger::new(6);
        let cfg = AlgorithmConfig::default();
        let s = random_feasible_sequence(&v, &cfg, Algo::Greedy, &mut ledger, "seq").unwrap();
        assert_eq!(s.elements.len(), 5);
        let mut sorted = s.elements.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn uniform_sequence_takes_first_r_of_permutation() {
        let v = MatroidView::of(MatroidInstance::uniform(4, 2));
        let cfg = AlgorithmConfig::default();
        for seed in 0..20 {
            let mut ledger = RoundLedger::new(seed);
            let s = random_feasible_sequence(&v, &cfg, Algo::Greedy, &mut ledger, "seq").unwrap();
            assert_eq!(s.elements.len(), 2);
            assert_ne!(s.elements[0], s.elements[1]);
        }
    }

    #[test]
    fn every_prefix_is_independent() {
        let m = MatroidInstance::direct_sum(vec![
            MatroidInstance::uniform(6, 2),
            MatroidInstance::uniform(4, 1),
        ]);
        let v = MatroidView::of(m);
        let cfg = AlgorithmConfig::default();
        for seed in 0..10 {
            let mut ledger = RoundLedger::new(seed);
            let s = random_feasible_sequence(&v, &cfg, Algo::Greedy, &mut ledger, "seq").unwrap();
            for i in 1..=s.elements.len() {
                assert!(v.is_independent(&s.elements[..i]).unwrap());
            }
            assert_eq!(s.elements.len(), 3);
        }
    }
}
