//! Sampling-based statistics over a target set S: first-circuit samples, the
//! circuit-mass estimate q̂ for arbitrary subsets, hitting probabilities p̂,
//! the dependence threshold estimate α̂, per-element marginals, and grouped
//! circuit-size statistics with witness circuits.
//!
//! One pooled [`CircuitSample`] backs q̂/p̂/ŵ for a given S so their rounds
//! are shared. Samples that form no circuit count as circuits of size zero in
//! means and are excluded from per-element conditioning.

use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::config::AlgorithmConfig;
use crate::error::{Error, Result};
use crate::oracle::{Circuit, MatroidView};
use crate::scheduler::{random_permutation, Query, QuerySpec, RoundLedger};
use crate::ElementId;

/// First circuits of independently drawn uniform permutations of a target
/// set. Entries where the whole permutation stayed independent are `None`.
#[derive(Debug, Clone)]
pub struct CircuitSample {
    pub target: Vec<ElementId>,
    pub circuits: Vec<Option<Circuit>>,
    target_set: FixedBitSet,
    ground: usize,
}

/// Estimated dependence threshold for a set: the least sampled k at which a
/// random k-subset is independent at most half the time. `target_size + 1`
/// is the sentinel for "never dependent at the sampled sizes".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaEstimate {
    pub value: usize,
    pub target_size: usize,
}

impl AlphaEstimate {
    pub fn is_sentinel(&self) -> bool {
        self.value > self.target_size
    }

    /// The value with the sentinel clamped into range, for formulas that need
    /// a finite α.
    pub fn clamped(&self) -> usize {
        self.value.min(self.target_size.max(1))
    }
}

/// Per-element marginal circuit probabilities p̂_i over a sample.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    pub probs: HashMap<ElementId, f64>,
    pub sample_count: usize,
}

impl MarginalTable {
    pub fn p(&self, x: ElementId) -> f64 {
        self.probs.get(&x).copied().unwrap_or(0.0)
    }

    /// Σ p̂_i; by construction equals the mean sampled circuit size (with
    /// circuit-free samples contributing zero).
    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }
}

impl CircuitSample {
    /// Assemble a sample from already-extracted circuits (used when a sample
    /// is filtered down to a smaller target).
    pub fn from_parts(
        mut target: Vec<ElementId>,
        circuits: Vec<Option<Circuit>>,
        ground: usize,
    ) -> Self {
        target.sort_unstable();
        let mut target_set = FixedBitSet::with_capacity(ground);
        for &x in &target {
            target_set.insert(x as usize);
        }
        CircuitSample { target, circuits, target_set, ground }
    }

    pub fn sample_count(&self) -> usize {
        self.circuits.len()
    }

    pub fn contains_target(&self, x: ElementId) -> bool {
        self.target_set.contains(x as usize)
    }

    fn check_subset(&self, t: &[ElementId]) -> Result<()> {
        for &x in t {
            if !self.contains_target(x) {
                return Err(Error::ElementOutOfRange { element: x });
            }
        }
        Ok(())
    }

    pub fn bitset_of(&self, t: &[ElementId]) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(self.ground);
        for &x in t {
            b.insert(x as usize);
        }
        b
    }

    /// Number of samples whose circuit formed entirely inside `t`.
    pub fn count_within(&self, t: &FixedBitSet) -> usize {
        self.circuits
            .iter()
            .filter(|c| {
                c.as_ref().is_some_and(|c| c.members().iter().all(|&x| t.contains(x as usize)))
            })
            .count()
    }

    /// Number of samples whose circuit intersects `t`.
    pub fn count_hitting(&self, t: &FixedBitSet) -> usize {
        self.circuits
            .iter()
            .filter(|c| {
                c.as_ref().is_some_and(|c| c.members().iter().any(|&x| t.contains(x as usize)))
            })
            .count()
    }

    /// Per-element circuit membership counts.
    pub fn hit_counts(&self) -> HashMap<ElementId, usize> {
        let mut h: HashMap<ElementId, usize> = HashMap::new();
        for c in self.circuits.iter().flatten() {
            for &x in c.members() {
                *h.entry(x).or_default() += 1;
            }
        }
        h
    }

    /// Indices of samples whose circuit contains `x`, in draw order.
    pub fn circuits_containing(&self, x: ElementId) -> Vec<usize> {
        self.circuits
            .iter()
            .enumerate()
            .filter(|(_, c)| c.as_ref().is_some_and(|c| c.contains(x)))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Least dependent prefix of `order` and the unique circuit inside it, in two
/// batched rounds (one when no prefix is dependent).
pub fn first_circuit(
    view: &MatroidView,
    order: &[ElementId],
    ledger: &mut RoundLedger,
) -> Result<(Option<usize>, Option<Circuit>)> {
    let order = Arc::new(order.to_vec());
    let ans =
        ledger.submit_batch(&[Query::new(view, QuerySpec::PrefixScan { order: order.clone() })])?;
    let Some(len) = ans[0].first_dependent() else {
        return Ok((None, None));
    };
    let ans = ledger
        .submit_batch(&[Query::new(view, QuerySpec::DropScan { order: order.clone(), len })])?;
    let circuit = circuit_from_drop_flags(&order, len, ans[0].flags());
    #[cfg(debug_assertions)]
    assert_circuit_minimal(view, &circuit);
    Ok((Some(len), Some(circuit)))
}

/// Removing a circuit member leaves an independent set; removing anything
/// else keeps the circuit intact. So the circuit is exactly the positions
/// whose removal answered "independent".
fn circuit_from_drop_flags(order: &[ElementId], len: usize, flags: &[bool]) -> Circuit {
    let members: Vec<ElementId> =
        order[..len].iter().zip(flags).filter(|(_, &indep)| indep).map(|(&x, _)| x).collect();
    Circuit::new(members)
}

/// Sequential greedy rank: |set| oracle calls, one round each. The batched
/// algorithms never need this; it exists as the model-faithful slow path and
/// for validity checking at small n.
pub fn greedy_rank(
    view: &MatroidView,
    set: &[ElementId],
    ledger: &mut RoundLedger,
) -> Result<usize> {
    let mut kept: Vec<ElementId> = Vec::new();
    for &x in set {
        let mut probe = kept.clone();
        probe.push(x);
        let ans = ledger.submit_batch(&[Query::new(view, QuerySpec::Subset(probe))])?;
        if ans[0].boolean() {
            kept.push(x);
        }
    }
    Ok(kept.len())
}

/// Draw `m` independent uniform permutations of `target` and extract each
/// one's first circuit. Two batched rounds shared across all permutations
/// (one if no circuit forms anywhere).
pub fn sample_first_circuits(
    view: &MatroidView,
    target: &[ElementId],
    m: usize,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<CircuitSample> {
    assert!(m >= 1, "sample count must be positive");
    let mut rng = ledger.fork_rng(label);
    let orders: Vec<Arc<Vec<ElementId>>> =
        (0..m).map(|_| Arc::new(random_permutation(target, &mut rng))).collect();

    let scan_batch: Vec<Query> = orders
        .iter()
        .map(|o| Query::new(view, QuerySpec::PrefixScan { order: o.clone() }))
        .collect();
    let scans = ledger.submit_chunked(&scan_batch)?;
    let first_dep: Vec<Option<usize>> = scans.iter().map(|a| a.first_dependent()).collect();

    let probe_batch: Vec<Query> = orders
        .iter()
        .zip(&first_dep)
        .filter_map(|(o, fd)| {
            fd.map(|len| Query::new(view, QuerySpec::DropScan { order: o.clone(), len }))
        })
        .collect();
    let probes =
        if probe_batch.is_empty() { Vec::new() } else { ledger.submit_chunked(&probe_batch)? };

    let mut circuits = Vec::with_capacity(m);
    let mut probe_iter = probes.iter();
    for (o, fd) in orders.iter().zip(&first_dep) {
        match fd {
            None => circuits.push(None),
            Some(len) => {
                let flags = probe_iter.next().expect("one probe per dependent order").flags();
                let c = circuit_from_drop_flags(o, *len, flags);
                #[cfg(debug_assertions)]
                assert_circuit_minimal(view, &c);
                circuits.push(Some(c));
            }
        }
    }

    let ground = view.ground_size();
    let mut target_set = FixedBitSet::with_capacity(ground);
    for &x in target {
        target_set.insert(x as usize);
    }
    let mut target = target.to_vec();
    target.sort_unstable();
    Ok(CircuitSample { target, circuits, target_set, ground })
}

/// Test-build check that an extracted circuit is dependent and every
/// one-element removal independent. Full check up to 64 members, spot checks
/// beyond.
#[cfg(debug_assertions)]
pub fn assert_circuit_minimal(view: &MatroidView, c: &Circuit) {
    let members = c.members();
    assert!(!members.is_empty(), "extracted circuit is empty");
    assert!(
        !view.is_independent(members).expect("circuit members live"),
        "extracted circuit is independent: {members:?}"
    );
    let step = if members.len() <= 64 { 1 } else { members.len() / 8 };
    for i in (0..members.len()).step_by(step.max(1)) {
        let sub: Vec<ElementId> =
            members.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
        assert!(
            view.is_independent(&sub).expect("circuit members live"),
            "circuit not minimal at {}",
            members[i]
        );
    }
}

/// q̂_T: fraction of samples whose circuit formed and lies inside T.
pub fn estimate_q(sample: &CircuitSample, t: &[ElementId]) -> Result<f64> {
    sample.check_subset(t)?;
    let tb = sample.bitset_of(t);
    Ok(sample.count_within(&tb) as f64 / sample.sample_count() as f64)
}

/// p̂_T: fraction of samples whose circuit intersects T.
pub fn estimate_hitting(sample: &CircuitSample, t: &[ElementId]) -> Result<f64> {
    sample.check_subset(t)?;
    let tb = sample.bitset_of(t);
    Ok(sample.count_hitting(&tb) as f64 / sample.sample_count() as f64)
}

/// p̂_i for every element of the target.
pub fn estimate_marginals(sample: &CircuitSample) -> MarginalTable {
    assert!(sample.sample_count() > 0, "empty sample");
    let m = sample.sample_count() as f64;
    let mut probs: HashMap<ElementId, f64> = sample.target.iter().map(|&x| (x, 0.0)).collect();
    for (x, hits) in sample.hit_counts() {
        probs.insert(x, hits as f64 / m);
    }
    MarginalTable { probs, sample_count: sample.sample_count() }
}

/// α̂: least sampled k whose random k-subsets are independent at most half
/// the time. One shared round over the whole k-grid. k is swept densely up to
/// `alpha_dense_cap` and geometrically beyond (the ground size itself is
/// always sampled), which keeps the estimate inside [(α−1)/2, 2α] on the
/// dense range and within a factor 4 above it.
pub fn estimate_alpha(
    view: &MatroidView,
    target: &[ElementId],
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<AlphaEstimate> {
    let s = target.len();
    assert!(s >= 1, "alpha needs a nonempty target");
    let elems = Arc::new(target.to_vec());

    let mut grid: Vec<usize> = (1..=s.min(cfg.alpha_dense_cap)).collect();
    let mut k = cfg.alpha_dense_cap;
    while k < s {
        k = (k * 2).min(s);
        grid.push(k);
    }

    // Geometric grid points sit at a comfortable margin from the 1/2
    // threshold, so they need far fewer draws than the dense sweep.
    let draws_at = |k: usize| if k <= cfg.alpha_dense_cap { cfg.m_alpha } else { cfg.m_alpha.min(512) };

    let mut rng = ledger.fork_rng(label);
    use rand::Rng;
    let batch: Vec<Query> = grid
        .iter()
        .map(|&k| {
            Query::new(
                view,
                QuerySpec::RandomKSubsets {
                    elems: elems.clone(),
                    k,
                    count: draws_at(k),
                    stream: rng.random(),
                },
            )
        })
        .collect();
    let answers = ledger.submit_chunked(&batch)?;

    for (&k, ans) in grid.iter().zip(&answers) {
        let independent = ans.flags().iter().filter(|&&b| b).count();
        if independent * 2 <= draws_at(k) {
            return Ok(AlphaEstimate { value: k, target_size: s });
        }
    }
    Ok(AlphaEstimate { value: s + 1, target_size: s })
}

/// Grouped circuit-size statistic for element `i` against the barrier set:
/// the pooled circuits containing `i` are split into `groups` groups of
/// `group_size`; the estimate is the mean over groups of the group-minimum
/// |C ∖ barrier|, and the witness is the overall minimizer.
pub fn estimate_w(
    sample: &CircuitSample,
    i: ElementId,
    barrier: &[ElementId],
    group_size: usize,
    groups: usize,
) -> Result<(f64, Circuit)> {
    let holding = sample.circuits_containing(i);
    if holding.is_empty() {
        return Err(Error::NoCircuitForElement { element: i });
    }
    let need = group_size.max(1) * groups.max(1);
    if holding.len() < need {
        return Err(Error::InsufficientSample { element: i, have: holding.len(), need });
    }
    let tb = sample.bitset_of(barrier);
    let outside = |idx: usize| -> usize {
        sample.circuits[idx].as_ref().expect("holding index").members_outside(&tb)
    };

    let mut group_min_sum = 0usize;
    let mut best: Option<(usize, usize)> = None; // (size outside barrier, circuit index)
    for g in 0..groups.max(1) {
        let mut gmin: Option<(usize, usize)> = None;
        for &idx in &holding[g * group_size.max(1)..(g + 1) * group_size.max(1)] {
            let sz = outside(idx);
            if gmin.is_none_or(|(m, _)| sz < m) {
                gmin = Some((sz, idx));
            }
        }
        let (m, idx) = gmin.expect("nonempty group");
        group_min_sum += m;
        if best.is_none_or(|(b, _)| m < b) {
            best = Some((m, idx));
        }
    }
    let (_, best_idx) = best.expect("at least one group");
    let w_hat = group_min_sum as f64 / groups.max(1) as f64;
    Ok((w_hat, sample.circuits[best_idx].clone().expect("holding index")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::MatroidInstance;

    fn sample_of(
        m: MatroidInstance,
        count: usize,
        seed: u64,
    ) -> (MatroidView, CircuitSample, RoundLedger) {
        let view = MatroidView::of(m);
        let mut ledger = RoundLedger::new(seed);
        let live = view.live_elements();
        let s = sample_first_circuits(&view, &live, count, &mut ledger, "test").unwrap();
        (view, s, ledger)
    }

    #[test]
    fn free_matroid_has_no_circuits() {
        let (_, s, ledger) = sample_of(MatroidInstance::uniform(6, 6), 200, 1);
        assert!(s.circuits.iter().all(|c| c.is_none()));
        // No dependent prefix anywhere: the probe round is skipped.
        assert_eq!(ledger.rounds, 1);
        let all: Vec<ElementId> = (0..6).collect();
        assert_eq!(estimate_q(&s, &all).unwrap(), 0.0);
    }

    #[test]
    fn uniform_circuits_have_size_r_plus_1() {
        let (_, s, _) = sample_of(MatroidInstance::uniform(5, 2), 500, 2);
        for c in s.circuits.iter().flatten() {
            assert_eq!(c.len(), 3);
        }
        assert_eq!(estimate_q(&s, &[0, 1, 2, 3, 4]).unwrap(), 1.0);
        assert_eq!(estimate_q(&s, &[]).unwrap(), 0.0);
    }

    #[test]
    fn first_circuit_on_fixed_order() {
        let view = MatroidView::of(MatroidInstance::uniform(5, 2));
        let mut ledger = RoundLedger::new(0);
        let (len, c) = first_circuit(&view, &[0, 1, 2, 3, 4], &mut ledger).unwrap();
        assert_eq!(len, Some(3));
        assert_eq!(c.unwrap().members(), &[0, 1, 2]);
        assert_eq!(ledger.rounds, 2);
    }

    #[test]
    fn first_circuit_partition_example() {
        // Blocks {0,1},{2,3} cap 1, order (0,2,1,3): {0,1} is the only
        // circuit inside the first dependent prefix.
        let m = MatroidInstance::partition(vec![0, 0, 1, 1], vec![1, 1]).unwrap();
        let view = MatroidView::of(m);
        let mut ledger = RoundLedger::new(0);
        let (len, c) = first_circuit(&view, &[0, 2, 1, 3], &mut ledger).unwrap();
        assert_eq!(len, Some(3));
        assert_eq!(c.unwrap().members(), &[0, 1]);
    }

    #[test]
    fn direct_sum_circuits_stay_in_the_dependent_block() {
        // uniform(4,1) ⊕ free(6): all circuits live in the first block.
        let m = MatroidInstance::direct_sum(vec![
            MatroidInstance::uniform(4, 1),
            MatroidInstance::uniform(6, 6),
        ]);
        let (_, s, _) = sample_of(m, 400, 3);
        let block: Vec<ElementId> = (0..4).collect();
        assert_eq!(estimate_q(&s, &block).unwrap(), 1.0);
        for c in s.circuits.iter().flatten() {
            assert!(c.members().iter().all(|&x| x < 4));
        }
    }

    #[test]
    fn marginal_identity_is_exact() {
        let (_, s, _) = sample_of(MatroidInstance::uniform(12, 4), 2000, 4);
        let table = estimate_marginals(&s);
        let mean_size: f64 = s
            .circuits
            .iter()
            .map(|c| c.as_ref().map_or(0, Circuit::len) as f64)
            .sum::<f64>()
            / s.sample_count() as f64;
        assert!((table.total_mass() - mean_size).abs() < 1e-9);
    }

    #[test]
    fn hitting_is_monotone_and_consistent_with_marginals() {
        let (_, s, _) = sample_of(MatroidInstance::uniform(10, 3), 3000, 5);
        let p1 = estimate_hitting(&s, &[0]).unwrap();
        let p2 = estimate_hitting(&s, &[0, 1]).unwrap();
        let all: Vec<ElementId> = (0..10).collect();
        let pall = estimate_hitting(&s, &all).unwrap();
        assert!(p1 <= p2 && p2 <= pall);
        let table = estimate_marginals(&s);
        assert!((table.p(0) - p1).abs() < 1e-12);
    }

    #[test]
    fn uniform_20_9_singleton_hitting_near_half() {
        // Every first circuit is the first 10 of 20 elements by symmetry, so
        // exact p_i = 0.5.
        let (_, s, _) = sample_of(MatroidInstance::uniform(20, 9), 10_000, 6);
        let p = estimate_hitting(&s, &[7]).unwrap();
        assert!((0.45..=0.55).contains(&p), "p̂ = {p}");
        let all: Vec<ElementId> = (0..20).collect();
        assert_eq!(estimate_hitting(&s, &all).unwrap(), 1.0);
    }

    #[test]
    fn subset_outside_target_is_domain_error() {
        let (_, s, _) = sample_of(MatroidInstance::uniform(4, 2), 10, 7);
        assert!(matches!(estimate_q(&s, &[9]), Err(Error::ElementOutOfRange { element: 9 })));
    }

    #[test]
    fn alpha_on_uniform_is_exact_on_the_dense_grid() {
        let view = MatroidView::of(MatroidInstance::uniform(200, 50));
        let mut ledger = RoundLedger::new(8);
        let cfg = AlgorithmConfig::default();
        let a = estimate_alpha(&view, &view.live_elements(), &cfg, &mut ledger, "a").unwrap();
        assert_eq!(a.value, 51);
        assert_eq!(ledger.rounds, 1);
    }

    #[test]
    fn alpha_sentinel_on_free_matroid() {
        let view = MatroidView::of(MatroidInstance::uniform(10, 10));
        let mut ledger = RoundLedger::new(9);
        let cfg = AlgorithmConfig::default();
        let a = estimate_alpha(&view, &view.live_elements(), &cfg, &mut ledger, "a").unwrap();
        assert_eq!(a.value, 11);
        assert!(a.is_sentinel());
    }

    #[test]
    fn w_estimate_on_parallel_pair() {
        // Identity columns plus a repeated column: elements 2 and 3 are
        // parallel, so {2,3} is the only circuit.
        let m = MatroidInstance::linear(2, 3, &[1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1]).unwrap();
        let (_, s, _) = sample_of(m, 2000, 10);
        let table = estimate_marginals(&s);
        assert!((table.p(2) - table.p(3)).abs() < 1e-12);
        assert_eq!(table.p(0), 0.0);
        let (w, witness) = estimate_w(&s, 2, &[], 8, 8).unwrap();
        assert!(w <= 2.0 + 1e-12);
        assert_eq!(witness.members(), &[2, 3]);
        assert!(matches!(
            estimate_w(&s, 0, &[], 2, 2),
            Err(Error::NoCircuitForElement { element: 0 })
        ));
    }

    #[test]
    fn insufficient_sample_is_reported() {
        let (_, s, _) = sample_of(MatroidInstance::uniform(5, 2), 4, 11);
        match estimate_w(&s, 0, &[], 32, 32) {
            Err(Error::InsufficientSample { need, .. }) => assert_eq!(need, 1024),
            Err(Error::NoCircuitForElement { .. }) => {}
            other => panic!("expected sampling failure, got {other:?}"),
        }
    }

    #[test]
    fn greedy_rank_counts_rounds_sequentially() {
        let view = MatroidView::of(MatroidInstance::uniform(10, 4));
        let mut ledger = RoundLedger::new(12);
        let all = view.live_elements();
        let r = greedy_rank(&view, &all, &mut ledger).unwrap();
        assert_eq!(r, 4);
        assert_eq!(ledger.rounds, 10);
    }
}
