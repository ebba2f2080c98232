//! Single-round progress subroutines: contracting large independent sets,
//! recovering redundant elements via random-prefix span sweeps, the core /
//! non-core split, short-circuit bulk deletion, and the balanced combination
//! that picks whichever route certifies more deletions.
//!
//! Every deletion emitted here is span-sound: each deleted element lies in
//! the span of elements that remain, so the live rank never drops. With
//! `verify_deletions` enabled this is re-checked against the oracle after
//! every batch.

use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::config::AlgorithmConfig;
use crate::error::{Error, Result};
use crate::estimators::{estimate_marginals, estimate_w, AlphaEstimate, CircuitSample};
use crate::oracle::{Circuit, MatroidView};
use crate::scheduler::{random_permutation, Query, QuerySpec, RoundLedger};
use crate::ElementId;

/// Split of a peeled set by marginal circuit probability against the
/// threshold τ = α̂²/|S|².
#[derive(Debug, Clone)]
pub struct CoreSplit {
    pub core: Vec<ElementId>,
    pub non_core: Vec<ElementId>,
    /// Σ of marginals over the non-core side.
    pub non_core_mass: f64,
    pub threshold: f64,
}

impl CoreSplit {
    pub fn is_majority_core(&self) -> bool {
        self.core.len() * 2 >= self.core.len() + self.non_core.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeletionMethod {
    /// Random-prefix span sweep over the whole set.
    PrefixSpan,
    /// Span sweep credited to the core side of the split.
    CoreRecovery,
    /// Span sweep credited to the non-core probability mass.
    NonCoreMass,
    /// Greedy deletion backed by short witness circuits.
    ShortCircuit,
}

/// A batch of certified-redundant deletions.
#[derive(Debug, Clone)]
pub struct DeletionResult {
    pub deleted: Vec<ElementId>,
    pub kept_witness: Vec<ElementId>,
    pub method: DeletionMethod,
    pub rounds_charged: u64,
}

impl DeletionResult {
    pub fn empty(method: DeletionMethod) -> Self {
        DeletionResult { deleted: Vec::new(), kept_witness: Vec::new(), method, rounds_charged: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty()
    }
}

/// Oracle re-check that deleting the batch preserves the live rank.
fn assert_rank_preserved(view: &MatroidView, deleted: &[ElementId]) {
    let live = view.live_elements();
    let before = view.rank_of(&live);
    let drop: FixedBitSet = {
        let mut b = FixedBitSet::with_capacity(view.ground_size());
        for &x in deleted {
            b.insert(x as usize);
        }
        b
    };
    let kept: Vec<ElementId> = live.iter().copied().filter(|&x| !drop.contains(x as usize)).collect();
    let after = view.rank_of(&kept);
    assert_eq!(before, after, "deletion batch dropped the rank: {} -> {}", before, after);
}

// ---------------------------------------------------------------------------
// Contraction
// ---------------------------------------------------------------------------

/// Recover a large independent set in one round: sample random permutations
/// of the live ground set, scan all their prefixes in a single batch, and
/// return the longest independent prefix seen. The guarantee is driven by
/// ℓ = α̂·n/(20|S|); scanning every prefix length costs nothing extra and
/// often returns far more.
pub fn contract_independent(
    view: &MatroidView,
    s_len: usize,
    alpha: &AlphaEstimate,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<Vec<ElementId>> {
    let live = view.live_elements();
    let n = live.len();
    if n == 0 {
        return Err(Error::ContractionFailed { len: 0 });
    }
    let target_len =
        ((alpha.clamped() as f64 * n as f64) / (20.0 * s_len.max(1) as f64)).floor().max(1.0)
            as usize;
    let target_len = target_len.min(n);

    let mut rng = ledger.fork_rng(label);
    let orders: Vec<Arc<Vec<ElementId>>> = (0..cfg.contraction_permutations.max(1))
        .map(|_| Arc::new(random_permutation(&live, &mut rng)))
        .collect();
    let batch: Vec<Query> = orders
        .iter()
        .map(|o| Query::new(view, QuerySpec::PrefixScan { order: o.clone() }))
        .collect();
    let answers = ledger.submit_chunked(&batch)?;

    let mut best: Option<(usize, usize)> = None; // (independent prefix len, order index)
    for (i, a) in answers.iter().enumerate() {
        let indep_len = match a.first_dependent() {
            Some(j) => j - 1,
            None => orders[i].len(),
        };
        if best.is_none_or(|(b, _)| indep_len > b) {
            best = Some((indep_len, i));
        }
    }
    let (len, idx) = best.expect("at least one permutation");
    if len == 0 {
        return Err(Error::ContractionFailed { len: target_len });
    }
    let chosen = orders[idx][..len].to_vec();
    if cfg.verify_deletions {
        assert!(
            view.is_independent(&chosen).expect("live prefix"),
            "contraction candidate is dependent"
        );
    }
    Ok(chosen)
}

// ---------------------------------------------------------------------------
// Random-prefix span sweeps
// ---------------------------------------------------------------------------

/// Prepared randomness for one span sweep over a set: repetitions of
/// (random permutation, kept prefix of length t, probes outside it). Plans
/// are built up front so sweeps over many disjoint sets can share rounds.
pub struct SweepPlan {
    s: Vec<ElementId>,
    orders: Vec<Arc<Vec<ElementId>>>,
    probe_sets: Vec<Arc<Vec<ElementId>>>,
    prefix_len: usize,
    ground: usize,
}

impl SweepPlan {
    /// None when |S| < 4t: the set is too small for the prefix length the
    /// estimated α dictates.
    pub fn new(
        s: &[ElementId],
        alpha: &AlphaEstimate,
        cfg: &AlgorithmConfig,
        ambient_n: usize,
        ground: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Option<SweepPlan> {
        let t = cfg.recovery_prefix_len(alpha.clamped(), ambient_n).max(1);
        Self::with_prefix_len(s, t, ground, rng)
    }

    /// Like [`SweepPlan::new`], but with the prefix length capped so the
    /// sweep stays usable on sets smaller than the nominal 4t: prefixes only
    /// span through their independent part, so anything past a few multiples
    /// of α̂ is waste, and a shorter prefix buys more repetitions for the
    /// same kept-element budget. Soundness is unchanged; only the nominal
    /// yield guarantee assumed the full prefix length.
    pub fn new_capped(
        s: &[ElementId],
        alpha: &AlphaEstimate,
        cfg: &AlgorithmConfig,
        ambient_n: usize,
        ground: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Option<SweepPlan> {
        let nominal = cfg.recovery_prefix_len(alpha.clamped(), ambient_n).max(1);
        let t = nominal.min((4 * alpha.clamped()).max(16)).min(s.len() / 4).max(1);
        Self::with_prefix_len(s, t, ground, rng)
    }

    fn with_prefix_len(
        s: &[ElementId],
        t: usize,
        ground: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Option<SweepPlan> {
        if s.len() < 4 * t {
            return None;
        }
        let reps = (s.len() / (4 * t)).max(1);
        let mut orders = Vec::with_capacity(reps);
        let mut probe_sets = Vec::with_capacity(reps);
        for _ in 0..reps {
            let order = Arc::new(random_permutation(s, rng));
            let mut prefix = FixedBitSet::with_capacity(ground);
            for &x in &order[..t] {
                prefix.insert(x as usize);
            }
            let probes: Arc<Vec<ElementId>> =
                Arc::new(s.iter().copied().filter(|&x| !prefix.contains(x as usize)).collect());
            orders.push(order);
            probe_sets.push(probes);
        }
        Some(SweepPlan { s: s.to_vec(), orders, probe_sets, prefix_len: t, ground })
    }

    pub fn specs(&self) -> Vec<QuerySpec> {
        self.orders
            .iter()
            .zip(&self.probe_sets)
            .map(|(o, p)| QuerySpec::SpanSweep {
                order: o.clone(),
                cap: self.prefix_len,
                probes: p.clone(),
            })
            .collect()
    }

    /// Digest one answer per spec (in order) into (deleted, kept witnesses).
    pub fn collect(&self, answers: &[crate::scheduler::Answer]) -> (Vec<ElementId>, Vec<ElementId>) {
        let mut kept_set = FixedBitSet::with_capacity(self.ground);
        for o in &self.orders {
            for &x in &o[..self.prefix_len] {
                kept_set.insert(x as usize);
            }
        }
        let mut spanned = FixedBitSet::with_capacity(self.ground);
        for (probes, ans) in self.probe_sets.iter().zip(answers) {
            for (&x, &in_span) in probes.iter().zip(ans.flags()) {
                if in_span {
                    spanned.insert(x as usize);
                }
            }
        }
        let deleted: Vec<ElementId> = self
            .s
            .iter()
            .copied()
            .filter(|&x| spanned.contains(x as usize) && !kept_set.contains(x as usize))
            .collect();
        let kept: Vec<ElementId> =
            self.s.iter().copied().filter(|&x| kept_set.contains(x as usize)).collect();
        (deleted, kept)
    }
}

struct Sweep {
    deleted: Vec<ElementId>,
    kept: Vec<ElementId>,
    rounds: u64,
}

/// One-set sweep: plan, one (chunked) round, digest. Requires |S| >= 4t.
fn prefix_span_sweep(
    view: &MatroidView,
    s: &[ElementId],
    alpha: &AlphaEstimate,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<Sweep> {
    let n = view.live_count();
    let mut rng = ledger.fork_rng(label);
    let Some(plan) = SweepPlan::new(s, alpha, cfg, n, view.ground_size(), &mut rng) else {
        return Err(Error::EmptyDeletion);
    };
    let rounds_before = ledger.rounds;
    let specs = plan.specs();
    let batch: Vec<Query> = specs.into_iter().map(|spec| Query::new(view, spec)).collect();
    let answers = ledger.submit_chunked(&batch)?;
    let rounds = ledger.rounds - rounds_before;
    let (deleted, kept) = plan.collect(&answers);

    if cfg.verify_deletions && !deleted.is_empty() {
        assert_rank_preserved(view, &deleted);
    }
    Ok(Sweep { deleted, kept, rounds })
}

/// One-round recovery of redundant elements: random prefixes are kept as
/// witnesses and everything they span is deletable. Errors with
/// `EmptyDeletion` when the set is too small for the prefix length
/// (|S| < 4t); succeeding with an empty result means the sweep genuinely
/// found nothing (free matroids).
pub fn recover_redundant_spanned(
    view: &MatroidView,
    s: &[ElementId],
    alpha: &AlphaEstimate,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<DeletionResult> {
    let sweep = prefix_span_sweep(view, s, alpha, cfg, ledger, label)?;
    Ok(DeletionResult {
        deleted: sweep.deleted,
        kept_witness: sweep.kept,
        method: DeletionMethod::PrefixSpan,
        rounds_charged: sweep.rounds,
    })
}

// ---------------------------------------------------------------------------
// Core split
// ---------------------------------------------------------------------------

/// Split the sample's target by marginal probability against τ = α̂²/|S|².
/// Deterministic given the sample.
pub fn compute_core(sample: &CircuitSample, alpha: &AlphaEstimate) -> CoreSplit {
    let s_len = sample.target.len().max(1);
    let tau = (alpha.clamped() as f64 / s_len as f64).powi(2);
    let marginals = estimate_marginals(sample);
    let mut core = Vec::new();
    let mut non_core = Vec::new();
    let mut mass = 0.0;
    for &x in &sample.target {
        let p = marginals.p(x);
        if p >= tau {
            core.push(x);
        } else {
            non_core.push(x);
            mass += p;
        }
    }
    CoreSplit { core, non_core, non_core_mass: mass, threshold: tau }
}

/// Span-sweep deletion with its yield credited to the non-core probability
/// mass; mechanically identical to [`recover_redundant_spanned`].
pub fn delete_noncore_mass(
    view: &MatroidView,
    s: &[ElementId],
    _split: &CoreSplit,
    alpha: &AlphaEstimate,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<DeletionResult> {
    let sweep = prefix_span_sweep(view, s, alpha, cfg, ledger, label)?;
    Ok(DeletionResult {
        deleted: sweep.deleted,
        kept_witness: sweep.kept,
        method: DeletionMethod::NonCoreMass,
        rounds_charged: sweep.rounds,
    })
}

// ---------------------------------------------------------------------------
// Short-circuit bulk deletion
// ---------------------------------------------------------------------------

/// Delete elements certified by short witness circuits: process W in
/// ascending id order, delete the element, and commit to keeping the rest of
/// its witness. Zero additional rounds. Deletes at least
/// ⌈|W|/(l_cap+1)⌉ elements.
pub fn short_circuit_bulk_delete(
    view: &MatroidView,
    w: &[ElementId],
    witnesses: &HashMap<ElementId, Circuit>,
    barrier: &[ElementId],
    l_cap: usize,
    cfg: &AlgorithmConfig,
) -> Result<DeletionResult> {
    let mut barrier_set = FixedBitSet::with_capacity(view.ground_size());
    for &x in barrier {
        barrier_set.insert(x as usize);
    }
    let mut w_sorted = w.to_vec();
    w_sorted.sort_unstable();
    w_sorted.dedup();
    for &x in &w_sorted {
        let c = witnesses
            .get(&x)
            .ok_or(Error::NoCircuitForElement { element: x })?;
        if !c.contains(x) {
            return Err(Error::InvalidView(format!("witness for {x} does not contain it")));
        }
        let outside = c.members_outside(&barrier_set);
        if outside > l_cap {
            return Err(Error::WitnessTooLong { element: x, len: outside, cap: l_cap });
        }
    }

    let mut in_w = FixedBitSet::with_capacity(view.ground_size());
    for &x in &w_sorted {
        in_w.insert(x as usize);
    }
    let mut deleted: Vec<ElementId> = Vec::new();
    let mut deleted_set = FixedBitSet::with_capacity(view.ground_size());
    let mut kept_set = FixedBitSet::with_capacity(view.ground_size());
    let mut kept: Vec<ElementId> = Vec::new();
    for &v in &w_sorted {
        if deleted_set.contains(v as usize) || kept_set.contains(v as usize) {
            continue;
        }
        deleted.push(v);
        deleted_set.insert(v as usize);
        for &y in witnesses[&v].members() {
            if y != v && in_w.contains(y as usize) && !deleted_set.contains(y as usize) {
                kept_set.insert(y as usize);
                kept.push(y);
            }
        }
    }

    debug_assert!(deleted.len() >= w_sorted.len().div_ceil(l_cap + 1));
    if cfg.verify_deletions && !deleted.is_empty() {
        assert_rank_preserved(view, &deleted);
    }
    Ok(DeletionResult {
        deleted,
        kept_witness: kept,
        method: DeletionMethod::ShortCircuit,
        rounds_charged: 0,
    })
}

// ---------------------------------------------------------------------------
// Balanced deletion
// ---------------------------------------------------------------------------

/// Zero-round short-circuit route: harvest, from the pooled sample, a short
/// witness circuit for every non-core element that has one, then run the
/// greedy bulk deletion against the core as barrier. Elements without enough
/// sampled circuits are simply unwitnessed.
pub fn witness_route(
    view: &MatroidView,
    sample: &CircuitSample,
    split: &CoreSplit,
    cfg: &AlgorithmConfig,
) -> Result<DeletionResult> {
    let n = view.live_count();
    let cutoff =
        (cfg.c_w * split.non_core_mass.max(1.0) * AlgorithmConfig::log2n(n)).ceil() as usize;
    let mut barrier = FixedBitSet::with_capacity(view.ground_size());
    for &c in &split.core {
        barrier.insert(c as usize);
    }
    let mut witnessed: Vec<ElementId> = Vec::new();
    let mut witnesses: HashMap<ElementId, Circuit> = HashMap::new();
    for &x in &split.non_core {
        match estimate_w(sample, x, &split.core, cfg.w_group_size, cfg.w_group_count) {
            Ok((_, witness)) => {
                if witness.members_outside(&barrier) <= cutoff {
                    witnessed.push(x);
                    witnesses.insert(x, witness);
                }
            }
            Err(Error::NoCircuitForElement { .. }) | Err(Error::InsufficientSample { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if witnessed.is_empty() {
        return Ok(DeletionResult::empty(DeletionMethod::ShortCircuit));
    }
    short_circuit_bulk_delete(view, &witnessed, &witnesses, &split.core, cutoff, cfg)
}

/// Pick the deletion route by the core split: majority-core credits the span
/// sweep to the core; otherwise both the mass route and the short-circuit
/// route run and the larger batch wins. One shared sweep round plus the
/// zero-round witness pass; the sampling phase is reused from `sample`.
pub fn balanced_delete(
    view: &MatroidView,
    s: &[ElementId],
    alpha: &AlphaEstimate,
    sample: &CircuitSample,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<DeletionResult> {
    let split = compute_core(sample, alpha);

    let sweep = match prefix_span_sweep(view, s, alpha, cfg, ledger, label) {
        Ok(sw) => Some(sw),
        Err(Error::EmptyDeletion) => None,
        Err(e) => return Err(e),
    };
    let sweep_result = sweep.map(|sw| DeletionResult {
        deleted: sw.deleted,
        kept_witness: sw.kept,
        method: if split.is_majority_core() {
            DeletionMethod::CoreRecovery
        } else {
            DeletionMethod::NonCoreMass
        },
        rounds_charged: sw.rounds,
    });

    if split.is_majority_core() {
        if let Some(r) = &sweep_result {
            if !r.is_empty() {
                return Ok(sweep_result.unwrap());
            }
        }
    }

    let witness_result = witness_route(view, sample, &split, cfg)?;

    let best = match sweep_result {
        Some(sw) if sw.deleted.len() >= witness_result.deleted.len() => sw,
        Some(sw) => {
            let mut w = witness_result;
            w.rounds_charged += sw.rounds_charged;
            w
        }
        None => witness_result,
    };
    if best.is_empty() {
        Err(Error::EmptyDeletion)
    } else {
        Ok(best)
    }
}
