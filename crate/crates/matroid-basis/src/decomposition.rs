//! Globally-optimal set construction and iterative peeling.
//!
//! The constructor starts from the whole live ground set and strips subsets
//! whose removal barely changes the estimated circuit mass, so the returned
//! set concentrates first-circuit probability and every subset of it is hit
//! in proportion to its size. Peeling repeats the construction, removing each
//! returned set from the working view.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::config::AlgorithmConfig;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_alpha, estimate_hitting, sample_first_circuits, AlphaEstimate, CircuitSample,
};
use crate::oracle::{Circuit, MatroidView};
use crate::scheduler::{for_each_subset_up_to, Query, QuerySpec, RoundLedger};
use crate::ElementId;

/// Subset-removal search mode inside the constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Enumerate every T ⊆ S (needs |S| <= exact_cap). Complete.
    Exact,
    /// Ascending-hit-count prefix search with a one-sided confidence margin.
    /// Sound (every removal satisfies the threshold) but not complete.
    Greedy,
}

/// One removal step, kept for the cumulative-mass check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovalStep {
    pub removed: usize,
    pub theta: f64,
    /// Observed circuit-mass drop of the removed subset at removal time.
    pub observed_drop: f64,
}

#[derive(Debug, Clone)]
pub struct GloballyOptimalCertificate {
    pub set: Vec<ElementId>,
    pub q_hat: f64,
    pub initial_q_hat: f64,
    pub strategy: Strategy,
    pub removal_log: Vec<RemovalStep>,
    /// Filled by post-hoc verification, never by the constructor.
    pub violation_witness: Option<Vec<ElementId>>,
}

/// A peeled set together with its certificate and the sample filtered down to
/// it (circuits that left the set are blanked; the denominator is kept).
#[derive(Debug, Clone)]
pub struct Peel {
    pub set: Vec<ElementId>,
    pub certificate: GloballyOptimalCertificate,
    pub sample: CircuitSample,
}

/// Trace entry for one peeled set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeelRecord {
    pub index: usize,
    pub set: Vec<ElementId>,
    pub alpha_hat: usize,
    pub size_bucket: u32,
    pub good: bool,
    pub progress_kind: ProgressKind,
    pub progress_count: usize,
    /// α̂/|S|·n, the contraction stop-rule left-hand side at peel time.
    pub contract_lhs: f64,
    /// Accumulated deletion potential after this peel.
    pub delete_lhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressKind {
    Contracted,
    Deleted,
    None,
}

pub fn size_bucket(len: usize) -> u32 {
    (len.max(1) as f64).log2().ceil() as u32
}

/// Outcome of repeated peeling; `aborted` carries the error when a peel
/// collapsed mid-way and the records up to that point are partial.
#[derive(Debug)]
pub struct PeelingOutcome {
    pub records: Vec<PeelRecord>,
    pub peels: Vec<Peel>,
    pub aborted: Option<Error>,
}

// ---------------------------------------------------------------------------
// Small-circuit preprocessing
// ---------------------------------------------------------------------------

/// Delete elements until no circuit of size <= c0 remains, one enumeration
/// round per sweep. Every deleted element keeps the rest of its witnessing
/// circuit, so rank is preserved. The cutoff is lowered automatically when
/// the subset enumeration would not fit the round budget; 0 disables.
pub fn remove_small_circuits(
    view: &MatroidView,
    c0: usize,
    ledger: &mut RoundLedger,
) -> Result<MatroidView> {
    let mut view = view.clone();
    let mut c0 = c0;
    while c0 > 0
        && crate::scheduler::subsets_up_to_count(view.live_count(), c0 + 1) > ledger.budget_cap
    {
        c0 -= 1;
    }
    if c0 == 0 || view.live_count() == 0 {
        return Ok(view);
    }
    loop {
        let live = Arc::new(view.live_elements());
        if live.is_empty() {
            return Ok(view);
        }
        let max_size = (c0 + 1).min(live.len());
        let ans = ledger.submit_batch(&[Query::new(
            &view,
            QuerySpec::AllSubsetsUpTo { elems: live.clone(), max_size },
        )])?;
        let flags = ans[0].flags();

        // Collect dependent sets by size; a small dependent set is a circuit
        // iff it contains no smaller dependent set.
        let mut loops: HashSet<ElementId> = HashSet::new();
        let mut dep_pairs: HashSet<(ElementId, ElementId)> = HashSet::new();
        let mut circuits: Vec<Vec<ElementId>> = Vec::new();
        let mut i = 0usize;
        for_each_subset_up_to(&live, max_size, |s| {
            let independent = flags[i];
            i += 1;
            if independent || s.len() > c0 {
                return;
            }
            match s.len() {
                1 => {
                    loops.insert(s[0]);
                    circuits.push(s.to_vec());
                }
                2 => {
                    if !loops.contains(&s[0]) && !loops.contains(&s[1]) {
                        dep_pairs.insert((s[0], s[1]));
                        circuits.push(s.to_vec());
                    }
                }
                _ => {
                    let no_loop = s.iter().all(|x| !loops.contains(x));
                    let no_pair = s.iter().enumerate().all(|(a, &x)| {
                        s[a + 1..].iter().all(|&y| !dep_pairs.contains(&(x, y)))
                    });
                    // c0 > 3 never survives the budget check at interesting
                    // sizes, so pair/loop containment is the whole minimality
                    // test in practice.
                    if no_loop && no_pair {
                        circuits.push(s.to_vec());
                    }
                }
            }
        });

        if circuits.is_empty() {
            return Ok(view);
        }

        // One deletion per unbroken circuit; survivors are marked kept so
        // every deletion retains its witness.
        let mut deleted: HashSet<ElementId> = HashSet::new();
        let mut kept: HashSet<ElementId> = HashSet::new();
        for c in &circuits {
            if c.iter().any(|x| deleted.contains(x)) {
                continue;
            }
            let Some(victim) = c.iter().copied().find(|x| !kept.contains(x)) else { continue };
            deleted.insert(victim);
            for &x in c {
                if x != victim {
                    kept.insert(x);
                }
            }
        }
        let batch: Vec<ElementId> = deleted.into_iter().collect();
        if batch.is_empty() {
            return Ok(view);
        }
        view = view.delete_all(&batch)?;
    }
}

// ---------------------------------------------------------------------------
// Globally-optimal constructor
// ---------------------------------------------------------------------------

struct WorkingSample {
    /// Aligned with the drawn permutations; blanked once a circuit leaves S.
    circuits: Vec<Option<Circuit>>,
    denominator: usize,
    ground: usize,
}

impl WorkingSample {
    fn from(sample: CircuitSample, ground: usize) -> Self {
        let denominator = sample.sample_count();
        WorkingSample { circuits: sample.circuits, denominator, ground }
    }

    fn valid_count(&self) -> usize {
        self.circuits.iter().flatten().count()
    }

    fn hit_counts(&self, s: &[ElementId]) -> HashMap<ElementId, usize> {
        let mut h: HashMap<ElementId, usize> = s.iter().map(|&x| (x, 0)).collect();
        for c in self.circuits.iter().flatten() {
            for &x in c.members() {
                if let Some(v) = h.get_mut(&x) {
                    *v += 1;
                }
            }
        }
        h
    }

    /// Blank circuits that touch the removed set.
    fn filter_removed(&mut self, removed: &FixedBitSet) {
        for c in self.circuits.iter_mut() {
            let hit = c
                .as_ref()
                .is_some_and(|c| c.members().iter().any(|&x| removed.contains(x as usize)));
            if hit {
                *c = None;
            }
        }
    }

    fn to_sample(&self, target: &[ElementId]) -> CircuitSample {
        CircuitSample::from_parts(target.to_vec(), self.circuits.clone(), self.ground)
    }
}

/// One-sided confidence slack on an observed hit count, so a removal
/// justified by the sample stays below the threshold in truth: ln(1/δ) at
/// δ = 1e-12.
const REMOVAL_CONFIDENCE_LN: f64 = 27.631021115928547;

fn count_ucb(observed: usize) -> f64 {
    let k = observed as f64;
    k + REMOVAL_CONFIDENCE_LN + (2.0 * k * REMOVAL_CONFIDENCE_LN).sqrt()
}

/// Build a set whose estimated circuit mass cannot be reduced within the
/// removal threshold by deleting any further subset. One sampling phase, with
/// in-place filtering after each removal and a resample only once fewer than
/// a quarter of the drawn circuits survive.
pub fn globally_optimal_constructor(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    strategy: Strategy,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<Peel> {
    let n = view.live_count();
    if n == 0 {
        return Err(Error::EmptyPeel);
    }
    let mut s = view.live_elements();
    if strategy == Strategy::Exact && s.len() > cfg.exact_cap {
        return Err(Error::Parse(format!(
            "exact strategy needs |S| <= {}, got {}",
            cfg.exact_cap,
            s.len()
        )));
    }

    let m = cfg.effective_sample_count(s.len());
    let sample = sample_first_circuits(view, &s, m, ledger, &format!("{label}/sample0"))?;
    let mut work = WorkingSample::from(sample, view.ground_size());
    let initial_q_hat = work.valid_count() as f64 / work.denominator as f64;
    let mut removal_log = Vec::new();
    let mut resamples = 0usize;

    loop {
        if s.is_empty() {
            return Err(Error::EmptyPeel);
        }
        let theta = cfg.theta(s.len(), n);
        let removal = match strategy {
            Strategy::Exact => find_exact_removal(&work, &s, theta),
            Strategy::Greedy => find_greedy_removal(&work, &s, theta, cfg.singleton_removals),
        };
        let Some((t, observed_hits)) = removal else {
            break;
        };
        removal_log.push(RemovalStep {
            removed: t.len(),
            theta,
            observed_drop: observed_hits as f64 / work.denominator as f64,
        });
        let mut removed = FixedBitSet::with_capacity(view.ground_size());
        for &x in &t {
            removed.insert(x as usize);
        }
        s.retain(|x| !removed.contains(*x as usize));
        work.filter_removed(&removed);

        if s.is_empty() {
            return Err(Error::EmptyPeel);
        }
        if work.valid_count() * 4 < work.denominator {
            resamples += 1;
            let m = cfg.effective_sample_count(s.len());
            let fresh =
                sample_first_circuits(view, &s, m, ledger, &format!("{label}/resample{resamples}"))?;
            work = WorkingSample::from(fresh, view.ground_size());
        }
    }

    let q_hat = work.valid_count() as f64 / work.denominator as f64;
    let sample = work.to_sample(&s);
    Ok(Peel {
        set: s.clone(),
        certificate: GloballyOptimalCertificate {
            set: s,
            q_hat,
            initial_q_hat,
            strategy,
            removal_log,
            violation_witness: None,
        },
        sample,
    })
}

/// Exact mode: a subset-sum table over circuit masks gives the observed
/// circuit-mass drop of every T ⊆ S at once; remove the largest T within its
/// removal budget.
fn find_exact_removal(
    work: &WorkingSample,
    s: &[ElementId],
    theta: f64,
) -> Option<(Vec<ElementId>, usize)> {
    let k = s.len();
    assert!(k <= 20, "exact removal search needs a small working set");
    let pos: HashMap<ElementId, usize> = s.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let full: usize = (1usize << k) - 1;

    let mut within = vec![0u32; 1 << k];
    for c in work.circuits.iter().flatten() {
        let mut mask = 0usize;
        for &x in c.members() {
            mask |= 1 << pos[&x];
        }
        within[mask] += 1;
    }
    for bit in 0..k {
        for mask in 0..=full {
            if mask & (1 << bit) != 0 {
                within[mask] += within[mask ^ (1 << bit)];
            }
        }
    }
    let total = within[full];

    let m = work.denominator as f64;
    let mut best: Option<(usize, u32)> = None; // (mask, hits)
    for t_mask in 1..=full {
        let hits = total - within[full ^ t_mask];
        let t_len = t_mask.count_ones() as usize;
        if (hits as f64) <= m * t_len as f64 * theta {
            let better = match best {
                None => true,
                Some((bm, _)) => {
                    let bl = bm.count_ones() as usize;
                    t_len > bl || (t_len == bl && t_mask < bm)
                }
            };
            if better {
                best = Some((t_mask, hits));
            }
        }
    }
    best.map(|(mask, hits)| {
        let t: Vec<ElementId> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| s[i]).collect();
        (t, hits as usize)
    })
}

/// Greedy mode: sort by ascending hit count and test prefixes of that order.
/// The prefix hit-count sum overestimates the number of circuits hitting the
/// prefix (so passing the test is sound), and the confidence slack keeps
/// small-sample zeros from justifying removals the true mass would forbid.
fn find_greedy_removal(
    work: &WorkingSample,
    s: &[ElementId],
    theta: f64,
    singleton_only: bool,
) -> Option<(Vec<ElementId>, usize)> {
    let hits = work.hit_counts(s);
    let mut order: Vec<ElementId> = s.to_vec();
    order.sort_unstable_by_key(|x| (hits[x], *x));

    let m = work.denominator as f64;
    let max_len = if singleton_only { 1 } else { order.len() };
    let mut best: Option<(usize, usize)> = None; // (prefix len, hit sum)
    let mut sum = 0usize;
    for (i, x) in order.iter().enumerate().take(max_len) {
        sum += hits[x];
        if count_ucb(sum) <= m * (i + 1) as f64 * theta {
            best = Some((i + 1, sum));
        }
    }
    best.map(|(len, sum)| (order[..len].to_vec(), sum))
}

// ---------------------------------------------------------------------------
// Subset-hitting verification
// ---------------------------------------------------------------------------

/// Exhaustive check of the subset-hitting property on a small set: all |S|!
/// permutations are enumerated with first circuits taken from the oracle
/// directly, and every T ⊆ S must satisfy p_T >= |T|·θ_v. Returns the
/// worst-ratio violating subset. Verification traffic is offline, uncharged.
pub fn verify_subset_hitting_exact(
    view: &MatroidView,
    s: &[ElementId],
    theta_v: f64,
) -> Result<Option<Vec<ElementId>>> {
    let k = s.len();
    assert!(k <= 8, "exact verification enumerates |S|! permutations");
    view.check_live(s)?;
    let restricted = restrict_to(view, s)?;

    let mut within = vec![0u64; 1 << k];
    let mut total_perms = 0u64;
    let mut perm: Vec<usize> = (0..k).collect();
    permute_all(&mut perm, &mut |p| {
        total_perms += 1;
        let order: Vec<ElementId> = p.iter().map(|&i| s[i]).collect();
        if let Some(len) = restricted.first_dependent_prefix(&order) {
            let c = restricted
                .circuit_in_first_prefix(&order, len)
                .expect("first dependent prefix has a circuit");
            let mut mask = 0usize;
            for &x in c.members() {
                mask |= 1 << s.iter().position(|&y| y == x).expect("circuit within S");
            }
            within[mask] += 1;
        }
    });
    for bit in 0..k {
        for mask in 0..(1usize << k) {
            if mask & (1 << bit) != 0 {
                within[mask] += within[mask ^ (1 << bit)];
            }
        }
    }
    let full = (1usize << k) - 1;
    let total_formed = within[full];

    let mut worst: Option<(f64, usize)> = None;
    for t_mask in 1..=full {
        let hit_count = total_formed - within[full ^ t_mask];
        let p_t = hit_count as f64 / total_perms as f64;
        let bound = t_mask.count_ones() as f64 * theta_v;
        if p_t < bound {
            let ratio = p_t / bound;
            // Ties prefer the larger subset: the most informative violator.
            let better = worst.is_none_or(|(w, bm)| {
                ratio < w || (ratio == w && t_mask.count_ones() > bm.count_ones())
            });
            if better {
                worst = Some((ratio, t_mask));
            }
        }
    }
    Ok(worst.map(|(_, mask)| (0..k).filter(|i| mask & (1 << i) != 0).map(|i| s[i]).collect()))
}

/// Sampling-mode check: only prefixes of the ascending-hit-count order are
/// tested against θ_v. Returns the worst violating prefix.
pub fn verify_subset_hitting_sampled(
    sample: &CircuitSample,
    theta_v: f64,
) -> Result<Option<Vec<ElementId>>> {
    let hits = sample.hit_counts();
    let mut order = sample.target.clone();
    order.sort_unstable_by_key(|x| (hits.get(x).copied().unwrap_or(0), *x));

    let mut worst: Option<(f64, usize)> = None;
    for len in 1..=order.len() {
        let p_t = estimate_hitting(sample, &order[..len])?;
        let bound = len as f64 * theta_v;
        if p_t < bound {
            let ratio = p_t / bound;
            if worst.is_none_or(|(w, wl)| ratio < w || (ratio == w && len > wl)) {
                worst = Some((ratio, len));
            }
        }
    }
    Ok(worst.map(|(_, len)| order[..len].to_vec()))
}

/// View restricted to exactly `s` (everything else deleted).
pub fn restrict_to(view: &MatroidView, s: &[ElementId]) -> Result<MatroidView> {
    let keep: HashSet<ElementId> = s.iter().copied().collect();
    let others: Vec<ElementId> =
        view.live_elements().into_iter().filter(|x| !keep.contains(x)).collect();
    if others.is_empty() {
        Ok(view.clone())
    } else {
        view.delete_all(&others)
    }
}

fn permute_all(items: &mut [usize], f: &mut impl FnMut(&[usize])) {
    fn heap(items: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
        if k <= 1 {
            f(items);
            return;
        }
        for i in 0..k {
            heap(items, k - 1, f);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let n = items.len();
    heap(items, n, f);
}

// ---------------------------------------------------------------------------
// Iterative peeling
// ---------------------------------------------------------------------------

/// Peel globally-optimal sets until a stop condition fires: the set that
/// triggers the stop test is excluded from the returned list. The view must
/// already be preprocessed by [`remove_small_circuits`].
pub fn repeated_global_peeling(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
) -> PeelingOutcome {
    let n = view.live_count();
    let log_n = AlgorithmConfig::log2n(n);
    let mut working = view.clone();
    let mut records = Vec::new();
    let mut peels = Vec::new();
    let mut k = 0usize;

    loop {
        if working.live_count() == 0 {
            return PeelingOutcome { records, peels, aborted: None };
        }
        k += 1;
        let label = format!("peel/{k}");
        let strategy =
            if working.live_count() <= cfg.exact_cap { Strategy::Exact } else { Strategy::Greedy };
        let peel = match globally_optimal_constructor(&working, cfg, strategy, ledger, &label) {
            Ok(p) => p,
            Err(e) => return PeelingOutcome { records, peels, aborted: Some(e) },
        };
        let alpha =
            match estimate_alpha(&working, &peel.set, cfg, ledger, &format!("{label}/alpha")) {
                Ok(a) => a,
                Err(e) => return PeelingOutcome { records, peels, aborted: Some(e) },
            };
        working = match working.delete_all(&peel.set) {
            Ok(w) => w,
            Err(e) => return PeelingOutcome { records, peels, aborted: Some(e) },
        };

        let stop = alpha.clamped() as f64 / peel.set.len() as f64 >= 1.0 / log_n
            || peel.set.len() * 2 > n;
        if stop {
            return PeelingOutcome { records, peels, aborted: None };
        }

        let split = crate::progress::compute_core(&peel.sample, &alpha);
        records.push(PeelRecord {
            index: k,
            set: peel.set.clone(),
            alpha_hat: alpha.value,
            size_bucket: size_bucket(peel.set.len()),
            good: split.is_majority_core(),
            progress_kind: ProgressKind::None,
            progress_count: 0,
            contract_lhs: alpha.clamped() as f64 / peel.set.len() as f64 * n as f64,
            delete_lhs: 0.0,
        });
        peels.push(peel);
    }
}

/// α̂ of a peeled set inside its parent view.
pub fn alpha_of_set(
    view: &MatroidView,
    set: &[ElementId],
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<AlphaEstimate> {
    estimate_alpha(view, set, cfg, ledger, label)
}
