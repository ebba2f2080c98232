//! The simulated parallel adaptive-query model.
//!
//! All oracle traffic goes through [`RoundLedger::submit_batch`]: one call is
//! one adaptive round, no matter how many queries it carries. Queries inside
//! a batch may be evaluated with real parallelism; the answers are buffered
//! and released together, so the concurrency is invisible to the model.
//!
//! Besides plain subsets, a batch may carry composite query families (all
//! prefixes of an order, all one-element removals of a prefix, ...). These
//! expand to their primitive query counts in the ledger while letting the
//! evaluator exploit shared structure.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::MatroidView;
use crate::ElementId;

pub const DEFAULT_BUDGET_CAP: u64 = 10_000_000;

/// Per-run accounting: rounds, query counts per round, and the master RNG
/// seed. Append-only.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct RoundLedger {
    pub rounds: u64,
    pub total_queries: u64,
    pub per_round: Vec<u64>,
    pub seed: u64,
    #[serde(skip)]
    pub budget_cap: u64,
}

impl RoundLedger {
    pub fn new(seed: u64) -> Self {
        RoundLedger {
            rounds: 0,
            total_queries: 0,
            per_round: Vec::new(),
            seed,
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }

    pub fn with_budget_cap(seed: u64, cap: u64) -> Self {
        let mut l = RoundLedger::new(seed);
        l.budget_cap = cap;
        l
    }

    /// Deterministic RNG substream derived from `(seed, label)`. The same
    /// label always yields the same stream; callers that need fresh
    /// randomness must vary the label (tests rely on reuse being stable).
    pub fn fork_rng(&self, label: &str) -> ChaCha8Rng {
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
            h ^= h >> 29;
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    /// Submit one round of queries. Answers are positionally aligned with the
    /// batch. Errors if the batch is empty or violates the per-round budget.
    pub fn submit_batch(&mut self, batch: &[Query<'_>]) -> Result<Vec<Answer>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let requested: u64 = batch.iter().map(|q| q.spec.query_count()).sum();
        if requested > self.budget_cap {
            return Err(Error::BudgetExceeded { requested, cap: self.budget_cap });
        }
        for q in batch {
            q.spec.check_domain(q.view)?;
        }
        let answers: Vec<Answer> = batch.par_iter().map(|q| q.spec.evaluate(q.view)).collect();
        self.rounds += 1;
        self.total_queries += requested;
        self.per_round.push(requested);
        Ok(answers)
    }

    /// Submit a batch, splitting it into as few rounds as the per-round
    /// budget allows (queries must be mutually non-adaptive).
    pub fn submit_chunked(&mut self, batch: &[Query<'_>]) -> Result<Vec<Answer>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut answers = Vec::with_capacity(batch.len());
        let mut start = 0usize;
        while start < batch.len() {
            let mut count = 0u64;
            let mut end = start;
            while end < batch.len() {
                let c = batch[end].spec.query_count();
                if end > start && count + c > self.budget_cap {
                    break;
                }
                count += c;
                end += 1;
            }
            answers.extend(self.submit_batch(&batch[start..end])?);
            start = end;
        }
        Ok(answers)
    }
}

/// One batch entry: a query family against a specific view.
pub struct Query<'a> {
    pub view: &'a MatroidView,
    pub spec: QuerySpec,
}

impl<'a> Query<'a> {
    pub fn new(view: &'a MatroidView, spec: QuerySpec) -> Self {
        Query { view, spec }
    }
}

/// A query family; `query_count` is its primitive oracle-query cost.
#[derive(Debug, Clone)]
pub enum QuerySpec {
    /// One independence query on an explicit subset.
    Subset(Vec<ElementId>),
    /// All prefixes of `order`: |order| queries.
    PrefixScan { order: Arc<Vec<ElementId>> },
    /// All one-element removals of `order[..len]`: `len` queries. Used to
    /// extract the unique circuit of a first dependent prefix.
    DropScan { order: Arc<Vec<ElementId>>, len: usize },
    /// For each `j <= cap` and probe `x`: query the prefix and the prefix
    /// extended by `x` — `cap + cap·|probes|` queries. The answer reports,
    /// per probe, whether some independent prefix became dependent when the
    /// probe was added.
    SpanSweep { order: Arc<Vec<ElementId>>, cap: usize, probes: Arc<Vec<ElementId>> },
    /// `count` uniform random k-subsets of `elems`, drawn from a dedicated
    /// substream so the batch stays replayable without materializing every
    /// subset: `count` queries.
    RandomKSubsets { elems: Arc<Vec<ElementId>>, k: usize, count: usize, stream: u64 },
    /// Every subset of `elems` of size 1..=max_size, in size-major
    /// lexicographic order.
    AllSubsetsUpTo { elems: Arc<Vec<ElementId>>, max_size: usize },
}

/// Positionally aligned result for one [`QuerySpec`].
#[derive(Debug, Clone)]
pub enum Answer {
    Bool(bool),
    /// Least dependent prefix length, if any (PrefixScan).
    FirstDependent(Option<usize>),
    /// DropScan: per position, is the prefix minus that element independent.
    /// SpanSweep: per probe, did it extend some independent prefix dependently.
    /// RandomKSubsets: per draw, independence.
    /// AllSubsetsUpTo: per enumerated subset, independence.
    Flags(Vec<bool>),
}

impl Answer {
    pub fn flags(&self) -> &[bool] {
        match self {
            Answer::Flags(f) => f,
            _ => panic!("answer is not a flag vector"),
        }
    }

    pub fn first_dependent(&self) -> Option<usize> {
        match self {
            Answer::FirstDependent(f) => *f,
            _ => panic!("answer is not a prefix scan result"),
        }
    }

    pub fn boolean(&self) -> bool {
        match self {
            Answer::Bool(b) => *b,
            _ => panic!("answer is not a boolean"),
        }
    }
}

pub fn subsets_up_to_count(n: usize, max_size: usize) -> u64 {
    let mut total = 0u64;
    let mut binom = 1u128;
    for k in 1..=max_size.min(n) {
        binom = binom * (n - k + 1) as u128 / k as u128;
        total = total.saturating_add(binom.min(u64::MAX as u128) as u64);
    }
    total
}

/// Advance `idx` to the next k-combination of `[0, n)` in lexicographic
/// order; false when exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] != i + n - k {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Enumerate subsets of `elems` of size 1..=max_size in the same order
/// `AllSubsetsUpTo` answers use (size-major, lexicographic within each size).
pub fn for_each_subset_up_to(
    elems: &[ElementId],
    max_size: usize,
    mut f: impl FnMut(&[ElementId]),
) {
    let n = elems.len();
    let mut subset = Vec::with_capacity(max_size);
    for k in 1..=max_size.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            subset.clear();
            subset.extend(idx.iter().map(|&i| elems[i]));
            f(&subset);
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
}

impl QuerySpec {
    pub fn query_count(&self) -> u64 {
        match self {
            QuerySpec::Subset(_) => 1,
            QuerySpec::PrefixScan { order } => order.len() as u64,
            QuerySpec::DropScan { len, .. } => *len as u64,
            QuerySpec::SpanSweep { cap, probes, .. } => {
                *cap as u64 + *cap as u64 * probes.len() as u64
            }
            QuerySpec::RandomKSubsets { count, .. } => *count as u64,
            QuerySpec::AllSubsetsUpTo { elems, max_size } => {
                subsets_up_to_count(elems.len(), *max_size)
            }
        }
    }

    fn check_domain(&self, view: &MatroidView) -> Result<()> {
        match self {
            QuerySpec::Subset(s) => view.check_live(s),
            QuerySpec::PrefixScan { order } => view.check_live(order),
            QuerySpec::DropScan { order, len } => view.check_live(&order[..*len]),
            QuerySpec::SpanSweep { order, probes, .. } => {
                view.check_live(order)?;
                view.check_live(probes)
            }
            QuerySpec::RandomKSubsets { elems, k, .. } => {
                if *k > elems.len() {
                    return Err(Error::Parse(format!(
                        "k={} exceeds sampled set size {}",
                        k,
                        elems.len()
                    )));
                }
                view.check_live(elems)
            }
            QuerySpec::AllSubsetsUpTo { elems, .. } => view.check_live(elems),
        }
    }

    fn evaluate(&self, view: &MatroidView) -> Answer {
        match self {
            QuerySpec::Subset(s) => Answer::Bool(view.is_independent(s).expect("domain checked")),
            QuerySpec::PrefixScan { order } => {
                Answer::FirstDependent(view.first_dependent_prefix(order))
            }
            QuerySpec::DropScan { order, len } => {
                let len = *len;
                match view.first_dependent_prefix(&order[..len]) {
                    Some(j) if j == len => {
                        // Fast path: P∖{x} is independent iff x is in the
                        // unique circuit of P.
                        let c = view
                            .circuit_in_first_prefix(order, len)
                            .expect("prefix is first-dependent");
                        Answer::Flags(order[..len].iter().map(|&x| c.contains(x)).collect())
                    }
                    _ => {
                        // General position: answer each removal directly.
                        let flags = (0..len)
                            .map(|i| {
                                let sub: Vec<ElementId> = order[..len]
                                    .iter()
                                    .enumerate()
                                    .filter(|(j, _)| *j != i)
                                    .map(|(_, &x)| x)
                                    .collect();
                                view.is_independent(&sub).expect("domain checked")
                            })
                            .collect();
                        Answer::Flags(flags)
                    }
                }
            }
            QuerySpec::SpanSweep { order, cap, probes } => {
                // prefix_j independent and prefix_j + x dependent for some
                // j <= cap  ⇔  x ∈ span(longest independent prefix ≤ cap).
                let jmax = match view.first_dependent_prefix(&order[..*cap.min(&order.len())]) {
                    Some(j) => j - 1,
                    None => (*cap).min(order.len()),
                };
                Answer::Flags(view.span_probes(&order[..jmax], probes))
            }
            QuerySpec::RandomKSubsets { elems, k, count, stream } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*stream);
                let mut pool: Vec<ElementId> = elems.as_ref().clone();
                let mut flags = Vec::with_capacity(*count);
                let mut subset = Vec::with_capacity(*k);
                for _ in 0..*count {
                    subset.clear();
                    partial_shuffle(&mut pool, *k, &mut rng, &mut subset);
                    flags.push(view.is_independent(&subset).expect("domain checked"));
                }
                Answer::Flags(flags)
            }
            QuerySpec::AllSubsetsUpTo { elems, max_size } => {
                let mut flags = Vec::new();
                for_each_subset_up_to(elems, *max_size, |s| {
                    flags.push(view.is_independent(s).expect("domain checked"));
                });
                Answer::Flags(flags)
            }
        }
    }
}

/// Draw the first `k` entries of a fresh Fisher–Yates shuffle of `pool` into
/// `out`, then undo the swaps so `pool` is reusable.
fn partial_shuffle(
    pool: &mut [ElementId],
    k: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<ElementId>,
) {
    use rand::Rng;
    let n = pool.len();
    let mut swaps = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
        swaps.push((i, j));
        out.push(pool[i]);
    }
    for &(i, j) in swaps.iter().rev() {
        pool.swap(i, j);
    }
}

/// A full random permutation of `elems`.
pub fn random_permutation(elems: &[ElementId], rng: &mut ChaCha8Rng) -> Vec<ElementId> {
    use rand::seq::SliceRandom;
    let mut p = elems.to_vec();
    p.shuffle(rng);
    p
}
