//! End-to-end basis finders.
//!
//! Four algorithms share the [`RunResult`] shape: the sequential greedy
//! baseline, the grouped-prefix baseline (contract a fully independent group
//! or delete one element per group, per round), the simpler early-stopping
//! decomposition driver, and the main driver that classifies peeled sets as
//! good or bad and balances contraction against bulk deletion.
//!
//! Correctness never rests on the randomized analysis: every contraction is
//! oracle-checked independent, every deletion batch is span-sound, and any
//! subroutine failure falls back to the grouped-prefix baseline on the
//! current view.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::AlgorithmConfig;
use crate::decomposition::{
    globally_optimal_constructor, remove_small_circuits, restrict_to, size_bucket, PeelRecord,
    ProgressKind, Strategy,
};
use crate::error::{Error, Result};
use crate::estimators::{estimate_alpha, AlphaEstimate, CircuitSample};
use crate::oracle::MatroidView;
use crate::progress::{
    compute_core, contract_independent, witness_route, DeletionMethod, SweepPlan,
};
use crate::scheduler::{random_permutation, Query, QuerySpec, RoundLedger};
use crate::ElementId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Greedy,
    Kuw,
    Kps49,
    Main37,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Greedy => "greedy",
            Algo::Kuw => "kuw",
            Algo::Kps49 => "kps49",
            Algo::Main37 => "main37",
        }
    }

    pub fn parse(text: &str) -> Result<Algo> {
        match text {
            "greedy" => Ok(Algo::Greedy),
            "kuw" => Ok(Algo::Kuw),
            "kps49" => Ok(Algo::Kps49),
            "main37" => Ok(Algo::Main37),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    ContractReturn,
    DeleteReturn,
    Exhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub basis: Vec<ElementId>,
    pub ledger: RoundLedger,
    pub peel_trace: Vec<PeelRecord>,
    pub stop_reasons: Vec<StopReason>,
}

/// Oracle check: independent, and maximal against the base ground set.
pub fn verify_basis(original: &MatroidView, basis: &[ElementId]) -> bool {
    let mut engine = original.base().engine(false);
    for &x in basis {
        if engine.push(x) != crate::oracle::Push::Independent {
            return false;
        }
    }
    let in_basis: std::collections::HashSet<ElementId> = basis.iter().copied().collect();
    (0..original.ground_size() as u32)
        .filter(|x| !in_basis.contains(x))
        .all(|x| engine.spans(x))
}

// ---------------------------------------------------------------------------
// Sequential greedy baseline
// ---------------------------------------------------------------------------

/// Scan elements in id order, keeping each one that extends the kept set
/// independently. One query per element, one round per query.
pub fn greedy_basis(view: &MatroidView) -> Vec<ElementId> {
    view.greedy_scan(&view.live_elements())
}

fn greedy_run(view: &MatroidView, cfg: &AlgorithmConfig, seed: u64) -> Result<RunResult> {
    let mut ledger = RoundLedger::with_budget_cap(seed, cfg.budget_cap);
    let mut kept: Vec<ElementId> = Vec::new();
    for x in view.live_elements() {
        let mut probe = kept.clone();
        probe.push(x);
        let ans = ledger.submit_batch(&[Query::new(view, QuerySpec::Subset(probe))])?;
        if ans[0].boolean() {
            kept.push(x);
        }
    }
    Ok(RunResult { basis: kept, ledger, peel_trace: Vec::new(), stop_reasons: Vec::new() })
}

// ---------------------------------------------------------------------------
// Grouped-prefix baseline
// ---------------------------------------------------------------------------

/// One round per iteration: split the live elements into ⌈√n⌉ random groups
/// and scan every group's prefixes. A fully independent group (the largest)
/// is contracted; otherwise each group donates one redundant element — the
/// one right after its longest independent prefix.
pub fn kuw_core(
    view: &MatroidView,
    _cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<MatroidView> {
    let mut view = view.clone();
    let mut rng = ledger.fork_rng(label);
    loop {
        let live = view.live_elements();
        let n1 = live.len();
        if n1 == 0 {
            return Ok(view);
        }
        let group_count = (n1 as f64).sqrt().ceil() as usize;
        let shuffled = random_permutation(&live, &mut rng);
        let mut groups: Vec<Arc<Vec<ElementId>>> = Vec::with_capacity(group_count);
        let base = n1 / group_count;
        let extra = n1 % group_count;
        let mut at = 0usize;
        for g in 0..group_count {
            let len = base + usize::from(g < extra);
            if len == 0 {
                continue;
            }
            groups.push(Arc::new(shuffled[at..at + len].to_vec()));
            at += len;
        }

        let batch: Vec<Query> = groups
            .iter()
            .map(|g| Query::new(&view, QuerySpec::PrefixScan { order: g.clone() }))
            .collect();
        let answers = ledger.submit_chunked(&batch)?;

        let mut best_independent: Option<usize> = None;
        for (i, a) in answers.iter().enumerate() {
            if a.first_dependent().is_none()
                && best_independent.is_none_or(|b| groups[i].len() > groups[b].len())
            {
                best_independent = Some(i);
            }
        }
        match best_independent {
            Some(i) => {
                view = view.contract_all(&groups[i])?;
            }
            None => {
                let victims: Vec<ElementId> = groups
                    .iter()
                    .zip(&answers)
                    .map(|(g, a)| g[a.first_dependent().expect("no group independent") - 1])
                    .collect();
                view = view.delete_all(&victims)?;
            }
        }
    }
}

fn kuw_run(view: &MatroidView, cfg: &AlgorithmConfig, seed: u64) -> Result<RunResult> {
    let mut ledger = RoundLedger::with_budget_cap(seed, cfg.budget_cap);
    let done = kuw_core(view, cfg, &mut ledger, "kuw")?;
    Ok(RunResult {
        basis: done.contracted().to_vec(),
        ledger,
        peel_trace: Vec::new(),
        stop_reasons: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Decomposition phase shared by both drivers
// ---------------------------------------------------------------------------

/// A peeled set carried out of a decomposition phase for later execution.
pub struct AccumSet {
    pub set: Vec<ElementId>,
    pub alpha: AlphaEstimate,
    pub good: bool,
    pub sample: CircuitSample,
}

pub struct DecompOutcome {
    pub reason: StopReason,
    /// Deletion candidates in peel order.
    pub accumulated: Vec<AccumSet>,
    /// The set triggering a contraction stop, with the view it lives in.
    pub trigger: Option<(AccumSet, MatroidView)>,
    pub records: Vec<PeelRecord>,
}

/// The early-stopping peeling loop: peel a globally-optimal set, estimate its
/// α, stop to contract when α̂/|S|·n reaches i·f, otherwise bank the set's
/// deletion potential (|S| when good, |S|^{3/2}/α̂ when bad) and stop to
/// delete once the bank reaches i·f. Runs until half the ground set is
/// peeled when no stop fires (the `Exhausted` outcome, whose accumulated
/// sets the driver still executes). Expects a preprocessed view.
pub fn guaranteed_progress_decomposition(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<DecompOutcome> {
    let n = view.live_count();
    let f = cfg.progress_target(n);
    let mut working = view.clone();
    let mut t_acc = 0.0f64;
    let mut i = 0usize;
    let mut accumulated = Vec::new();
    let mut records = Vec::new();

    while working.live_count() * 2 >= n {
        i += 1;
        let peel_label = format!("{label}/peel{i}");
        let strategy =
            if working.live_count() <= cfg.exact_cap { Strategy::Exact } else { Strategy::Greedy };
        let peel = globally_optimal_constructor(&working, cfg, strategy, ledger, &peel_label)?;
        let alpha =
            estimate_alpha(&working, &peel.set, cfg, ledger, &format!("{peel_label}/alpha"))?;
        let s_len = peel.set.len();
        let contract_lhs = alpha.clamped() as f64 / s_len as f64 * n as f64;

        if contract_lhs >= i as f64 * f {
            records.push(PeelRecord {
                index: i,
                set: peel.set.clone(),
                alpha_hat: alpha.value,
                size_bucket: size_bucket(s_len),
                good: false,
                progress_kind: ProgressKind::None,
                progress_count: 0,
                contract_lhs,
                delete_lhs: t_acc,
            });
            let trigger =
                AccumSet { set: peel.set, alpha, good: false, sample: peel.sample };
            return Ok(DecompOutcome {
                reason: StopReason::ContractReturn,
                accumulated,
                trigger: Some((trigger, working)),
                records,
            });
        }

        let split = compute_core(&peel.sample, &alpha);
        let good = split.is_majority_core();
        t_acc += if good {
            s_len as f64
        } else {
            (s_len as f64).powf(1.5) / alpha.clamped() as f64
        };
        records.push(PeelRecord {
            index: i,
            set: peel.set.clone(),
            alpha_hat: alpha.value,
            size_bucket: size_bucket(s_len),
            good,
            progress_kind: ProgressKind::None,
            progress_count: 0,
            contract_lhs,
            delete_lhs: t_acc,
        });
        accumulated.push(AccumSet { set: peel.set.clone(), alpha, good, sample: peel.sample });
        if t_acc >= i as f64 * f {
            return Ok(DecompOutcome {
                reason: StopReason::DeleteReturn,
                accumulated,
                trigger: None,
                records,
            });
        }
        working = working.delete_all(&peel.set)?;
    }
    Ok(DecompOutcome { reason: StopReason::Exhausted, accumulated, trigger: None, records })
}

/// The simpler comparator's peeling loop: accumulate while α̂ <= √|S| toward
/// the target i·t, stop to contract at the first large-α set.
pub fn simple_decomposition(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<DecompOutcome> {
    let n = view.live_count();
    let t_target = cfg.progress_target_49(n);
    let mut working = view.clone();
    let mut t_acc = 0.0f64;
    let mut i = 0usize;
    let mut accumulated = Vec::new();
    let mut records = Vec::new();
    // The comparator peels greedily-optimal sets: singleton removals only.
    let mut peel_cfg = cfg.clone();
    peel_cfg.singleton_removals = true;

    while working.live_count() * 2 >= n {
        i += 1;
        let peel_label = format!("{label}/peel{i}");
        let strategy =
            if working.live_count() <= cfg.exact_cap { Strategy::Exact } else { Strategy::Greedy };
        let peel =
            globally_optimal_constructor(&working, &peel_cfg, strategy, ledger, &peel_label)?;
        let alpha =
            estimate_alpha(&working, &peel.set, cfg, ledger, &format!("{peel_label}/alpha"))?;
        let s_len = peel.set.len();
        let small_alpha = (alpha.clamped() as f64) <= (s_len as f64).sqrt();
        let contract_lhs = alpha.clamped() as f64 / s_len as f64 * n as f64;

        if small_alpha {
            t_acc += s_len as f64;
            records.push(PeelRecord {
                index: i,
                set: peel.set.clone(),
                alpha_hat: alpha.value,
                size_bucket: size_bucket(s_len),
                good: true,
                progress_kind: ProgressKind::None,
                progress_count: 0,
                contract_lhs,
                delete_lhs: t_acc,
            });
            accumulated.push(AccumSet {
                set: peel.set.clone(),
                alpha,
                good: true,
                sample: peel.sample,
            });
            if t_acc >= i as f64 * t_target {
                return Ok(DecompOutcome {
                    reason: StopReason::DeleteReturn,
                    accumulated,
                    trigger: None,
                    records,
                });
            }
            working = working.delete_all(&peel.set)?;
        } else {
            records.push(PeelRecord {
                index: i,
                set: peel.set.clone(),
                alpha_hat: alpha.value,
                size_bucket: size_bucket(s_len),
                good: false,
                progress_kind: ProgressKind::None,
                progress_count: 0,
                contract_lhs,
                delete_lhs: t_acc,
            });
            let trigger = AccumSet { set: peel.set, alpha, good: false, sample: peel.sample };
            return Ok(DecompOutcome {
                reason: StopReason::ContractReturn,
                accumulated,
                trigger: Some((trigger, working)),
                records,
            });
        }
    }
    Ok(DecompOutcome { reason: StopReason::Exhausted, accumulated, trigger: None, records })
}

// ---------------------------------------------------------------------------
// Deferred-action execution
// ---------------------------------------------------------------------------

/// Execute the banked deletions of a decomposition phase: all sets' span
/// sweeps share rounds (each sweep runs in the view restricted to its own
/// set), and sets the sweep cannot serve fall back to the zero-round witness
/// route over their stored samples. Returns per-set deletion counts and the
/// union of deleted elements.
fn execute_deletions(
    view: &MatroidView,
    sets: &[AccumSet],
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<(Vec<ElementId>, Vec<(usize, DeletionMethod)>)> {
    if sets.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let ambient = view.live_count();
    let restricted: Vec<MatroidView> =
        sets.iter().map(|a| restrict_to(view, &a.set)).collect::<Result<_>>()?;

    let mut rng = ledger.fork_rng(&format!("{label}/sweep"));
    let plans: Vec<Option<SweepPlan>> = sets
        .iter()
        .map(|a| SweepPlan::new_capped(&a.set, &a.alpha, cfg, ambient, view.ground_size(), &mut rng))
        .collect();

    let mut batch: Vec<Query> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new(); // (answer offset, count) per set
    for (i, plan) in plans.iter().enumerate() {
        let specs = plan.as_ref().map(SweepPlan::specs).unwrap_or_default();
        spans.push((batch.len(), specs.len()));
        batch.extend(specs.into_iter().map(|spec| Query::new(&restricted[i], spec)));
    }
    let answers = if batch.is_empty() { Vec::new() } else { ledger.submit_chunked(&batch)? };

    let mut all_deleted: Vec<ElementId> = Vec::new();
    let mut per_set = Vec::with_capacity(sets.len());
    for (i, a) in sets.iter().enumerate() {
        let sweep = plans[i].as_ref().map(|p| {
            let (off, cnt) = spans[i];
            p.collect(&answers[off..off + cnt])
        });
        let sweep_deleted = sweep.map(|(d, _)| d).unwrap_or_default();

        let (chosen, method) = if a.good && !sweep_deleted.is_empty() {
            (sweep_deleted, DeletionMethod::CoreRecovery)
        } else {
            let split = compute_core(&a.sample, &a.alpha);
            let wit = witness_route(&restricted[i], &a.sample, &split, cfg)?;
            if wit.deleted.len() > sweep_deleted.len() {
                (wit.deleted, DeletionMethod::ShortCircuit)
            } else if !sweep_deleted.is_empty() {
                let m = if a.good {
                    DeletionMethod::CoreRecovery
                } else {
                    DeletionMethod::NonCoreMass
                };
                (sweep_deleted, m)
            } else {
                (Vec::new(), DeletionMethod::ShortCircuit)
            }
        };
        per_set.push((chosen.len(), method));
        all_deleted.extend(chosen);
    }
    Ok((all_deleted, per_set))
}

/// Guaranteed fallback progress when the decomposition cannot act: contract
/// the whole live set if independent, else the longest sampled independent
/// prefix, else strip loops (every loop is span-sound to delete).
fn fallback_progress(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    ledger: &mut RoundLedger,
    label: &str,
) -> Result<MatroidView> {
    let live = view.live_elements();
    if live.is_empty() {
        return Ok(view.clone());
    }
    let ans = ledger.submit_batch(&[Query::new(view, QuerySpec::Subset(live.clone()))])?;
    if ans[0].boolean() {
        return view.contract_all(&live);
    }
    let sentinel = AlphaEstimate { value: live.len() + 1, target_size: live.len() };
    match contract_independent(view, live.len(), &sentinel, cfg, ledger, label) {
        Ok(prefix) => view.contract_all(&prefix),
        Err(Error::ContractionFailed { .. }) => {
            // Every sampled permutation opened with a loop; scan singletons.
            let batch: Vec<Query> =
                live.iter().map(|&x| Query::new(view, QuerySpec::Subset(vec![x]))).collect();
            let answers = ledger.submit_chunked(&batch)?;
            let non_loop = live.iter().zip(&answers).find(|(_, a)| a.boolean());
            match non_loop {
                Some((&x, _)) => view.contract_all(&[x]),
                None => view.delete_all(&live),
            }
        }
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

enum Phase {
    Main,
    Simple,
}

fn decomposition_driver(
    view0: &MatroidView,
    cfg: &AlgorithmConfig,
    seed: u64,
    phase: Phase,
) -> Result<RunResult> {
    let mut ledger = RoundLedger::with_budget_cap(seed, cfg.budget_cap);
    let mut view = view0.clone();
    let n0 = view.live_count();
    let threshold = cfg.kuw_threshold(n0);
    let mut trace: Vec<PeelRecord> = Vec::new();
    let mut reasons: Vec<StopReason> = Vec::new();
    let mut inv = 0usize;

    loop {
        if view.live_count() == 0 {
            break;
        }
        if view.live_count() <= threshold {
            view = kuw_core(&view, cfg, &mut ledger, &format!("tail{inv}"))?;
            break;
        }
        inv += 1;
        let label = format!("inv{inv}");
        let before = view.live_count();

        let step = (|| -> Result<(StopReason, Vec<PeelRecord>, MatroidView)> {
            // Preprocessing deletes real elements; apply it to the real view.
            let pre = remove_small_circuits(&view, cfg.c0, &mut ledger)?;
            if pre.live_count() == 0 {
                return Ok((StopReason::Exhausted, Vec::new(), pre));
            }
            let mut outcome = match phase {
                Phase::Main => guaranteed_progress_decomposition(&pre, cfg, &mut ledger, &label)?,
                Phase::Simple => simple_decomposition(&pre, cfg, &mut ledger, &label)?,
            };
            let next = match (outcome.reason, outcome.trigger.take()) {
                (StopReason::ContractReturn, Some((trigger, parent))) => {
                    let got = contract_independent(
                        &parent,
                        trigger.set.len(),
                        &trigger.alpha,
                        cfg,
                        &mut ledger,
                        &format!("{label}/contract"),
                    )?;
                    if let Some(rec) = outcome.records.last_mut() {
                        rec.progress_kind = ProgressKind::Contracted;
                        rec.progress_count = got.len();
                    }
                    pre.contract_all(&got)?
                }
                _ => {
                    let (deleted, per_set) =
                        execute_deletions(&pre, &outcome.accumulated, cfg, &mut ledger, &label)?;
                    for (rec, (count, _method)) in outcome.records.iter_mut().zip(&per_set) {
                        if *count > 0 {
                            rec.progress_kind = ProgressKind::Deleted;
                            rec.progress_count = *count;
                        }
                    }
                    if deleted.is_empty() {
                        return Err(Error::EmptyDeletion);
                    }
                    pre.delete_all(&deleted)?
                }
            };
            Ok((outcome.reason, outcome.records, next))
        })();

        match step {
            Ok((reason, records, next)) => {
                reasons.push(reason);
                trace.extend(records);
                view = next;
            }
            Err(Error::EmptyPeel) | Err(Error::EmptyDeletion) | Err(Error::ContractionFailed { .. }) => {
                view = fallback_progress(&view, cfg, &mut ledger, &format!("{label}/fb"))?;
            }
            Err(_) => {
                // Correctness first: any other failure hands the remnant to
                // the grouped-prefix baseline.
                view = kuw_core(&view, cfg, &mut ledger, &format!("{label}/bail"))?;
                break;
            }
        }
        if view.live_count() >= before {
            view = kuw_core(&view, cfg, &mut ledger, &format!("{label}/stall"))?;
            break;
        }
    }

    Ok(RunResult {
        basis: view.contracted().to_vec(),
        ledger,
        peel_trace: trace,
        stop_reasons: reasons,
    })
}

/// The simpler early-stopping driver (the comparison algorithm).
pub fn new_decomposition_49(
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Result<RunResult> {
    decomposition_driver(view, cfg, seed, Phase::Simple)
}

/// The main driver: early-stopping decomposition with good/bad accounting
/// and balanced deletion.
pub fn find_basis_37(view: &MatroidView, cfg: &AlgorithmConfig, seed: u64) -> Result<RunResult> {
    decomposition_driver(view, cfg, seed, Phase::Main)
}

/// The grouped-prefix baseline as a standalone run.
pub fn kuw_basis(view: &MatroidView, cfg: &AlgorithmConfig, seed: u64) -> Result<RunResult> {
    kuw_run(view, cfg, seed)
}

/// Run any of the four algorithms with a fresh ledger.
pub fn run_algorithm(
    algo: Algo,
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Result<RunResult> {
    match algo {
        Algo::Greedy => greedy_run(view, cfg, seed),
        Algo::Kuw => kuw_run(view, cfg, seed),
        Algo::Kps49 => new_decomposition_49(view, cfg, seed),
        Algo::Main37 => find_basis_37(view, cfg, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::MatroidInstance;

    fn cfg() -> AlgorithmConfig {
        AlgorithmConfig::default()
    }

    fn check_all(algo: Algo, m: MatroidInstance, seed: u64) -> RunResult {
        let view = MatroidView::of(m);
        let expect = greedy_basis(&view).len();
        let run = run_algorithm(algo, &view, &cfg(), seed).unwrap();
        assert!(verify_basis(&view, &run.basis), "invalid basis from {algo:?}");
        assert_eq!(run.basis.len(), expect, "basis size mismatch for {algo:?}");
        run
    }

    #[test]
    fn greedy_examples() {
        let v = MatroidView::of(MatroidInstance::uniform(5, 2));
        assert_eq!(greedy_basis(&v), vec![0, 1]);
        let tri = MatroidView::of(
            MatroidInstance::graphic(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap(),
        );
        assert_eq!(greedy_basis(&tri), vec![0, 1]);
        let p = MatroidView::of(
            MatroidInstance::partition(vec![0, 0, 0, 1, 1, 1], vec![1, 1]).unwrap(),
        );
        assert_eq!(greedy_basis(&p), vec![0, 3]);
    }

    #[test]
    fn kuw_on_partition_blocks() {
        let m = MatroidInstance::partition(vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3],
            vec![1, 1, 1, 1]).unwrap();
        let run = check_all(Algo::Kuw, m, 1);
        assert_eq!(run.basis.len(), 4);
    }

    #[test]
    fn kuw_round_bound_on_uniform() {
        let run = check_all(Algo::Kuw, MatroidInstance::uniform(256, 16), 2);
        assert!(run.ledger.rounds <= 48, "rounds = {}", run.ledger.rounds);
    }

    #[test]
    fn kuw_single_element() {
        let run = check_all(Algo::Kuw, MatroidInstance::uniform(1, 1), 3);
        assert_eq!(run.ledger.rounds, 1);
        assert_eq!(run.basis, vec![0]);
    }

    #[test]
    fn main37_dense_uniform_contracts_fast() {
        let run = check_all(Algo::Main37, MatroidInstance::uniform(256, 64), 4);
        assert!(run.stop_reasons.contains(&StopReason::ContractReturn));
    }

    #[test]
    fn main37_rank1_deletes() {
        let run = check_all(Algo::Main37, MatroidInstance::uniform(512, 1), 5);
        assert_eq!(run.basis.len(), 1);
    }

    #[test]
    fn main37_free_matroid() {
        let run = check_all(Algo::Main37, MatroidInstance::uniform(64, 64), 6);
        assert_eq!(run.basis.len(), 64);
    }

    #[test]
    fn main37_empty_ground() {
        let run = check_all(Algo::Main37, MatroidInstance::uniform(0, 0), 7);
        assert!(run.basis.is_empty());
        assert_eq!(run.ledger.rounds, 0);
    }

    #[test]
    fn kps49_rank1_and_uniform() {
        check_all(Algo::Kps49, MatroidInstance::uniform(300, 1), 8);
        check_all(Algo::Kps49, MatroidInstance::uniform(256, 64), 9);
    }

    #[test]
    fn all_algorithms_agree_on_mixed_direct_sum() {
        let parts = vec![
            MatroidInstance::uniform(24, 3),
            MatroidInstance::uniform(16, 16),
            MatroidInstance::graphic(6, vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
                .unwrap(),
            MatroidInstance::uniform(20, 1),
        ];
        let m = MatroidInstance::direct_sum(parts);
        for (i, algo) in [Algo::Kuw, Algo::Kps49, Algo::Main37].into_iter().enumerate() {
            check_all(algo, m.clone(), 10 + i as u64);
        }
    }

    #[test]
    fn decomposition_contract_return_on_dense_uniform() {
        // High rank relative to the peel size trips the contraction stop on
        // the very first iteration.
        let view = MatroidView::of(MatroidInstance::uniform(256, 85));
        let mut ledger = RoundLedger::new(21);
        let out =
            guaranteed_progress_decomposition(&view, &cfg(), &mut ledger, "t").unwrap();
        assert_eq!(out.reason, StopReason::ContractReturn);
        assert!(out.trigger.is_some());
        assert_eq!(out.records.len(), 1);
        assert!(out.records[0].contract_lhs >= cfg().progress_target(256));
    }

    #[test]
    fn decomposition_delete_return_on_rank1() {
        // One good whole-ground peel banks |S| >= f immediately.
        let view = MatroidView::of(MatroidInstance::uniform(512, 1));
        let mut ledger = RoundLedger::new(22);
        let out =
            guaranteed_progress_decomposition(&view, &cfg(), &mut ledger, "t").unwrap();
        assert_eq!(out.reason, StopReason::DeleteReturn);
        assert_eq!(out.accumulated.len(), 1);
        assert!(out.accumulated[0].good);
    }

    #[test]
    fn decomposition_exhausts_when_no_stop_can_fire() {
        // An unreachable progress target forces the loop-guard exit; the
        // accumulated peels still cover at least half the ground set and the
        // driver executes them anyway.
        let mut c = cfg();
        c.f_min = 1e12;
        c.c_rem = 2.0;
        let g = crate::oracle::generate::GenSpec::parse("gen:cascade:block=64").unwrap();
        let view = MatroidView::of(g.build(1024, 3).unwrap());
        let mut ledger = RoundLedger::new(23);
        let out = guaranteed_progress_decomposition(&view, &c, &mut ledger, "t").unwrap();
        assert_eq!(out.reason, StopReason::Exhausted);
        let peeled: usize = out.accumulated.iter().map(|a| a.set.len()).sum();
        assert!(peeled * 2 >= 1024, "peeled only {peeled}");
        let run = run_algorithm(Algo::Main37, &view, &c, 23).unwrap();
        assert!(verify_basis(&view, &run.basis));
        assert!(run.stop_reasons.contains(&StopReason::Exhausted));
    }

    #[test]
    fn determinism_same_seed_same_result() {
        let m = MatroidInstance::uniform(128, 32);
        let v = MatroidView::of(m);
        let a = run_algorithm(Algo::Main37, &v, &cfg(), 42).unwrap();
        let b = run_algorithm(Algo::Main37, &v, &cfg(), 42).unwrap();
        assert_eq!(a.basis, b.basis);
        assert_eq!(a.ledger, b.ledger);
        let c = run_algorithm(Algo::Main37, &v, &cfg(), 43).unwrap();
        assert!(verify_basis(&v, &c.basis));
    }

    #[test]
    fn graphic_random_instance_all_algos() {
        let g = crate::oracle::generate::GenSpec::parse("gen:graphic-gnp:v=64,c=3").unwrap();
        let m = g.build(64, 99).unwrap();
        for (i, algo) in [Algo::Kuw, Algo::Kps49, Algo::Main37].into_iter().enumerate() {
            check_all(algo, m.clone(), 20 + i as u64);
        }
    }

    #[test]
    fn linear_gf7_all_algos() {
        let g = crate::oracle::generate::GenSpec::parse("gen:linear:p=7,rows=12").unwrap();
        let m = g.build(96, 7).unwrap();
        for (i, algo) in [Algo::Kuw, Algo::Kps49, Algo::Main37].into_iter().enumerate() {
            check_all(algo, m.clone(), 30 + i as u64);
        }
    }
}
