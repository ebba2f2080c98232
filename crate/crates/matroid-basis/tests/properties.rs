//! Structural invariants checked against brute force on small instances,
//! plus the closed-form and Monte-Carlo reference checks for the sampling
//! subroutines.

mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use matroid_basis::basis::{run_algorithm, Algo};
use matroid_basis::estimators::{
    estimate_alpha, estimate_hitting, estimate_marginals, estimate_q, first_circuit,
    sample_first_circuits,
};
use matroid_basis::oracle::{Circuit, MatroidInstance, MatroidView};
use matroid_basis::progress::{recover_redundant_spanned, short_circuit_bulk_delete};
use matroid_basis::scheduler::RoundLedger;
use matroid_basis::{AlgorithmConfig, ElementId};

use common::partition_exact_alpha;

// ---------------------------------------------------------------------------
// Instance strategies
// ---------------------------------------------------------------------------

fn arb_instance() -> impl Strategy<Value = MatroidInstance> {
    prop_oneof![
        (2..9usize, 0..9usize).prop_map(|(n, r)| MatroidInstance::uniform(n, r.min(n))),
        (1..4usize, 2..5usize).prop_flat_map(|(blocks, per)| {
            let n = blocks * per;
            (proptest::collection::vec(0..blocks as u32, n), proptest::collection::vec(1..3u32, blocks))
                .prop_map(|(block_of, caps)| MatroidInstance::partition(block_of, caps).unwrap())
        }),
        (2..5usize).prop_flat_map(|v| {
            proptest::collection::vec((0..v as u32, 0..v as u32), 1..8)
                .prop_map(move |edges| MatroidInstance::graphic(v, edges).unwrap())
        }),
        (1..4usize, 2..8usize, prop_oneof![Just(2u64), Just(3), Just(7)]).prop_flat_map(
            |(rows, cols, p)| {
                proptest::collection::vec(0..p, rows * cols)
                    .prop_map(move |data| MatroidInstance::linear(p, rows, &data).unwrap())
            }
        ),
    ]
}

fn all_subsets(n: usize) -> impl Iterator<Item = Vec<ElementId>> {
    (0..(1usize << n)).map(move |mask| (0..n as u32).filter(|i| mask >> i & 1 == 1).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Downward closure and the exchange axiom, exhaustively on small ground
    // sets.
    #[test]
    fn independence_is_a_matroid(m in arb_instance()) {
        let n = m.ground_size();
        prop_assert!(m.is_independent(&[]));
        let independents: Vec<Vec<ElementId>> =
            all_subsets(n).filter(|s| m.is_independent(s)).collect();
        let indep_set: HashSet<Vec<ElementId>> = independents.iter().cloned().collect();
        // Downward closure: drop any one element of an independent set.
        for s in &independents {
            for skip in 0..s.len() {
                let sub: Vec<ElementId> = s.iter().enumerate()
                    .filter(|(j, _)| *j != skip).map(|(_, &x)| x).collect();
                prop_assert!(indep_set.contains(&sub), "downward closure failed at {s:?}");
            }
        }
        // Exchange: a larger independent set lends an element to a smaller one.
        for s in &independents {
            for t in &independents {
                if s.len() < t.len() {
                    let s_set: HashSet<ElementId> = s.iter().copied().collect();
                    let ok = t.iter().any(|&e| {
                        if s_set.contains(&e) { return false; }
                        let mut ext = s.clone();
                        ext.push(e);
                        ext.sort_unstable();
                        indep_set.contains(&ext)
                    });
                    prop_assert!(ok, "exchange failed for {s:?} vs {t:?}");
                }
            }
        }
    }

    // Deleting then contracting equals contracting then deleting when the
    // sets are disjoint, at query level over every subset.
    #[test]
    fn delete_contract_commute(m in arb_instance(), pick in proptest::collection::vec(0..3u8, 10)) {
        let n = m.ground_size();
        let view = MatroidView::of(m);
        let mut del = Vec::new();
        let mut con = Vec::new();
        for x in 0..n {
            match pick[x % pick.len()] {
                1 => del.push(x as ElementId),
                2 => con.push(x as ElementId),
                _ => {}
            }
        }
        prop_assume!(view.base().is_independent(&con));
        let a = view.delete_all(&del).unwrap().contract_all(&con).unwrap();
        let b = view.contract_all(&con).unwrap().delete_all(&del).unwrap();
        for s in all_subsets(n) {
            if s.iter().all(|&x| a.is_live(x)) {
                prop_assert_eq!(
                    a.is_independent(&s).unwrap(),
                    b.is_independent(&s).unwrap()
                );
            }
        }
    }

    // The two-round circuit extraction agrees with brute force.
    #[test]
    fn first_circuit_matches_brute_force(m in arb_instance(), seed in 0u64..1000) {
        let view = MatroidView::of(m);
        let mut ledger = RoundLedger::new(seed);
        let order = matroid_basis::scheduler::random_permutation(
            &view.live_elements(), &mut ledger.fork_rng("perm"));
        let (len, circuit) = first_circuit(&view, &order, &mut ledger).unwrap();

        // Brute force: scan prefixes directly, then find the unique minimal
        // dependent subset of the first dependent prefix.
        let mut brute_len = None;
        for j in 1..=order.len() {
            if !view.is_independent(&order[..j]).unwrap() {
                brute_len = Some(j);
                break;
            }
        }
        prop_assert_eq!(len, brute_len);
        if let (Some(j), Some(c)) = (brute_len, circuit) {
            let prefix = &order[..j];
            let mut minimal: Option<Vec<ElementId>> = None;
            for mask in 1..(1usize << j) {
                let cand: Vec<ElementId> = prefix.iter().enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
                if !view.is_independent(&cand).unwrap() {
                    let strictly_minimal = (0..cand.len()).all(|skip| {
                        let sub: Vec<ElementId> = cand.iter().enumerate()
                            .filter(|(i, _)| *i != skip).map(|(_, &x)| x).collect();
                        view.is_independent(&sub).unwrap()
                    });
                    if strictly_minimal {
                        minimal = Some(cand);
                        break;
                    }
                }
            }
            let mut want = minimal.expect("dependent prefix holds a circuit");
            want.sort_unstable();
            prop_assert_eq!(c.members(), &want[..]);
        }
    }

    // q̂ and p̂ are monotone under subset inclusion.
    #[test]
    fn estimates_are_monotone(seed in 0u64..500) {
        let m = MatroidInstance::uniform(10, 3);
        let view = MatroidView::of(m);
        let mut ledger = RoundLedger::new(seed);
        let live = view.live_elements();
        let sample = sample_first_circuits(&view, &live, 400, &mut ledger, "s").unwrap();
        let t1: Vec<ElementId> = vec![0, 1, 2];
        let t2: Vec<ElementId> = vec![0, 1, 2, 3, 4];
        prop_assert!(estimate_q(&sample, &t1).unwrap() <= estimate_q(&sample, &t2).unwrap());
        prop_assert!(
            estimate_hitting(&sample, &t1).unwrap() <= estimate_hitting(&sample, &t2).unwrap()
        );
    }

    // The greedy short-circuit deletion honors its counting bound on random
    // parallel-class instances.
    #[test]
    fn short_circuit_bound_holds(classes in 2..7usize, size in 2..5usize, seed in 0u64..100) {
        let mut edges = Vec::new();
        for c in 0..classes as u32 {
            for _ in 0..size {
                edges.push((c, classes as u32));
            }
        }
        let view = MatroidView::of(MatroidInstance::graphic(classes + 1, edges).unwrap());
        let n = (classes * size) as u32;
        let w: Vec<ElementId> = (0..n).collect();
        let mut witnesses = std::collections::HashMap::new();
        // Witness of each element: it plus the next element of its class.
        let mut rng = RoundLedger::new(seed).fork_rng("w");
        use rand::Rng;
        for x in 0..n {
            let class = x as usize / size;
            let lo = (class * size) as u32;
            let mut partner = lo + rng.random_range(0..size as u32);
            if partner == x {
                partner = lo + (x - lo + 1) % size as u32;
            }
            witnesses.insert(x, Circuit::new(vec![x, partner]));
        }
        let cfg = AlgorithmConfig::default();
        let res = short_circuit_bulk_delete(&view, &w, &witnesses, &[], 2, &cfg).unwrap();
        prop_assert!(res.deleted.len() >= w.len().div_ceil(3));
        // Rank preservation is asserted inside; check the final rank too.
        let kept: Vec<ElementId> =
            w.iter().copied().filter(|x| !res.deleted.contains(x)).collect();
        prop_assert_eq!(view.rank_of(&kept), classes);
    }
}

// ---------------------------------------------------------------------------
// Dual-route and closed-form reference checks
// ---------------------------------------------------------------------------

/// Exhaustive matroid-axiom check at the full desk scale (n = 12): downward
/// closure over every subset and the exchange property over every pair of
/// independent sets.
#[test]
fn axioms_hold_exhaustively_at_n12() {
    let instances = vec![
        MatroidInstance::uniform(12, 5),
        MatroidInstance::partition(vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3], vec![2, 1, 2, 1])
            .unwrap(),
        MatroidInstance::graphic(
            5,
            vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 0),
                (0, 2),
                (1, 3),
                (2, 4),
                (0, 3),
                (1, 4),
                (0, 0),
                (1, 2),
            ],
        )
        .unwrap(),
        MatroidInstance::direct_sum(vec![
            MatroidInstance::uniform(5, 2),
            MatroidInstance::linear(3, 2, &[1, 0, 1, 2, 0, 1, 1, 1, 0, 2, 2, 1, 1, 2]).unwrap(),
        ]),
    ];
    for m in instances {
        let n = m.ground_size();
        assert_eq!(n, 12);
        assert!(m.is_independent(&[]));
        let mut independent_masks: Vec<u32> = Vec::new();
        let mut is_indep = vec![false; 1 << n];
        for mask in 0..(1u32 << n) {
            let set: Vec<ElementId> = (0..n as u32).filter(|i| mask >> i & 1 == 1).collect();
            if m.is_independent(&set) {
                is_indep[mask as usize] = true;
                independent_masks.push(mask);
            }
        }
        // Downward closure.
        for &mask in &independent_masks {
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    assert!(is_indep[(mask ^ (1 << i)) as usize], "not downward closed");
                }
            }
        }
        // Exchange, grouped by cardinality so only |S| < |T| pairs meet.
        let mut by_size: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
        for &mask in &independent_masks {
            by_size[mask.count_ones() as usize].push(mask);
        }
        for small in 0..n {
            for large in small + 1..=n {
                for &s in &by_size[small] {
                    for &t in &by_size[large] {
                        let candidates = t & !s;
                        let ok = (0..n)
                            .any(|i| candidates >> i & 1 == 1 && is_indep[(s | 1 << i) as usize]);
                        assert!(ok, "exchange failed: {s:b} vs {t:b}");
                    }
                }
            }
        }
    }
}

/// Plain row-reduction rank over GF(p), independent of the column-echelon
/// engine the oracle uses.
fn row_reduction_rank(rows: usize, cols: usize, p: u64, data: &[u64], subset: &[ElementId]) -> usize {
    let mut m: Vec<Vec<u64>> = (0..rows)
        .map(|r| subset.iter().map(|&c| data[r * cols + c as usize] % p).collect())
        .collect();
    let width = subset.len();
    let mut rank = 0usize;
    for col in 0..width {
        let pivot = (rank..rows).find(|&r| m[r][col] != 0);
        let Some(pivot) = pivot else { continue };
        m.swap(rank, pivot);
        let inv = mod_inverse(m[rank][col], p);
        for v in m[rank].iter_mut() {
            *v = *v * inv % p;
        }
        for r in 0..rows {
            if r != rank && m[r][col] != 0 {
                let f = m[r][col];
                for c in 0..width {
                    let sub = f * m[rank][c] % p;
                    m[r][c] = (m[r][c] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    let mut base = a % p;
    let mut exp = p - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

#[test]
fn linear_oracle_agrees_with_row_reduction() {
    use rand::Rng;
    for (p, rows, cols, seed) in [(2u64, 6usize, 24usize, 1u64), (7, 4, 18, 2)] {
        let mut rng = RoundLedger::new(seed).fork_rng("mat");
        let data: Vec<u64> = (0..rows * cols).map(|_| rng.random_range(0..p)).collect();
        let m = MatroidInstance::linear(p, rows, &data).unwrap();
        let view = MatroidView::of(m);
        for _ in 0..10_000 {
            let k = rng.random_range(0..=cols);
            let mut subset: Vec<ElementId> = (0..cols as u32).collect();
            for i in 0..k {
                let j = rng.random_range(i..cols);
                subset.swap(i, j);
            }
            subset.truncate(k);
            let by_engine = view.rank_of(&subset);
            let by_rows = row_reduction_rank(rows, cols, p, &data, &subset);
            assert_eq!(by_engine, by_rows, "rank mismatch on {subset:?}");
            assert_eq!(view.is_independent(&subset).unwrap(), by_rows == k);
        }
    }
}

#[test]
fn alpha_sandwich_on_collision_partition() {
    // 64 blocks of 2, capacity 1: exact alpha from the block-collision
    // counting oracle, estimate within the sandwich.
    let exact = partition_exact_alpha(&[2; 64], &[1; 64]);
    assert_eq!(exact, 14);
    let block_of: Vec<u32> = (0..128).map(|i| i / 2).collect();
    let m = MatroidInstance::partition(block_of, vec![1; 64]).unwrap();
    let view = MatroidView::of(m);
    let cfg = AlgorithmConfig::default();
    for seed in 0..20 {
        let mut ledger = RoundLedger::new(seed);
        let a = estimate_alpha(&view, &view.live_elements(), &cfg, &mut ledger, "a").unwrap();
        assert!(
            a.value >= (exact - 1) / 2 && a.value <= 2 * exact,
            "alpha {} outside sandwich of {exact}",
            a.value
        );
    }
}

#[test]
fn sum_of_marginals_equals_mean_circuit_size() {
    let m = MatroidInstance::direct_sum(vec![
        MatroidInstance::uniform(8, 3),
        MatroidInstance::uniform(6, 1),
    ]);
    let view = MatroidView::of(m);
    let mut ledger = RoundLedger::new(3);
    let live = view.live_elements();
    let sample = sample_first_circuits(&view, &live, 5000, &mut ledger, "s").unwrap();
    let table = estimate_marginals(&sample);
    let mean: f64 = sample
        .circuits
        .iter()
        .map(|c| c.as_ref().map_or(0usize, Circuit::len) as f64)
        .sum::<f64>()
        / sample.sample_count() as f64;
    assert!((table.total_mass() - mean).abs() < 1e-9);
}

/// The span-sweep recovery sized against an independent Monte-Carlo oracle of
/// the same process, within a generous two-sided factor of 4.
#[test]
fn span_sweep_matches_monte_carlo_oracle() {
    use rand::seq::SliceRandom;
    struct Case {
        n: usize,
        r: usize,
        c_recovery: f64,
        alpha: usize,
    }
    for case in [
        Case { n: 4096, r: 32, c_recovery: 1.0, alpha: 33 },
        Case { n: 1024, r: 1, c_recovery: 2.0, alpha: 2 },
    ] {
        let mut cfg = AlgorithmConfig::default();
        cfg.c_recovery = case.c_recovery;
        let view = MatroidView::of(MatroidInstance::uniform(case.n, case.r));
        let s = view.live_elements();
        let alpha = matroid_basis::estimators::AlphaEstimate {
            value: case.alpha,
            target_size: case.n,
        };
        let t = cfg.recovery_prefix_len(case.alpha, case.n);
        let reps = case.n / (4 * t);
        assert!(reps >= 1, "case too small for the sweep");

        // Oracle: for a uniform matroid with t >= r, every element outside
        // all kept prefixes is spanned, so |D| = n - |union of prefixes|.
        // Simulate that process directly.
        let mut rng = RoundLedger::new(99).fork_rng("oracle");
        let mut total = 0usize;
        let trials = 50;
        for _ in 0..trials {
            let mut covered: HashSet<ElementId> = HashSet::new();
            for _ in 0..reps {
                let mut pool = s.clone();
                pool.shuffle(&mut rng);
                covered.extend(pool[..t].iter().copied());
            }
            total += case.n - covered.len();
        }
        let oracle = total as f64 / trials as f64;

        let mut ledger = RoundLedger::new(7);
        let res = recover_redundant_spanned(&view, &s, &alpha, &cfg, &mut ledger, "r").unwrap();
        let measured = res.deleted.len() as f64;
        assert!(
            measured >= oracle / 4.0 && measured <= oracle * 4.0,
            "n={} r={}: measured {measured} vs oracle {oracle}",
            case.n,
            case.r
        );
    }
}

#[test]
fn ledger_replay_is_deterministic() {
    let m = MatroidInstance::direct_sum(vec![
        MatroidInstance::uniform(48, 6),
        MatroidInstance::uniform(32, 1),
    ]);
    let view = MatroidView::of(m);
    let cfg = AlgorithmConfig::default();
    for algo in [Algo::Kuw, Algo::Main37, Algo::Kps49] {
        let a = run_algorithm(algo, &view, &cfg, 11).unwrap();
        let b = run_algorithm(algo, &view, &cfg, 11).unwrap();
        assert_eq!(a.basis, b.basis);
        assert_eq!(
            serde_json::to_string(&a.ledger).unwrap(),
            serde_json::to_string(&b.ledger).unwrap()
        );
    }
}
