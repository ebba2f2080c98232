//! Shared test oracles: exact first-circuit statistics by full permutation
//! enumeration, exact feasible-sequence distributions, chi-square p-values,
//! and closed-form alpha for partition matroids. Everything here is
//! independent of the sampling estimators it checks.

use std::collections::HashMap;

use matroid_basis::oracle::MatroidView;
use matroid_basis::ElementId;

/// Exact first-circuit statistics of a set with |S| <= 8, from all |S|!
/// permutations.
pub struct ExactStats {
    pub s: Vec<ElementId>,
    pub total_perms: u64,
    /// within[mask] = number of permutations whose first circuit lies inside
    /// the mask (after subset-sum accumulation).
    within: Vec<u64>,
}

impl ExactStats {
    pub fn compute(view: &MatroidView, s: &[ElementId]) -> ExactStats {
        let k = s.len();
        assert!(k <= 8);
        let restricted = restrict(view, s);
        let mut within = vec![0u64; 1 << k];
        let mut total = 0u64;
        let mut perm: Vec<usize> = (0..k).collect();
        heap_permute(&mut perm, &mut |p| {
            total += 1;
            let order: Vec<ElementId> = p.iter().map(|&i| s[i]).collect();
            if let Some(len) = restricted.first_dependent_prefix(&order) {
                let c = restricted.circuit_in_first_prefix(&order, len).unwrap();
                let mut mask = 0usize;
                for &x in c.members() {
                    mask |= 1 << s.iter().position(|&y| y == x).unwrap();
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
        ExactStats { s: s.to_vec(), total_perms: total, within }
    }

    fn full(&self) -> usize {
        (1 << self.s.len()) - 1
    }

    pub fn mask_of(&self, t: &[ElementId]) -> usize {
        let mut mask = 0usize;
        for &x in t {
            mask |= 1 << self.s.iter().position(|&y| y == x).unwrap();
        }
        mask
    }

    /// Exact q_T: probability the first circuit forms and lies inside T.
    pub fn q(&self, t_mask: usize) -> f64 {
        self.within[t_mask] as f64 / self.total_perms as f64
    }

    /// Exact p_T: probability the first circuit intersects T.
    pub fn hitting(&self, t_mask: usize) -> f64 {
        let formed = self.within[self.full()];
        (formed - self.within[self.full() ^ t_mask]) as f64 / self.total_perms as f64
    }

    pub fn marginal(&self, x: ElementId) -> f64 {
        self.hitting(self.mask_of(&[x]))
    }
}

pub fn restrict(view: &MatroidView, s: &[ElementId]) -> MatroidView {
    let keep: std::collections::HashSet<ElementId> = s.iter().copied().collect();
    let others: Vec<ElementId> =
        view.live_elements().into_iter().filter(|x| !keep.contains(x)).collect();
    if others.is_empty() {
        view.clone()
    } else {
        view.delete_all(&others).unwrap()
    }
}

pub fn heap_permute(items: &mut [usize], f: &mut impl FnMut(&[usize])) {
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

/// Exact distribution of the step-by-step uniform feasible-extension process:
/// map from full sequence to its probability.
pub fn exact_sequence_distribution(view: &MatroidView) -> HashMap<Vec<ElementId>, f64> {
    let mut out = HashMap::new();
    let live = view.live_elements();
    let mut prefix = Vec::new();
    recurse(view, &live, &mut prefix, 1.0, &mut out);
    return out;

    fn recurse(
        view: &MatroidView,
        live: &[ElementId],
        prefix: &mut Vec<ElementId>,
        prob: f64,
        out: &mut HashMap<Vec<ElementId>, f64>,
    ) {
        let feasible: Vec<ElementId> = live
            .iter()
            .copied()
            .filter(|&x| !prefix.contains(&x))
            .filter(|&x| {
                let mut probe = prefix.clone();
                probe.push(x);
                view.is_independent(&probe).unwrap()
            })
            .collect();
        if feasible.is_empty() {
            *out.entry(prefix.clone()).or_insert(0.0) += prob;
            return;
        }
        let p = prob / feasible.len() as f64;
        for x in feasible {
            prefix.push(x);
            recurse(view, live, prefix, p, out);
            prefix.pop();
        }
    }
}

/// Upper-tail chi-square p-value: Q(df/2, x/2) via the regularized
/// incomplete gamma function (series for x < a+1, continued fraction above).
pub fn chi_square_p_value(chi2: f64, df: usize) -> f64 {
    gammq(df as f64 / 2.0, chi2 / 2.0)
}

fn gammq(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gser(a, x)
    } else {
        gcf(a, x)
    }
}

fn gser(a: f64, x: f64) -> f64 {
    let gln = ln_gamma(a);
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-14 {
            break;
        }
    }
    sum * (-x + a * x.ln() - gln).exp()
}

fn gcf(a: f64, x: f64) -> f64 {
    let gln = ln_gamma(a);
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-14 {
            break;
        }
    }
    (-x + a * x.ln() - gln).exp() * h
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation.
    const G: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5 - (x + 0.5) * (x + 5.5).ln();
    let mut ser = 1.000000000190015;
    for g in G {
        y += 1.0;
        ser += g / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Exact alpha for a partition matroid given per-block sizes and caps: the
/// least k at which a uniformly random k-subset is independent with
/// probability at most 1/2. Counts independent k-subsets by convolving
/// per-block binomial polynomials.
pub fn partition_exact_alpha(block_sizes: &[usize], caps: &[usize]) -> usize {
    let n: usize = block_sizes.iter().sum();
    let mut ways = vec![0.0f64; n + 1];
    ways[0] = 1.0;
    let mut filled = 0usize;
    for (&size, &cap) in block_sizes.iter().zip(caps) {
        let mut next = vec![0.0f64; n + 1];
        for used in 0..=filled {
            if ways[used] == 0.0 {
                continue;
            }
            for take in 0..=cap.min(size) {
                next[used + take] += ways[used] * binom(size, take);
            }
        }
        filled += cap.min(size);
        ways = next;
    }
    for k in 1..=n {
        let p_indep = ways[k] / binom(n, k);
        if p_indep <= 0.5 {
            return k;
        }
    }
    n + 1
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
