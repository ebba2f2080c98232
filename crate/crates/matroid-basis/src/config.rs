//! Algorithm configuration.
//!
//! The asymptotic constants in the underlying algorithms (thresholds like
//! 2^-20, sample budgets like n^10) are far outside what a desk-scale run can
//! exercise, so every one of them is a tunable here with defaults chosen to
//! make each branch of the algorithms reachable on instances up to a few
//! thousand elements. Tests pin these defaults; the CLI accepts overrides via
//! a JSON config file.

use serde::{Deserialize, Serialize};

use crate::scheduler::DEFAULT_BUDGET_CAP;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, rename_all = "snake_case")]
pub struct AlgorithmConfig {
    /// Circuit-mass slack target for peel certificates (paper constant 2^-20).
    pub eps_q: f64,
    /// Removal threshold scale: θ(S) = c_rem / (|S|·log2 n).
    pub c_rem: f64,
    /// Companion verification threshold scale: θ_v(S) = c_hit / (|S|·log2 n).
    pub c_hit: f64,
    /// Exhaustive subset search is used by the constructor only when
    /// |S| <= exact_cap.
    pub exact_cap: usize,
    /// Restrict the constructor's removal candidates to singletons
    /// (comparison mode mirroring the greedily-optimal construction).
    pub singleton_removals: bool,

    /// Max permutations per circuit-sampling phase.
    pub sample_count_max: usize,
    /// Floor on permutations per phase.
    pub sample_count_min: usize,
    /// Per-phase query budget; effective m is sample_phase_budget / |S|
    /// clamped to [sample_count_min, sample_count_max].
    pub sample_phase_budget: u64,

    /// Random subsets drawn per candidate k when estimating α. The failure
    /// bound scales as exp(-m_alpha/50); the default trades tail mass for
    /// wall time and stays far inside the factor-2 sandwich.
    pub m_alpha: usize,
    /// k is swept densely up to this cap, then geometrically (powers of two).
    pub alpha_dense_cap: usize,

    /// Group size (g) and group count (G) for circuit-statistic estimation.
    pub w_group_size: usize,
    pub w_group_count: usize,

    /// Permutations drawn by the one-round contraction primitive.
    pub contraction_permutations: usize,

    /// Witness-length cutoff scale: witnesses with more than
    /// c_w·max(ℓ̂,1)·log2 n non-core members are discarded.
    pub c_w: f64,

    /// Prefix-length scale in redundant-element recovery:
    /// t = ceil(c_recovery·α̂·log2 n). The source procedure uses 20·log n·α.
    pub c_recovery: f64,

    /// Small-circuit preprocessing cutoff; circuits of size <= c0 are
    /// eliminated up front. Automatically lowered when the subset
    /// enumeration would exceed the round budget; 0 disables.
    pub c0: usize,

    /// Average-progress target f(n) = max(f_min, n^(4/7) / log2(n)^f_log_c).
    pub f_log_c: f64,
    pub f_min: f64,

    /// Hand the remnant to the grouped-prefix baseline once the live ground
    /// set is at most this size; None means ceil(sqrt(n)).
    pub kuw_fallback_threshold: Option<usize>,

    /// Per-round query cap (the poly(n) stand-in).
    pub budget_cap: u64,

    /// Oracle-check every deletion batch for rank preservation.
    pub verify_deletions: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            eps_q: 0.125,
            c_rem: 0.125,
            c_hit: 0.0625,
            exact_cap: 16,
            singleton_removals: false,
            sample_count_max: 100_000,
            sample_count_min: 64,
            sample_phase_budget: 500_000,
            m_alpha: 1024,
            alpha_dense_cap: 96,
            w_group_size: 32,
            w_group_count: 32,
            contraction_permutations: 256,
            c_w: 4.0,
            c_recovery: 20.0,
            c0: 2,
            f_log_c: 0.0,
            f_min: 1.0,
            kuw_fallback_threshold: None,
            budget_cap: DEFAULT_BUDGET_CAP,
            verify_deletions: true,
        }
    }
}

impl AlgorithmConfig {
    /// log2(n), floored at 1 so thresholds stay finite on tiny instances.
    pub fn log2n(n: usize) -> f64 {
        (n.max(2) as f64).log2()
    }

    /// Removal threshold θ(S) over a ground set of size n.
    pub fn theta(&self, s_len: usize, n: usize) -> f64 {
        self.c_rem / (s_len.max(1) as f64 * Self::log2n(n))
    }

    /// Verification threshold θ_v(S).
    pub fn theta_v(&self, s_len: usize, n: usize) -> f64 {
        self.c_hit / (s_len.max(1) as f64 * Self::log2n(n))
    }

    /// Effective permutations for one sampling phase over a set of size s.
    pub fn effective_sample_count(&self, s_len: usize) -> usize {
        let by_budget = (self.sample_phase_budget / s_len.max(1) as u64) as usize;
        by_budget.clamp(self.sample_count_min, self.sample_count_max)
    }

    /// Average-progress target for a run starting at n live elements.
    pub fn progress_target(&self, n: usize) -> f64 {
        let f = (n.max(1) as f64).powf(4.0 / 7.0) / Self::log2n(n).powf(self.f_log_c);
        f.max(self.f_min)
    }

    /// Per-round progress target of the simpler comparator: t = n^(5/9).
    pub fn progress_target_49(&self, n: usize) -> f64 {
        (n.max(1) as f64).powf(5.0 / 9.0).max(self.f_min)
    }

    /// Recovery prefix length t = ceil(c_recovery·α̂·log2 n).
    pub fn recovery_prefix_len(&self, alpha_hat: usize, n: usize) -> usize {
        (self.c_recovery * alpha_hat as f64 * Self::log2n(n)).ceil() as usize
    }

    pub fn kuw_threshold(&self, n: usize) -> usize {
        self.kuw_fallback_threshold
            .unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
            .max(1)
    }

    /// Largest c0' <= c0 whose subset enumeration fits the round budget.
    pub fn effective_c0(&self, n: usize) -> usize {
        let mut c = self.c0;
        while c > 0 && crate::scheduler::subsets_up_to_count(n, c + 1) > self.budget_cap {
            c -= 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = AlgorithmConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: AlgorithmConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg: AlgorithmConfig = serde_json::from_str(r#"{"c_rem": 1.0}"#).unwrap();
        assert_eq!(cfg.c_rem, 1.0);
        assert_eq!(cfg.exact_cap, AlgorithmConfig::default().exact_cap);
    }

    #[test]
    fn c0_autolowers_under_budget() {
        let cfg = AlgorithmConfig::default();
        assert_eq!(cfg.effective_c0(16), 2);
        // C(4096,3) blows the default cap; pairs still fit.
        assert_eq!(cfg.effective_c0(4096), 1);
    }

    #[test]
    fn sample_count_respects_phase_budget() {
        let cfg = AlgorithmConfig::default();
        assert_eq!(cfg.effective_sample_count(8), 62_500);
        assert_eq!(cfg.effective_sample_count(4096), 122);
    }
}
