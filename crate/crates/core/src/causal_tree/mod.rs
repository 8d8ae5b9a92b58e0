//! Causal tree on observed survival days.
//!
//! Structure is grown on one half of the cohort by maximising the
//! size-weighted squared-effect gain
//!
//! ```text
//! gain = n_left * tau_left^2 + n_right * tau_right^2 - n_parent * tau_parent^2
//! ```
//!
//! and leaf effects are re-estimated on the other half (honest estimation).
//! A record goes left iff `x[feature] < threshold`.

mod report;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::seed;
use crate::survival::{validate_records, Arm, SurvivalRecord};

pub use report::{extract_leaf_reports, to_dot, Condition, LeafReport, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitCandidates {
    /// Midpoints between consecutive distinct values at the node.
    Midpoints,
    /// `count` thresholds drawn uniformly between the node's min and max.
    Random { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalTreeConfig {
    pub honest: bool,
    pub min_treated_leaf: usize,
    pub min_control_leaf: usize,
    pub max_depth: usize,
    pub min_effect_gain: f64,
    pub split_candidates: SplitCandidates,
    /// Restrict fitting to records with an observed event.
    pub uncensored_only: bool,
}

impl Default for CausalTreeConfig {
    fn default() -> Self {
        CausalTreeConfig {
            honest: true,
            min_treated_leaf: 10,
            min_control_leaf: 10,
            max_depth: 4,
            min_effect_gain: 0.0,
            split_candidates: SplitCandidates::Midpoints,
            uncensored_only: false,
        }
    }
}

impl CausalTreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_treated_leaf < 2 || self.min_control_leaf < 2 {
            return Err(Error::Config("causal minimum per-arm leaf counts must be at least 2".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("causal.max_depth must be at least 1".into()));
        }
        if !(self.min_effect_gain.is_finite() && self.min_effect_gain >= 0.0) {
            return Err(Error::Config("causal.min_effect_gain must be finite and nonnegative".into()));
        }
        if let SplitCandidates::Random { count: 0 } = self.split_candidates {
            return Err(Error::Config("random split candidate count must be positive".into()));
        }
        Ok(())
    }

    fn fitting_records<'a>(&self, records: &'a [SurvivalRecord]) -> Vec<&'a SurvivalRecord> {
        records.iter().filter(|r| !self.uncensored_only || r.event).collect()
    }

    /// Gain level that a split on pure noise exceeds with probability about `alpha`.
    ///
    /// Under no effect heterogeneity a candidate's gain is roughly
    /// `V * chi2_1` with `V = s_t^2 / p + s_c^2 / (1 - p)` (per-unit variance of
    /// the effect estimate, `p` the treated share). The level scales `V` by the
    /// honest factor `1 + n_train / n_est` and by the Bonferroni chi-square
    /// quantile over the `n_features * (n_train - 1)` candidate thresholds.
    pub fn honest_penalty_level(&self, records: &[SurvivalRecord], alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let p_features = validate_records(records)?;
        let pool = self.fitting_records(records);
        let (mut yt, mut yc) = (Vec::new(), Vec::new());
        for r in &pool {
            match r.treatment {
                Arm::T1 => yt.push(r.time),
                Arm::T0 => yc.push(r.time),
            }
        }
        if yt.len() < 2 || yc.len() < 2 {
            return Err(Error::BothTreatmentsRequired);
        }
        let n = pool.len();
        let share = yt.len() as f64 / n as f64;
        let v = sample_variance(&yt) / share + sample_variance(&yc) / (1.0 - share);
        let (n_train, n_est) = if self.honest { (n / 2, n - n / 2) } else { (n, n) };
        let honest_factor = 1.0 + n_train as f64 / n_est as f64;
        let candidates = (p_features * n_train.saturating_sub(1)).max(1) as f64;
        let z = Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * candidates));
        Ok(honest_factor * v * z * z)
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalLeaf {
    pub leaf_id: usize,
    /// `y_bar_treated - y_bar_control`, in days.
    pub tau_hat: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub y_bar_treated: f64,
    pub y_bar_control: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CausalNode {
    Split {
        feature_index: usize,
        threshold: f64,
        /// Criterion improvement on the training half.
        gain: f64,
        left: Box<CausalNode>,
        right: Box<CausalNode>,
    },
    Leaf(CausalLeaf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTree {
    root: CausalNode,
    n_features: usize,
    /// Root effect on the estimation sample.
    root_tau: f64,
    honest: bool,
    /// Ids used to choose splits, sorted.
    train_ids: Vec<String>,
    /// Ids used for leaf estimates, sorted. Equal to `train_ids` when not honest.
    estimation_ids: Vec<String>,
}

impl CausalTree {
    pub fn root(&self) -> &CausalNode {
        &self.root
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn root_tau(&self) -> f64 {
        self.root_tau
    }

    pub fn is_honest(&self) -> bool {
        self.honest
    }

    pub fn train_ids(&self) -> &[String] {
        &self.train_ids
    }

    pub fn estimation_ids(&self) -> &[String] {
        &self.estimation_ids
    }

    /// Leaves in leaf-id order.
    pub fn leaves(&self) -> Vec<&CausalLeaf> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                CausalNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                CausalNode::Leaf(leaf) => out.push(leaf),
            }
        }
        out
    }

    pub fn leaf(&self, leaf_id: usize) -> Option<&CausalLeaf> {
        self.leaves().into_iter().find(|l| l.leaf_id == leaf_id)
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// `(feature_index, threshold, gain)` of every split, preorder.
    pub fn splits(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            if let CausalNode::Split {
                feature_index,
                threshold,
                gain,
                left,
                right,
            } = node
            {
                out.push((*feature_index, *threshold, *gain));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    pub fn split_features(&self) -> BTreeSet<usize> {
        self.splits().into_iter().map(|s| s.0).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Routes `covariates` to a leaf id; values equal to a threshold go right.
pub fn leaf_assign(tree: &CausalTree, covariates: &[f64]) -> Result<usize> {
    if covariates.len() != tree.n_features {
        return Err(Error::DimensionMismatch {
            expected: tree.n_features,
            got: covariates.len(),
        });
    }
    let mut node = &tree.root;
    loop {
        match node {
            CausalNode::Split {
                feature_index,
                threshold,
                left,
                right,
                ..
            } => node = if covariates[*feature_index] < *threshold { left } else { right },
            CausalNode::Leaf(leaf) => return Ok(leaf.leaf_id),
        }
    }
}

/// Leaves whose effect differs from the root effect by at least `ate_threshold`.
pub fn select_leaves(tree: &CausalTree, ate_threshold: f64) -> Vec<usize> {
    tree.leaves()
        .into_iter()
        .filter(|l| (l.tau_hat - tree.root_tau).abs() >= ate_threshold)
        .map(|l| l.leaf_id)
        .collect()
}

const HONEST_SPLIT_TAG: u64 = 0x686f_6e65_7374;
const CANDIDATE_TAG: u64 = 0x6361_6e64;

pub fn fit_causal_tree(records: &[SurvivalRecord], config: &CausalTreeConfig, seed: u64) -> Result<CausalTree> {
    config.validate()?;
    let n_features = validate_records(records)?;
    let mut pool = config.fitting_records(records);
    if pool.is_empty() {
        return Err(Error::EmptyCohort);
    }
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = pool.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Schema(format!("duplicate record id {}", w[0].id)));
    }
    if !has_both_arms(pool.iter().copied()) {
        return Err(Error::BothTreatmentsRequired);
    }

    let (train, estimate): (Vec<&SurvivalRecord>, Vec<&SurvivalRecord>) = if config.honest {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(seed, &[HONEST_SPLIT_TAG])));
        let half = pool.len() / 2;
        let mut train_idx = order[..half].to_vec();
        let mut est_idx = order[half..].to_vec();
        train_idx.sort_unstable();
        est_idx.sort_unstable();
        (
            train_idx.iter().map(|&i| pool[i]).collect(),
            est_idx.iter().map(|&i| pool[i]).collect(),
        )
    } else {
        (pool.clone(), pool.clone())
    };
    if !has_both_arms(train.iter().copied()) || !has_both_arms(estimate.iter().copied()) {
        return Err(Error::BothTreatmentsRequired);
    }

    let grower = Grower {
        config,
        n_features,
        rng: seed::stream(seed::derive(seed, &[CANDIDATE_TAG]), 0),
        next_leaf: 0,
    };
    let root_stats = ArmStats::of(&estimate);
    let mut grower = grower;
    let root = grower.grow(train.clone(), estimate.clone(), 0);

    Ok(CausalTree {
        root,
        n_features,
        root_tau: root_stats.tau(),
        honest: config.honest,
        train_ids: train.iter().map(|r| r.id.clone()).collect(),
        estimation_ids: estimate.iter().map(|r| r.id.clone()).collect(),
    })
}

fn has_both_arms<'a>(records: impl Iterator<Item = &'a SurvivalRecord>) -> bool {
    let mut seen = [false; 2];
    for r in records {
        seen[r.treatment.index()] = true;
    }
    seen[0] && seen[1]
}

/// Per-arm counts and outcome sums, accumulated in slice order.
#[derive(Debug, Default, Clone, Copy)]
struct ArmStats {
    n_t: usize,
    n_c: usize,
    sum_t: f64,
    sum_c: f64,
}

impl ArmStats {
    fn of(records: &[&SurvivalRecord]) -> Self {
        let mut s = ArmStats::default();
        for r in records {
            match r.treatment {
                Arm::T1 => {
                    s.n_t += 1;
                    s.sum_t += r.time;
                }
                Arm::T0 => {
                    s.n_c += 1;
                    s.sum_c += r.time;
                }
            }
        }
        s
    }

    fn mean_t(&self) -> f64 {
        self.sum_t / self.n_t as f64
    }

    fn mean_c(&self) -> f64 {
        self.sum_c / self.n_c as f64
    }

    fn tau(&self) -> f64 {
        self.mean_t() - self.mean_c()
    }
}

struct Grower<'c> {
    config: &'c CausalTreeConfig,
    n_features: usize,
    rng: rand_chacha::ChaCha8Rng,
    next_leaf: usize,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn grow<'r>(&mut self, train: Vec<&'r SurvivalRecord>, estimate: Vec<&'r SurvivalRecord>, depth: usize) -> CausalNode {
        let split = if depth < self.config.max_depth {
            self.best_split(&train, &estimate)
        } else {
            None
        };
        match split {
            Some(best) if best.gain > self.config.min_effect_gain => {
                let goes_left = |r: &&SurvivalRecord| r.covariates[best.feature] < best.threshold;
                let (train_l, train_r): (Vec<_>, Vec<_>) = train.into_iter().partition(goes_left);
                let (est_l, est_r): (Vec<_>, Vec<_>) = estimate.into_iter().partition(goes_left);
                let left = self.grow(train_l, est_l, depth + 1);
                let right = self.grow(train_r, est_r, depth + 1);
                CausalNode::Split {
                    feature_index: best.feature,
                    threshold: best.threshold,
                    gain: best.gain,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
            _ => {
                let stats = ArmStats::of(&estimate);
                let leaf_id = self.next_leaf;
                self.next_leaf += 1;
                CausalNode::Leaf(CausalLeaf {
                    leaf_id,
                    tau_hat: stats.tau(),
                    n_treated: stats.n_t,
                    n_control: stats.n_c,
                    y_bar_treated: stats.mean_t(),
                    y_bar_control: stats.mean_c(),
                })
            }
        }
    }

    /// Highest-gain admissible split; ties keep the lowest feature, then the
    /// lowest threshold.
    fn best_split(&mut self, train: &[&SurvivalRecord], estimate: &[&SurvivalRecord]) -> Option<Best> {
        let cfg = self.config;
        let (min_t, min_c) = (cfg.min_treated_leaf, cfg.min_control_leaf);
        let parent = ArmStats::of(train);
        let est_parent = ArmStats::of(estimate);
        if parent.n_t < 2 * min_t
            || parent.n_c < 2 * min_c
            || est_parent.n_t < 2 * min_t
            || est_parent.n_c < 2 * min_c
        {
            return None;
        }
        let n = train.len() as f64;
        let parent_term = n * parent.tau().powi(2);

        let mut best: Option<Best> = None;
        let mut rows: Vec<(f64, f64, bool)> = Vec::with_capacity(train.len());
        for feature in 0..self.n_features {
            rows.clear();
            rows.extend(
                train
                    .iter()
                    .map(|r| (r.covariates[feature], r.time, r.treatment == Arm::T1)),
            );
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (lo, hi) = (rows[0].0, rows[rows.len() - 1].0);
            if !(lo < hi) {
                continue;
            }

            // prefix[k] = stats of the first k rows
            let mut prefix = Vec::with_capacity(rows.len() + 1);
            let mut acc = ArmStats::default();
            prefix.push(acc);
            for &(_, y, treated) in &rows {
                if treated {
                    acc.n_t += 1;
                    acc.sum_t += y;
                } else {
                    acc.n_c += 1;
                    acc.sum_c += y;
                }
                prefix.push(acc);
            }

            let mut est_t: Vec<f64> = Vec::new();
            let mut est_c: Vec<f64> = Vec::new();
            for r in estimate {
                match r.treatment {
                    Arm::T1 => est_t.push(r.covariates[feature]),
                    Arm::T0 => est_c.push(r.covariates[feature]),
                }
            }
            est_t.sort_by(f64::total_cmp);
            est_c.sort_by(f64::total_cmp);

            let thresholds = self.thresholds(&rows, lo, hi);
            for threshold in thresholds {
                let k = rows.partition_point(|row| row.0 < threshold);
                let left = prefix[k];
                let right = ArmStats {
                    n_t: parent.n_t - left.n_t,
                    n_c: parent.n_c - left.n_c,
                    sum_t: parent.sum_t - left.sum_t,
                    sum_c: parent.sum_c - left.sum_c,
                };
                if left.n_t < min_t || left.n_c < min_c || right.n_t < min_t || right.n_c < min_c {
                    continue;
                }
                let est_lt = est_t.partition_point(|&x| x < threshold);
                let est_lc = est_c.partition_point(|&x| x < threshold);
                if est_lt < min_t || est_lc < min_c || est_t.len() - est_lt < min_t || est_c.len() - est_lc < min_c {
                    continue;
                }
                let n_left = (left.n_t + left.n_c) as f64;
                let n_right = (right.n_t + right.n_c) as f64;
                let gain = n_left * left.tau().powi(2) + n_right * right.tau().powi(2) - parent_term;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Best {
                        gain,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn thresholds(&mut self, sorted_rows: &[(f64, f64, bool)], lo: f64, hi: f64) -> Vec<f64> {
        match self.config.split_candidates {
            SplitCandidates::Midpoints => {
                let mut out = Vec::new();
                for w in sorted_rows.windows(2) {
                    let (a, b) = (w[0].0, w[1].0);
                    if a < b {
                        let mid = a + (b - a) / 2.0;
                        out.push(if mid > a { mid } else { b });
                    }
                }
                out
            }
            SplitCandidates::Random { count } => {
                let mut out: Vec<f64> = (0..count).map(|_| self.rng.random_range(lo..hi)).collect();
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, y: f64, arm: Arm, x: Vec<f64>) -> SurvivalRecord {
        SurvivalRecord::new(format!("p{id:04}"), y, true, arm, x).unwrap()
    }

    #[test]
    fn single_arm_rejected() {
        let records: Vec<_> = (0..50).map(|i| rec(i, 10.0, Arm::T0, vec![i as f64])).collect();
        assert!(matches!(
            fit_causal_tree(&records, &CausalTreeConfig::default(), 1),
            Err(Error::BothTreatmentsRequired)
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut records: Vec<_> = (0..50)
            .map(|i| rec(i, 10.0, if i % 2 == 0 { Arm::T0 } else { Arm::T1 }, vec![0.0]))
            .collect();
        records[3].id = records[4].id.clone();
        assert!(matches!(
            fit_causal_tree(&records, &CausalTreeConfig::default(), 1),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = CausalTreeConfig {
            min_treated_leaf: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = CausalTreeConfig {
            max_depth: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = CausalTreeConfig {
            min_effect_gain: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn uncensored_only_drops_censored_records() {
        let records: Vec<_> = (0..80)
            .map(|i| {
                let mut r = rec(i, 10.0 + i as f64, if i % 2 == 0 { Arm::T0 } else { Arm::T1 }, vec![0.0]);
                r.event = i % 4 < 2;
                r
            })
            .collect();
        let cfg = CausalTreeConfig {
            uncensored_only: true,
            ..Default::default()
        };
        let tree = fit_causal_tree(&records, &cfg, 3).unwrap();
        let used = tree.train_ids().len() + tree.estimation_ids().len();
        assert_eq!(used, 40);
    }

    #[test]
    fn threshold_tie_routes_right() {
        let tree = CausalTree {
            root: CausalNode::Split {
                feature_index: 0,
                threshold: 1.5,
                gain: 1.0,
                left: Box::new(CausalNode::Leaf(CausalLeaf {
                    leaf_id: 0,
                    tau_hat: 1.0,
                    n_treated: 2,
                    n_control: 2,
                    y_bar_treated: 2.0,
                    y_bar_control: 1.0,
                })),
                right: Box::new(CausalNode::Leaf(CausalLeaf {
                    leaf_id: 1,
                    tau_hat: -1.0,
                    n_treated: 2,
                    n_control: 2,
                    y_bar_treated: 1.0,
                    y_bar_control: 2.0,
                })),
            },
            n_features: 1,
            root_tau: 0.0,
            honest: false,
            train_ids: vec![],
            estimation_ids: vec![],
        };
        assert_eq!(leaf_assign(&tree, &[1.5]).unwrap(), 1);
        assert_eq!(leaf_assign(&tree, &[1.4999]).unwrap(), 0);
        assert!(leaf_assign(&tree, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn penalty_level_is_positive_and_grows_with_noise() {
        let make = |scale: f64| -> Vec<SurvivalRecord> {
            (0..200)
                .map(|i| {
                    let arm = if i % 2 == 0 { Arm::T0 } else { Arm::T1 };
                    rec(i, 50.0 + scale * ((i * 37 % 17) as f64 - 8.0), arm, vec![(i % 5) as f64])
                })
                .collect()
        };
        let cfg = CausalTreeConfig::default();
        let low = cfg.honest_penalty_level(&make(1.0), 0.05).unwrap();
        let high = cfg.honest_penalty_level(&make(2.0), 0.05).unwrap();
        assert!(low > 0.0);
        assert!((high / low - 4.0).abs() < 1e-9);
        assert!(cfg.honest_penalty_level(&make(1.0), 1.5).is_err());
    }
}
