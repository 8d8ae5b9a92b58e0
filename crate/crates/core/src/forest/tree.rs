use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::config::ForestConfig;
use crate::survival::{count_events, km_sorted, logrank_sorted, validate_records, SurvivalCurve, SurvivalRecord};

/// Node of a survival tree. A record goes left iff `x[feature_index] < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurvivalTreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<SurvivalTreeNode>,
        right: Box<SurvivalTreeNode>,
    },
    Leaf {
        curve: SurvivalCurve,
        n_samples: usize,
        n_events: usize,
    },
}

impl SurvivalTreeNode {
    /// Leaf curve reached by `covariates`. Caller checks dimensions.
    pub fn leaf_curve(&self, covariates: &[f64]) -> &SurvivalCurve {
        let mut node = self;
        loop {
            match node {
                SurvivalTreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if covariates[*feature_index] < *threshold { left } else { right };
                }
                SurvivalTreeNode::Leaf { curve, .. } => return curve,
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, SurvivalTreeNode::Leaf { .. })
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            SurvivalTreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
            SurvivalTreeNode::Leaf { .. } => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SurvivalTreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            SurvivalTreeNode::Leaf { .. } => 0,
        }
    }

    /// `(n_samples, n_events)` of every leaf, left to right.
    pub fn leaf_sizes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |node| {
            if let SurvivalTreeNode::Leaf {
                n_samples, n_events, ..
            } = node
            {
                out.push((*n_samples, *n_events));
            }
        });
        out
    }

    pub fn split_features(&self) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        self.collect_features(&mut set);
        set
    }

    fn collect_features(&self, set: &mut BTreeSet<usize>) {
        if let SurvivalTreeNode::Split {
            feature_index,
            left,
            right,
            ..
        } = self
        {
            set.insert(*feature_index);
            left.collect_features(set);
            right.collect_features(set);
        }
    }

    fn visit_leaves<'a>(&'a self, f: &mut dyn FnMut(&'a SurvivalTreeNode)) {
        match self {
            SurvivalTreeNode::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
            leaf => f(leaf),
        }
    }
}

/// Grows one survival tree on all of `records` using every feature.
pub fn fit_survival_tree<R: Rng>(
    records: &[SurvivalRecord],
    config: &ForestConfig,
    rng: &mut R,
) -> Result<SurvivalTreeNode> {
    config.validate()?;
    let p = validate_records(records)?;
    check_trainable(records, config)?;
    let features: Vec<usize> = (0..p).collect();
    let grower = TreeGrower::new(records, &features, config);
    Ok(grower.grow((0..records.len()).collect(), 0, rng))
}

pub(crate) fn check_trainable(records: &[SurvivalRecord], config: &ForestConfig) -> Result<()> {
    if records.len() < 2 * config.min_leaf {
        return Err(Error::Precondition(format!(
            "{} records, need at least 2 * min_leaf = {}",
            records.len(),
            2 * config.min_leaf
        )));
    }
    if count_events(records) == 0 {
        return Err(Error::Precondition("no events in training records".into()));
    }
    Ok(())
}

pub(crate) struct TreeGrower<'a> {
    records: &'a [SurvivalRecord],
    features: &'a [usize],
    config: &'a ForestConfig,
    mtry: usize,
}

struct Candidate {
    chi_sq: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> TreeGrower<'a> {
    pub(crate) fn new(records: &'a [SurvivalRecord], features: &'a [usize], config: &'a ForestConfig) -> Self {
        TreeGrower {
            records,
            features,
            config,
            mtry: config.mtry_for(features.len()),
        }
    }

    /// `samples` index into `records` and may repeat (bootstrap draws).
    pub(crate) fn grow<R: Rng>(&self, mut samples: Vec<usize>, depth: usize, rng: &mut R) -> SurvivalTreeNode {
        let records = self.records;
        samples.sort_unstable_by(|&a, &b| records[a].time.total_cmp(&records[b].time).then(a.cmp(&b)));

        let at_depth_limit = self.config.max_depth.is_some_and(|d| depth >= d);
        let events = samples.iter().filter(|&&i| records[i].event).count();
        let splittable = !at_depth_limit
            && !self.features.is_empty()
            && samples.len() >= 2 * self.config.min_leaf
            && events >= 2 * self.config.min_events_leaf;

        let best = if splittable { self.best_split(&samples, events, rng) } else { None };
        let Some(best) = best else {
            return SurvivalTreeNode::Leaf {
                curve: km_sorted(samples.iter().map(|&i| (records[i].time, records[i].event))),
                n_samples: samples.len(),
                n_events: events,
            };
        };

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| records[i].covariates[best.feature] < best.threshold);
        let left = self.grow(left, depth + 1, rng);
        let right = self.grow(right, depth + 1, rng);
        SurvivalTreeNode::Split {
            feature_index: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split<R: Rng>(&self, sorted: &[usize], total_events: usize, rng: &mut R) -> Option<Candidate> {
        let records = self.records;
        let cfg = self.config;
        let times: Vec<f64> = sorted.iter().map(|&i| records[i].time).collect();
        let events: Vec<bool> = sorted.iter().map(|&i| records[i].event).collect();
        let mut mask = vec![false; sorted.len()];
        let mut best: Option<Candidate> = None;

        for pick in index::sample(rng, self.features.len(), self.mtry) {
            let feature = self.features[pick];
            let (lo, hi) = sorted
                .iter()
                .map(|&i| records[i].covariates[feature])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !(lo < hi) {
                continue;
            }
            for _ in 0..cfg.n_split_candidates {
                let threshold = rng.random_range(lo..hi);
                let (mut n_left, mut ev_left) = (0, 0);
                for (k, &i) in sorted.iter().enumerate() {
                    let left = records[i].covariates[feature] < threshold;
                    mask[k] = left;
                    if left {
                        n_left += 1;
                        ev_left += usize::from(events[k]);
                    }
                }
                let n_right = sorted.len() - n_left;
                let ev_right = total_events - ev_left;
                if n_left < cfg.min_leaf
                    || n_right < cfg.min_leaf
                    || ev_left < cfg.min_events_leaf
                    || ev_right < cfg.min_events_leaf
                {
                    continue;
                }
                let stat = logrank_sorted(&times, &events, &mask);
                if stat.degenerate {
                    continue;
                }
                if best.as_ref().is_none_or(|b| stat.chi_sq > b.chi_sq) {
                    best = Some(Candidate {
                        chi_sq: stat.chi_sq,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }
}
