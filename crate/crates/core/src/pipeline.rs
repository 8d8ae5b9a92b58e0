//! The two step procedure: causal tree, then twin survival forests per
//! selected leaf.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::causal_tree::{
    extract_leaf_reports, fit_causal_tree, leaf_assign, select_leaves, CausalTree, CausalTreeConfig, LeafReport,
};
use crate::error::{Error, Result};
use crate::forest::{fit_survival_forest_on, ForestConfig, SurvivalForest};
use crate::seed;
use crate::survival::{
    count_events, curve_diff, km_estimate, max_event_time, median_survival, rmst, split_by_arm, validate_records,
    Arm, DifferenceCurve, SurvivalCurve, SurvivalRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScope {
    /// Features used by any split of the causal tree.
    TreeFeatures,
    AllFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub causal: CausalTreeConfig,
    pub forest: ForestConfig,
    pub ate_threshold: f64,
    /// RMST horizon; `None` uses the largest observed event time.
    pub horizon: Option<f64>,
    pub feature_scope: FeatureScope,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            causal: CausalTreeConfig::default(),
            forest: ForestConfig::default(),
            ate_threshold: 0.0,
            horizon: None,
            feature_scope: FeatureScope::TreeFeatures,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.causal.validate()?;
        self.forest.validate()?;
        if !(self.ate_threshold.is_finite() && self.ate_threshold >= 0.0) {
            return Err(Error::Config("ate_threshold must be finite and nonnegative".into()));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config("horizon must be positive".into()));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Per-arm training records a leaf needs before forests are fitted.
    pub fn min_arm_records(&self) -> usize {
        (2 * self.forest.min_leaf).max(30)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub median_t0: Option<f64>,
    pub median_t1: Option<f64>,
    /// `median_t1 - median_t0`.
    pub median_diff: Option<f64>,
}

/// Arm-wise Kaplan–Meier medians and their difference.
pub fn population_baseline(records: &[SurvivalRecord]) -> Result<Baseline> {
    validate_records(records)?;
    let [t0, t1] = split_by_arm(records);
    if t0.is_empty() || t1.is_empty() {
        return Err(Error::BothTreatmentsRequired);
    }
    let median_t0 = median_survival(&km_estimate(&t0)?);
    let median_t1 = median_survival(&km_estimate(&t1)?);
    Ok(Baseline {
        median_t0,
        median_t1,
        median_diff: median_t0.zip(median_t1).map(|(a, b)| b - a),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientResult {
    pub patient_id: String,
    /// Arm the patient actually received.
    pub observed_arm: Arm,
    pub curve_t0: SurvivalCurve,
    pub curve_t1: SurvivalCurve,
    pub diff: DifferenceCurve,
    /// `rmst(curve_t1) - rmst(curve_t0)` in days.
    pub rmst_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafResult {
    pub report: LeafReport,
    /// Covariate indices the twin forests may split on.
    pub features: Vec<usize>,
    pub forest_t0: SurvivalForest,
    pub forest_t1: SurvivalForest,
    pub patient_results: Vec<PatientResult>,
    pub leaf_km_t0: SurvivalCurve,
    pub leaf_km_t1: SurvivalCurve,
    pub n_train_t0: usize,
    pub n_train_t1: usize,
}

impl LeafResult {
    pub fn mean_rmst_diff(&self) -> Option<f64> {
        if self.patient_results.is_empty() {
            return None;
        }
        let total: f64 = self.patient_results.iter().map(|p| p.rmst_diff).sum();
        Some(total / self.patient_results.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLeaf {
    pub report: LeafReport,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub dataset_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub tree: CausalTree,
    pub reports: Vec<LeafReport>,
    pub feature_names: Vec<String>,
    pub root_ate: f64,
    pub baseline: Baseline,
    pub horizon: f64,
    pub selected: Vec<usize>,
    /// Fitted selected leaves, by leaf id.
    pub leaf_results: Vec<LeafResult>,
    /// Selected leaves that failed per-arm viability, by leaf id.
    pub skipped: Vec<SkippedLeaf>,
    pub config: PipelineConfig,
    pub provenance: Provenance,
}

/// Order-independent SHA-256 over id-sorted records at full float precision.
pub fn dataset_fingerprint(records: &[SurvivalRecord]) -> String {
    let mut sorted: Vec<&SurvivalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut h = Sha256::new();
    for r in sorted {
        h.update((r.id.len() as u64).to_le_bytes());
        h.update(r.id.as_bytes());
        h.update(r.time.to_bits().to_le_bytes());
        h.update([u8::from(r.event), u8::from(r.treatment)]);
        h.update((r.covariates.len() as u64).to_le_bytes());
        for x in &r.covariates {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

const LEAF_TAG: u64 = 0x6c65_6166;
const HOLDOUT_TAG: u64 = 0x686f_6c64;
const FOREST_TAG: u64 = 0x666f_7273;

pub fn run_two_step(
    records: &[SurvivalRecord],
    feature_names: &[String],
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    config.validate()?;
    let p = validate_records(records)?;
    if p == 0 {
        return Err(Error::Precondition("at least one covariate required".into()));
    }
    let tree = fit_causal_tree(records, &config.causal, config.seed)?;
    let reports = extract_leaf_reports(&tree, feature_names);
    let baseline = population_baseline(records)?;
    let selected = select_leaves(&tree, config.ate_threshold);
    let horizon = match config.horizon {
        Some(h) => h,
        None => max_event_time(records).ok_or_else(|| Error::Precondition("no events in cohort".into()))?,
    };

    // a single-leaf tree has no split features, so its forests bag the arm KM
    let features: Vec<usize> = match config.feature_scope {
        FeatureScope::TreeFeatures => tree.split_features().into_iter().collect(),
        FeatureScope::AllFeatures => (0..p).collect(),
    };

    let mut sorted: Vec<&SurvivalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut members: Vec<Vec<&SurvivalRecord>> = vec![Vec::new(); reports.len()];
    for r in sorted {
        members[leaf_assign(&tree, &r.covariates)?].push(r);
    }

    let outcomes: Vec<Result<std::result::Result<LeafResult, SkippedLeaf>>> = selected
        .par_iter()
        .map(|&leaf_id| fit_leaf(&reports[leaf_id], &members[leaf_id], &features, horizon, config))
        .collect();
    let mut leaf_results = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(result) => leaf_results.push(result),
            Err(skip) => skipped.push(skip),
        }
    }

    Ok(PipelineResult {
        root_ate: tree.root_tau(),
        tree,
        reports,
        feature_names: feature_names.to_vec(),
        baseline,
        horizon,
        selected,
        leaf_results,
        skipped,
        config: config.clone(),
        provenance: Provenance {
            seed: config.seed,
            config_hash: config.hash(),
            dataset_fingerprint: dataset_fingerprint(records),
        },
    })
}

fn fit_leaf(
    report: &LeafReport,
    members: &[&SurvivalRecord],
    features: &[usize],
    horizon: f64,
    config: &PipelineConfig,
) -> Result<std::result::Result<LeafResult, SkippedLeaf>> {
    let leaf_seed = seed::derive(config.seed, &[LEAF_TAG, report.leaf_id as u64]);
    let need = config.min_arm_records();
    let mut train = [Vec::new(), Vec::new()];
    let mut test: Vec<SurvivalRecord> = Vec::new();
    let mut km = Vec::with_capacity(2);

    for arm in Arm::BOTH {
        let cohort: Vec<SurvivalRecord> = members
            .iter()
            .filter(|r| r.treatment == arm)
            .map(|&r| r.clone())
            .collect();
        let n = cohort.len();
        let n_test = ((n as f64 * config.test_fraction).round() as usize).clamp(1, n.max(1));
        let n_train = n.saturating_sub(n_test);
        let train_events = if n_train >= need {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed::rng(seed::derive(leaf_seed, &[HOLDOUT_TAG, arm.index() as u64])));
            let mut held: Vec<usize> = order[..n_test].to_vec();
            held.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &held {
                in_test[i] = true;
            }
            for (i, r) in cohort.iter().enumerate() {
                if in_test[i] {
                    test.push(r.clone());
                } else {
                    train[arm.index()].push(r.clone());
                }
            }
            count_events(&train[arm.index()])
        } else {
            0
        };
        if n_train < need || train_events == 0 {
            return Ok(Err(SkippedLeaf {
                report: report.clone(),
                reason: format!(
                    "arm {arm}: {n} records in leaf, {n_train} after holdout with {train_events} events; \
                     need at least {need} with one event"
                ),
            }));
        }
        km.push(km_estimate(&cohort)?);
    }

    let fit = |arm: Arm| {
        let s = seed::derive(leaf_seed, &[FOREST_TAG, arm.index() as u64]);
        fit_survival_forest_on(&train[arm.index()], &config.forest, s, features)
    };
    let (forest_t0, forest_t1) = rayon::join(|| fit(Arm::T0), || fit(Arm::T1));
    let (forest_t0, forest_t1) = (forest_t0?, forest_t1?);

    test.sort_by(|a, b| a.id.cmp(&b.id));
    let patient_results = test
        .par_iter()
        .map(|r| {
            let pred = predict_pair(&forest_t0, &forest_t1, &r.covariates, horizon)?;
            Ok(PatientResult {
                patient_id: r.id.clone(),
                observed_arm: r.treatment,
                curve_t0: pred.curve_t0,
                curve_t1: pred.curve_t1,
                diff: pred.diff,
                rmst_diff: pred.rmst_diff,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let leaf_km_t1 = km.pop().expect("two arms");
    let leaf_km_t0 = km.pop().expect("two arms");
    Ok(Ok(LeafResult {
        report: report.clone(),
        features: features.to_vec(),
        n_train_t0: train[0].len(),
        n_train_t1: train[1].len(),
        forest_t0,
        forest_t1,
        patient_results,
        leaf_km_t0,
        leaf_km_t1,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientPrediction {
    pub leaf_id: usize,
    pub curve_t0: SurvivalCurve,
    pub curve_t1: SurvivalCurve,
    pub diff: DifferenceCurve,
    pub rmst_diff: f64,
}

fn predict_pair(
    forest_t0: &SurvivalForest,
    forest_t1: &SurvivalForest,
    covariates: &[f64],
    horizon: f64,
) -> Result<PatientPrediction> {
    let curve_t0 = forest_t0.predict_survival(covariates)?;
    let curve_t1 = forest_t1.predict_survival(covariates)?;
    let diff = curve_diff(&curve_t1, &curve_t0);
    let rmst_diff = rmst(&curve_t1, horizon)? - rmst(&curve_t0, horizon)?;
    Ok(PatientPrediction {
        leaf_id: usize::MAX,
        curve_t0,
        curve_t1,
        diff,
        rmst_diff,
    })
}

/// Everything needed to score new patients, detached from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinModel {
    pub tree: CausalTree,
    pub reports: Vec<LeafReport>,
    pub feature_names: Vec<String>,
    pub horizon: f64,
    pub leaves: Vec<FittedLeaf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLeaf {
    pub leaf_id: usize,
    pub features: Vec<usize>,
    pub forest_t0: SurvivalForest,
    pub forest_t1: SurvivalForest,
}

impl TwinModel {
    pub fn predict(&self, covariates: &[f64]) -> Result<PatientPrediction> {
        let leaf_id = leaf_assign(&self.tree, covariates)?;
        let leaf = self
            .leaves
            .iter()
            .find(|l| l.leaf_id == leaf_id)
            .ok_or_else(|| Error::NoFittedModel(Box::new(self.reports[leaf_id].clone())))?;
        let mut pred = predict_pair(&leaf.forest_t0, &leaf.forest_t1, covariates, self.horizon)?;
        pred.leaf_id = leaf_id;
        Ok(pred)
    }
}

impl PipelineResult {
    pub fn model(&self) -> TwinModel {
        TwinModel {
            tree: self.tree.clone(),
            reports: self.reports.clone(),
            feature_names: self.feature_names.clone(),
            horizon: self.horizon,
            leaves: self
                .leaf_results
                .iter()
                .map(|l| FittedLeaf {
                    leaf_id: l.report.leaf_id,
                    features: l.features.clone(),
                    forest_t0: l.forest_t0.clone(),
                    forest_t1: l.forest_t1.clone(),
                })
                .collect(),
        }
    }

    pub fn leaf_result(&self, leaf_id: usize) -> Option<&LeafResult> {
        self.leaf_results.iter().find(|l| l.report.leaf_id == leaf_id)
    }

    /// Union of the feature sets the step-two forests were allowed to use.
    pub fn forest_features(&self) -> BTreeSet<usize> {
        self.leaf_results.iter().flat_map(|l| l.features.iter().copied()).collect()
    }
}

/// Routes a new patient and predicts both arms with that leaf's twin forests.
pub fn predict_new_patient(result: &PipelineResult, covariates: &[f64]) -> Result<PatientPrediction> {
    let leaf_id = leaf_assign(&result.tree, covariates)?;
    let leaf = result
        .leaf_result(leaf_id)
        .ok_or_else(|| Error::NoFittedModel(Box::new(result.reports[leaf_id].clone())))?;
    let mut pred = predict_pair(&leaf.forest_t0, &leaf.forest_t1, covariates, result.horizon)?;
    pred.leaf_id = leaf_id;
    Ok(pred)
}
