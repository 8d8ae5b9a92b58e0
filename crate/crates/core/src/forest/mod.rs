//! Random survival forests: bootstrap ensembles of log-rank split trees with
//! Kaplan–Meier leaves.
//!
//! Tree `t` draws its bootstrap and every split from its own stream keyed by
//! `(seed, t)`, so a fitted forest is bit-identical for any thread count.

mod config;
mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::survival::{concordance_from_parts, validate_records, SurvivalCurve, SurvivalRecord};

pub use config::ForestConfig;
pub use tree::{fit_survival_tree, SurvivalTreeNode};

use tree::{check_trainable, TreeGrower};

/// Floor applied to survival before taking logs in the mortality score.
pub const MORTALITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ForestRepr")]
pub struct SurvivalForest {
    trees: Vec<SurvivalTreeNode>,
    time_grid: Vec<f64>,
    config: ForestConfig,
    seed: u64,
    /// Covariate indices eligible for splitting.
    features: Vec<usize>,
    /// Length of the covariate vectors the forest was trained on.
    n_features: usize,
    n_train: usize,
    /// Out-of-bag training indices, per tree.
    oob: Vec<Vec<u32>>,
}

#[derive(Deserialize)]
struct ForestRepr {
    trees: Vec<SurvivalTreeNode>,
    time_grid: Vec<f64>,
    config: ForestConfig,
    seed: u64,
    features: Vec<usize>,
    n_features: usize,
    n_train: usize,
    oob: Vec<Vec<u32>>,
}

impl TryFrom<ForestRepr> for SurvivalForest {
    type Error = Error;

    fn try_from(r: ForestRepr) -> Result<Self> {
        r.config.validate()?;
        if r.trees.len() != r.config.n_trees || r.oob.len() != r.trees.len() {
            return Err(Error::InvalidArgument("forest tree count does not match its config".into()));
        }
        if r.features.iter().any(|&f| f >= r.n_features) {
            return Err(Error::InvalidArgument("forest feature index out of range".into()));
        }
        if r.time_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("forest time grid must be strictly increasing".into()));
        }
        if r.oob.iter().flatten().any(|&i| i as usize >= r.n_train) {
            return Err(Error::InvalidArgument("out-of-bag index out of range".into()));
        }
        let forest = SurvivalForest {
            trees: r.trees,
            time_grid: r.time_grid,
            config: r.config,
            seed: r.seed,
            features: r.features,
            n_features: r.n_features,
            n_train: r.n_train,
            oob: r.oob,
        };
        if forest
            .trees
            .iter()
            .flat_map(|t| t.split_features())
            .any(|f| !forest.features.contains(&f))
        {
            return Err(Error::InvalidArgument("tree splits on a feature outside the forest's feature set".into()));
        }
        Ok(forest)
    }
}

/// Fits a forest that may split on every covariate.
pub fn fit_survival_forest(records: &[SurvivalRecord], config: &ForestConfig, seed: u64) -> Result<SurvivalForest> {
    let p = validate_records(records)?;
    let features: Vec<usize> = (0..p).collect();
    fit_survival_forest_on(records, config, seed, &features)
}

/// Fits a forest restricted to splitting on `features`.
pub fn fit_survival_forest_on(
    records: &[SurvivalRecord],
    config: &ForestConfig,
    seed: u64,
    features: &[usize],
) -> Result<SurvivalForest> {
    config.validate()?;
    let p = validate_records(records)?;
    check_trainable(records, config)?;
    if features.windows(2).any(|w| w[0] >= w[1]) || features.iter().any(|&f| f >= p) {
        return Err(Error::InvalidArgument(format!(
            "feature indices must be strictly increasing and below {p}"
        )));
    }
    let n = records.len();
    if n > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many records".into()));
    }

    let mut time_grid: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
    time_grid.sort_unstable_by(f64::total_cmp);
    time_grid.dedup();

    let grower = TreeGrower::new(records, features, config);
    let fitted: Vec<(SurvivalTreeNode, Vec<u32>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, t as u64);
            let mut in_bag = vec![false; n];
            let samples: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let oob = (0..n as u32).filter(|&i| !in_bag[i as usize]).collect();
            (grower.grow(samples, 0, &mut rng), oob)
        })
        .collect();
    let (trees, oob) = fitted.into_iter().unzip();

    Ok(SurvivalForest {
        trees,
        time_grid,
        config: config.clone(),
        seed,
        features: features.to_vec(),
        n_features: p,
        n_train: n,
        oob,
    })
}

impl SurvivalForest {
    pub fn trees(&self) -> &[SurvivalTreeNode] {
        &self.trees
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn oob_indices(&self, tree: usize) -> &[u32] {
        &self.oob[tree]
    }

    fn check_dims(&self, covariates: &[f64]) -> Result<()> {
        if covariates.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: covariates.len(),
            });
        }
        Ok(())
    }

    /// Ensemble survival curve on the forest's event-time grid.
    pub fn predict_survival(&self, covariates: &[f64]) -> Result<SurvivalCurve> {
        self.check_dims(covariates)?;
        let probs = self.mean_curve(self.trees.iter(), covariates);
        Ok(SurvivalCurve::from_parts_unchecked(self.time_grid.clone(), probs))
    }

    fn mean_curve<'a>(&self, trees: impl Iterator<Item = &'a SurvivalTreeNode>, covariates: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.time_grid.len()];
        let mut count = 0usize;
        for tree in trees {
            let values = tree.leaf_curve(covariates).eval_on(&self.time_grid);
            for (acc, v) in sum.iter_mut().zip(values) {
                *acc += v;
            }
            count += 1;
        }
        let mut running = 1.0_f64;
        for s in sum.iter_mut() {
            running = running.min((*s / count as f64).clamp(0.0, 1.0));
            *s = running;
        }
        sum
    }

    /// Per-record out-of-bag mortality, `None` where no tree left the record out.
    ///
    /// Mortality is `sum over the grid of -ln(max(S, MORTALITY_FLOOR))`.
    pub fn oob_mortality(&self, records: &[SurvivalRecord]) -> Result<Vec<Option<f64>>> {
        if records.len() != self.n_train {
            return Err(Error::InvalidArgument(format!(
                "out-of-bag scoring needs the {} training records, got {}",
                self.n_train,
                records.len()
            )));
        }
        for r in records {
            self.check_dims(&r.covariates)?;
        }
        let mut trees_for: Vec<Vec<usize>> = vec![Vec::new(); records.len()];
        for (t, oob) in self.oob.iter().enumerate() {
            for &i in oob {
                trees_for[i as usize].push(t);
            }
        }
        Ok(records
            .par_iter()
            .zip(trees_for.par_iter())
            .map(|(r, trees)| {
                if trees.is_empty() {
                    return None;
                }
                let curve = self.mean_curve(trees.iter().map(|&t| &self.trees[t]), &r.covariates);
                Some(curve.iter().map(|&s| -s.max(MORTALITY_FLOOR).ln()).sum())
            })
            .collect())
    }

    /// `1 - C` of out-of-bag mortality against the training outcomes.
    pub fn oob_error(&self, records: &[SurvivalRecord]) -> Result<f64> {
        let mortality = self.oob_mortality(records)?;
        let (mut risk, mut times, mut events) = (Vec::new(), Vec::new(), Vec::new());
        for (m, r) in mortality.iter().zip(records) {
            if let Some(m) = m {
                risk.push(*m);
                times.push(r.time);
                events.push(r.event);
            }
        }
        if risk.is_empty() {
            return Err(Error::NoOobCoverage);
        }
        Ok(1.0 - concordance_from_parts(&risk, &times, &events)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
