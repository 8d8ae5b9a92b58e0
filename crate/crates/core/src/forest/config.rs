use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of a random survival forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features sampled per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub min_events_leaf: usize,
    /// Random thresholds drawn per sampled feature.
    pub n_split_candidates: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            mtry: None,
            min_leaf: 15,
            min_events_leaf: 3,
            n_split_candidates: 10,
            max_depth: None,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_trees", self.n_trees),
            ("min_leaf", self.min_leaf),
            ("min_events_leaf", self.min_events_leaf),
            ("n_split_candidates", self.n_split_candidates),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("forest.{name} must be positive")));
            }
        }
        if self.mtry == Some(0) {
            return Err(Error::Config("forest.mtry must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("forest.max_depth must be positive".into()));
        }
        if self.min_events_leaf > self.min_leaf {
            return Err(Error::Config("forest.min_events_leaf must not exceed forest.min_leaf".into()));
        }
        Ok(())
    }

    pub fn mtry_for(&self, n_features: usize) -> usize {
        let default = (n_features as f64).sqrt().ceil() as usize;
        self.mtry.unwrap_or(default).clamp(1, n_features.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ForestConfig::default();
        c.validate().unwrap();
        assert_eq!(c.mtry_for(110), 11);
        assert_eq!(c.mtry_for(1), 1);
        assert_eq!(c.mtry_for(4), 2);
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = ForestConfig {
            min_events_leaf: 20,
            ..ForestConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
