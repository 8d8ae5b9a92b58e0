use std::path::Path;

use crate::datagen::ScenarioSpec;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

/// Parses a pipeline config. Every field is optional and addressable, e.g.
/// `forest.n_trees = 300` or `[causal]` / `min_effect_gain = 50.0`.
pub fn pipeline_config_from_toml(text: &str) -> Result<PipelineConfig> {
    let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_pipeline_config(path: &Path) -> Result<PipelineConfig> {
    pipeline_config_from_toml(&std::fs::read_to_string(path)?)
}

pub fn scenario_from_toml(text: &str) -> Result<ScenarioSpec> {
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// A bundled scenario name (`paper_shape`, `planted_halved`, `null`) or a
/// path to a TOML scenario file.
pub fn resolve_scenario(name_or_path: &str, seed: Option<u64>) -> Result<ScenarioSpec> {
    let mut spec = match ScenarioSpec::named(name_or_path, 0) {
        Some(spec) => spec,
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "unknown scenario {name_or_path:?}: not a bundled name or an existing file"
                )));
            }
            scenario_from_toml(&std::fs::read_to_string(path)?)?
        }
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}
