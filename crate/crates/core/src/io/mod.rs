//! Ingestion, configuration files and result emission.

pub mod config;
pub mod dataset;
pub mod results;
pub mod svg;

pub use config::{load_pipeline_config, pipeline_config_from_toml, resolve_scenario, scenario_from_toml};
pub use dataset::{
    load_covariates, load_dataset, read_covariates, read_dataset, save_dataset, write_dataset, Categorical,
    CovariateRows, Dataset, DatasetSchema, LoadReport,
};
pub use results::{load_model, read_curve_csv, read_summary, render_report, write_plots, write_results, Summary};
