//! Command-line surface. `cli_main` returns the process exit code so it can
//! be driven from tests.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::datagen::{generate, GroundTruth, ScenarioSpec};
use crate::error::{Error, Result};
use crate::io::{self, DatasetSchema};
use crate::pipeline::{population_baseline, run_two_step, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "causal-survival", version, about = "Causal tree plus twin survival forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV and a `.truth.json` sidecar.
    Simulate {
        /// Bundled name (paper_shape, planted_halved, null) or a TOML file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the two-step model and write a results directory.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Minimum |tau_hat - root effect| for a leaf to get forests.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Score new patients with a fitted results directory.
    Predict {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Output directory for predictions.csv and diff.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-arm Kaplan-Meier medians and their difference.
    Baseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Print a summary of a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Also write SVG curve plots under `<results>/plots`.
        #[arg(long)]
        plots: bool,
    },
}

#[derive(Serialize)]
struct TruthSidecar<'a> {
    scenario: &'a ScenarioSpec,
    truth: &'a GroundTruth,
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let msg = e.to_string();
                eprintln!("error: {}", first_line(&msg));
            }
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", first_line(&e.to_string()));
            1
        }
    }
}

fn first_line(msg: &str) -> &str {
    let msg = msg.trim().trim_start_matches("error: ");
    msg.lines().next().unwrap_or(msg)
}

fn schema_or_default(path: Option<&Path>) -> Result<DatasetSchema> {
    path.map_or_else(|| Ok(DatasetSchema::default()), DatasetSchema::load)
}

fn truth_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.truth.json"))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { scenario, seed, out } => {
            let spec = io::resolve_scenario(&scenario, seed)?;
            let cohort = generate(&spec)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            io::save_dataset(&out, &cohort.records, &spec.covariate_names())?;
            let sidecar = TruthSidecar {
                scenario: &spec,
                truth: &cohort.truth,
            };
            std::fs::write(truth_path(&out), serde_json::to_string_pretty(&sidecar)? + "\n")?;
            println!("wrote {} records to {}", cohort.records.len(), out.display());
            Ok(())
        }
        Command::Fit {
            data,
            schema,
            config,
            seed,
            threshold,
            out,
            threads,
        } => {
            let schema = schema_or_default(schema.as_deref())?;
            let mut cfg = match config {
                Some(path) => io::load_pipeline_config(&path)?,
                None => PipelineConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(t) = threshold {
                cfg.ate_threshold = t;
            }
            cfg.validate()?;
            let dataset = io::load_dataset(&data, &schema)?;
            let fit = || run_two_step(&dataset.records, &dataset.covariate_names, &cfg);
            let result = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                    .install(fit)?,
                None => fit()?,
            };
            io::write_results(&out, &result)?;
            println!(
                "fitted {} leaves ({} selected, {} with forests); results in {}",
                result.reports.len(),
                result.selected.len(),
                result.leaf_results.len(),
                out.display()
            );
            Ok(())
        }
        Command::Predict {
            results,
            data,
            schema,
            out,
        } => {
            let schema = schema_or_default(schema.as_deref())?;
            let model = io::load_model(&results)?;
            let rows = io::load_covariates(&data, &schema)?;
            if rows.covariate_names != model.feature_names {
                return Err(Error::Schema(format!(
                    "covariate columns {:?} do not match the fitted model's {:?}",
                    rows.covariate_names, model.feature_names
                )));
            }
            std::fs::create_dir_all(&out)?;
            let mut summary = csv::Writer::from_path(out.join("predictions.csv"))?;
            summary.write_record(["patient_id", "leaf_id", "rmst_diff", "note"])?;
            let mut diff = csv::Writer::from_path(out.join("diff.csv"))?;
            diff.write_record(["leaf_id", "patient_id", "time", "survival_t0", "survival_t1", "delta"])?;
            let mut unscored = 0;
            for (id, x) in rows.ids.iter().zip(&rows.covariates) {
                match model.predict(x) {
                    Ok(pred) => {
                        summary.write_record([id.clone(), pred.leaf_id.to_string(), pred.rmst_diff.to_string(), String::new()])?;
                        for (t, d) in pred.diff.times.iter().zip(&pred.diff.deltas) {
                            diff.write_record([
                                pred.leaf_id.to_string(),
                                id.clone(),
                                t.to_string(),
                                pred.curve_t0.at(*t).to_string(),
                                pred.curve_t1.at(*t).to_string(),
                                d.to_string(),
                            ])?;
                        }
                    }
                    Err(Error::NoFittedModel(report)) => {
                        unscored += 1;
                        let note = format!("no fitted model for leaf {} ({})", report.leaf_id, report.path_string());
                        summary.write_record([id.clone(), report.leaf_id.to_string(), String::new(), note])?;
                    }
                    Err(e) => return Err(e),
                }
            }
            summary.flush()?;
            diff.flush()?;
            println!(
                "scored {} of {} patients; output in {}",
                rows.ids.len() - unscored,
                rows.ids.len(),
                out.display()
            );
            Ok(())
        }
        Command::Baseline { data, schema } => {
            let schema = schema_or_default(schema.as_deref())?;
            let dataset = io::load_dataset(&data, &schema)?;
            let b = population_baseline(&dataset.records)?;
            let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.2}"));
            println!(
                "rows {}  events {}  arm0 {}  arm1 {}",
                dataset.report.rows, dataset.report.events, dataset.report.arm0, dataset.report.arm1
            );
            println!("median_t0 {}", show(b.median_t0));
            println!("median_t1 {}", show(b.median_t1));
            println!("median_diff {}", show(b.median_diff));
            Ok(())
        }
        Command::Report { results, plots } => {
            let summary = io::read_summary(&results)?;
            print!("{}", io::render_report(&summary));
            if plots {
                let written = io::write_plots(&results, &summary)?;
                println!("wrote {} plots to {}", written.len(), results.join("plots").display());
            }
            Ok(())
        }
    }
}
