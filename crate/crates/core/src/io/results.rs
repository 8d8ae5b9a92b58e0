//! Results directory layout:
//!
//! ```text
//! tree.dot  tree.json  summary.json  model.json
//! leaves/<id>/curves_t0.csv  curves_t1.csv  diff.csv  km.csv
//! plots/*.svg                (written by `report --plots`)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causal_tree::{to_dot, Condition};
use crate::error::{Error, Result};
use crate::io::svg::{self, Series};
use crate::pipeline::{Baseline, PipelineConfig, PipelineResult, Provenance, TwinModel};
use crate::survival::{Arm, SurvivalCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSummary {
    pub leaf_id: usize,
    pub path: Vec<Condition>,
    pub path_text: String,
    pub tau_hat: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub selected: bool,
    pub fitted: bool,
    pub skip_reason: Option<String>,
    pub n_train_t0: Option<usize>,
    pub n_train_t1: Option<usize>,
    pub n_patients: usize,
    pub mean_rmst_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub root_ate: f64,
    pub baseline: Baseline,
    pub horizon: f64,
    pub n_leaves: usize,
    pub selected: Vec<usize>,
    pub forest_features: Vec<String>,
    pub leaves: Vec<LeafSummary>,
    pub config: PipelineConfig,
    pub provenance: Provenance,
}

impl Summary {
    pub fn from_result(result: &PipelineResult) -> Self {
        let leaves = result
            .reports
            .iter()
            .map(|report| {
                let id = report.leaf_id;
                let fitted = result.leaf_result(id);
                let skipped = result.skipped.iter().find(|s| s.report.leaf_id == id);
                LeafSummary {
                    leaf_id: id,
                    path: report.path.clone(),
                    path_text: report.path_string(),
                    tau_hat: report.tau_hat,
                    n_treated: report.n_treated,
                    n_control: report.n_control,
                    selected: result.selected.contains(&id),
                    fitted: fitted.is_some(),
                    skip_reason: skipped.map(|s| s.reason.clone()),
                    n_train_t0: fitted.map(|l| l.n_train_t0),
                    n_train_t1: fitted.map(|l| l.n_train_t1),
                    n_patients: fitted.map_or(0, |l| l.patient_results.len()),
                    mean_rmst_diff: fitted.and_then(|l| l.mean_rmst_diff()),
                }
            })
            .collect();
        let forest_features = result
            .forest_features()
            .into_iter()
            .map(|i| result.feature_names.get(i).cloned().unwrap_or_else(|| format!("x_{i}")))
            .collect();
        Summary {
            root_ate: result.root_ate,
            baseline: result.baseline.clone(),
            horizon: result.horizon,
            n_leaves: result.reports.len(),
            selected: result.selected.clone(),
            forest_features,
            leaves,
            config: result.config.clone(),
            provenance: result.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn leaf_dir(dir: &Path, leaf_id: usize) -> PathBuf {
    dir.join("leaves").join(leaf_id.to_string())
}

fn write_curve_rows(
    w: &mut csv::Writer<std::fs::File>,
    leaf_id: usize,
    patient_id: &str,
    arm: Arm,
    curve: &SurvivalCurve,
) -> Result<()> {
    for (t, s) in curve.times().iter().zip(curve.probs()) {
        w.write_record([leaf_id.to_string(), patient_id.to_string(), arm.to_string(), t.to_string(), s.to_string()])?;
    }
    Ok(())
}

const CURVE_HEADER: [&str; 5] = ["leaf_id", "patient_id", "arm", "time", "survival"];

pub fn write_results(dir: &Path, result: &PipelineResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("tree.dot"), to_dot(&result.tree, &result.feature_names))?;
    std::fs::write(dir.join("tree.json"), result.tree.to_json()?)?;
    std::fs::write(dir.join("summary.json"), Summary::from_result(result).to_json()?)?;
    std::fs::write(dir.join("model.json"), serde_json::to_string(&result.model())?)?;

    for leaf in &result.leaf_results {
        let id = leaf.report.leaf_id;
        let ldir = leaf_dir(dir, id);
        std::fs::create_dir_all(&ldir)?;
        for arm in Arm::BOTH {
            let mut w = csv::Writer::from_path(ldir.join(format!("curves_t{}.csv", arm.index())))?;
            w.write_record(CURVE_HEADER)?;
            for p in &leaf.patient_results {
                let curve = if arm == Arm::T0 { &p.curve_t0 } else { &p.curve_t1 };
                write_curve_rows(&mut w, id, &p.patient_id, arm, curve)?;
            }
            w.flush()?;
        }

        let mut w = csv::Writer::from_path(ldir.join("diff.csv"))?;
        w.write_record(["leaf_id", "patient_id", "time", "survival_t0", "survival_t1", "delta"])?;
        for p in &leaf.patient_results {
            for (t, d) in p.diff.times.iter().zip(&p.diff.deltas) {
                w.write_record([
                    id.to_string(),
                    p.patient_id.clone(),
                    t.to_string(),
                    p.curve_t0.at(*t).to_string(),
                    p.curve_t1.at(*t).to_string(),
                    d.to_string(),
                ])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(ldir.join("km.csv"))?;
        w.write_record(CURVE_HEADER)?;
        write_curve_rows(&mut w, id, "cohort", Arm::T0, &leaf.leaf_km_t0)?;
        write_curve_rows(&mut w, id, "cohort", Arm::T1, &leaf.leaf_km_t1)?;
        w.flush()?;
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?)
}

pub fn load_model(dir: &Path) -> Result<TwinModel> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("model.json"))?)?)
}

/// Reads a curve CSV back into validated curves keyed by `(patient_id, arm)`.
pub fn read_curve_csv(path: &Path) -> Result<BTreeMap<(String, u8), SurvivalCurve>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut raw: BTreeMap<(String, u8), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let num = |i: usize, name: &str| -> Result<f64> {
            row.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::data(k + 1, name, "not a number"))
        };
        let arm: u8 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(k + 1, "arm", "not an arm"))?;
        let entry = raw.entry((row.get(1).unwrap_or("").to_string(), arm)).or_default();
        entry.0.push(num(3, "time")?);
        entry.1.push(num(4, "survival")?);
    }
    raw.into_iter()
        .map(|(key, (t, s))| Ok((key, SurvivalCurve::new(t, s)?)))
        .collect()
}

pub fn render_report(summary: &Summary) -> String {
    let mut out = String::new();
    let fmt_opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.1}"));
    let _ = writeln!(out, "Causal survival report");
    let _ = writeln!(out, "======================");
    let _ = writeln!(
        out,
        "Population baseline: median T0 = {} days, median T1 = {} days, difference = {} days",
        fmt_opt(summary.baseline.median_t0),
        fmt_opt(summary.baseline.median_t1),
        fmt_opt(summary.baseline.median_diff)
    );
    let _ = writeln!(out, "Root effect (T1 - T0, mean days): {:.2}", summary.root_ate);
    let _ = writeln!(out, "RMST horizon: {:.1} days", summary.horizon);
    let _ = writeln!(
        out,
        "Leaves: {} total, {} selected (threshold {})",
        summary.n_leaves,
        summary.selected.len(),
        summary.config.ate_threshold
    );
    if !summary.forest_features.is_empty() {
        let _ = writeln!(out, "Step-two forest features: {}", summary.forest_features.join(", "));
    }
    let _ = writeln!(out);
    for leaf in &summary.leaves {
        let _ = writeln!(out, "Leaf {}: {}", leaf.leaf_id, leaf.path_text);
        let _ = writeln!(
            out,
            "  tau_hat = {:.2} days (n1 = {}, n0 = {})",
            leaf.tau_hat, leaf.n_treated, leaf.n_control
        );
        if leaf.fitted {
            let _ = writeln!(
                out,
                "  forests fitted; {} held-out patients, mean RMST difference = {} days",
                leaf.n_patients,
                fmt_opt(leaf.mean_rmst_diff)
            );
        } else if let Some(reason) = &leaf.skip_reason {
            let _ = writeln!(out, "  skipped: {reason}");
        } else {
            let _ = writeln!(out, "  not selected");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Provenance: seed {}, config {}, dataset {}",
        summary.provenance.seed, summary.provenance.config_hash, summary.provenance.dataset_fingerprint
    );
    out
}

/// Writes overlay, per-arm and first-patient difference plots per fitted leaf.
pub fn write_plots(dir: &Path, summary: &Summary) -> Result<Vec<PathBuf>> {
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    let mut written = Vec::new();
    let x_max = summary.horizon;
    for leaf in summary.leaves.iter().filter(|l| l.fitted) {
        let id = leaf.leaf_id;
        let ldir = leaf_dir(dir, id);
        let km = read_curve_csv(&ldir.join("km.csv"))?;
        let curve_series = |c: &SurvivalCurve, color, width, dashed| Series {
            times: c.times().to_vec(),
            values: c.probs().to_vec(),
            initial: 1.0,
            color,
            width,
            dashed,
        };

        let mut overlay = Vec::new();
        for ((_, arm), c) in &km {
            overlay.push(curve_series(c, if *arm == 0 { svg::RED } else { svg::BLUE }, 2.0, false));
        }
        let path = plots.join(format!("leaf_{id}_overlay.svg"));
        std::fs::write(
            &path,
            svg::render(&format!("Leaf {id}: T0 (red) vs T1 (blue)"), &overlay, x_max, 0.0, 1.0),
        )?;
        written.push(path);

        let mut first_patient: Option<(SurvivalCurve, SurvivalCurve)> = None;
        let mut per_arm: [Option<SurvivalCurve>; 2] = [None, None];
        for arm in Arm::BOTH {
            let curves = read_curve_csv(&ldir.join(format!("curves_t{}.csv", arm.index())))?;
            let color = if arm == Arm::T0 { svg::RED } else { svg::BLUE };
            let series: Vec<Series> = curves.values().map(|c| curve_series(c, color, 0.6, false)).collect();
            let path = plots.join(format!("leaf_{id}_t{}.svg", arm.index()));
            std::fs::write(
                &path,
                svg::render(&format!("Leaf {id}: predicted survival under T{}", arm.index()), &series, x_max, 0.0, 1.0),
            )?;
            written.push(path);
            per_arm[arm.index()] = curves.into_values().next();
        }
        if let [Some(c0), Some(c1)] = per_arm {
            first_patient = Some((c0, c1));
        }
        if let Some((c0, c1)) = first_patient {
            let diff = crate::survival::curve_diff(&c1, &c0);
            let series = vec![
                curve_series(&c0, svg::RED, 1.5, true),
                curve_series(&c1, svg::BLUE, 1.5, true),
                Series {
                    times: diff.times.clone(),
                    values: diff.deltas.clone(),
                    initial: 0.0,
                    color: svg::BLACK,
                    width: 2.0,
                    dashed: false,
                },
            ];
            let path = plots.join(format!("leaf_{id}_diff.svg"));
            std::fs::write(
                &path,
                svg::render(&format!("Leaf {id}: differential survival, first patient"), &series, x_max, -1.0, 1.0),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
