//! Synthetic cohorts with exponential hazards per (subgroup, arm).
//!
//! Moderator covariates come first in every covariate vector, followed by
//! `p` standard-normal noise covariates. Subgroup membership is a conjunction
//! of conditions on moderators, and every closed form the pipeline is checked
//! against lives in [`GroundTruth`].

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::causal_tree::Relation;
use crate::error::{Error, Result};
use crate::seed;
use crate::survival::{Arm, SurvivalRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeratorKind {
    /// 1 with probability `prob`, else 0.
    Binary { prob: f64 },
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moderator {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModeratorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub feature: String,
    pub relation: Relation,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    pub name: String,
    /// Conjunction; an empty list matches everyone.
    #[serde(default)]
    pub rules: Vec<Rule>,
    pub hazard_t0: f64,
    pub hazard_t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    /// Noise covariates after the moderators.
    pub p: usize,
    #[serde(default)]
    pub moderators: Vec<Moderator>,
    pub subgroups: Vec<Subgroup>,
    #[serde(default)]
    pub censoring_hazard: f64,
    pub treat_prob: f64,
    #[serde(default)]
    pub admin_cutoff: Option<f64>,
    /// Horizon for the RMST entries of [`GroundTruth`]; defaults to
    /// `admin_cutoff`, else twice the longest true median.
    #[serde(default)]
    pub truth_horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 {
            return bad("scenario n must be positive".into());
        }
        if !(self.treat_prob > 0.0 && self.treat_prob < 1.0) {
            return bad(format!("treat_prob must lie in (0, 1), got {}", self.treat_prob));
        }
        if !(self.censoring_hazard.is_finite() && self.censoring_hazard >= 0.0) {
            return bad("censoring_hazard must be finite and nonnegative".into());
        }
        if let Some(c) = self.admin_cutoff {
            if !(c.is_finite() && c > 0.0) {
                return bad("admin_cutoff must be positive".into());
            }
        }
        if let Some(h) = self.truth_horizon {
            if !(h.is_finite() && h > 0.0) {
                return bad("truth_horizon must be positive".into());
            }
        }
        if self.subgroups.is_empty() {
            return bad("scenario needs at least one subgroup".into());
        }
        for m in &self.moderators {
            match m.kind {
                ModeratorKind::Binary { prob } if !(0.0..=1.0).contains(&prob) => {
                    return bad(format!("moderator {}: prob must lie in [0, 1]", m.name));
                }
                ModeratorKind::Uniform { low, high } if !(low < high) => {
                    return bad(format!("moderator {}: low must be below high", m.name));
                }
                _ => {}
            }
        }
        for (i, m) in self.moderators.iter().enumerate() {
            if self.moderators[..i].iter().any(|o| o.name == m.name) {
                return bad(format!("duplicate moderator name {}", m.name));
            }
        }
        for g in &self.subgroups {
            let positive = |h: f64| h.is_finite() && h > 0.0;
            if !positive(g.hazard_t0) || !positive(g.hazard_t1) {
                return bad(format!("subgroup {}: hazards must be positive", g.name));
            }
            for rule in &g.rules {
                if self.moderator_index(&rule.feature).is_none() {
                    return bad(format!("subgroup {}: unknown moderator {}", g.name, rule.feature));
                }
            }
        }
        Ok(())
    }

    fn moderator_index(&self, name: &str) -> Option<usize> {
        self.moderators.iter().position(|m| m.name == name)
    }

    pub fn n_covariates(&self) -> usize {
        self.moderators.len() + self.p
    }

    pub fn covariate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.moderators.iter().map(|m| m.name.clone()).collect();
        names.extend((0..self.p).map(|k| format!("noise_{}", k + 1)));
        names
    }

    pub fn subgroup(&self, name: &str) -> Result<&Subgroup> {
        self.subgroups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::UnknownSubgroup(name.to_string()))
    }

    /// Index of the unique subgroup whose rules `moderators` satisfy.
    pub fn subgroup_of(&self, moderators: &[f64]) -> Result<usize> {
        let mut hit = None;
        for (g, sub) in self.subgroups.iter().enumerate() {
            let inside = sub.rules.iter().all(|r| {
                let idx = self.moderator_index(&r.feature).expect("validated rule");
                r.relation.holds(moderators[idx], r.threshold)
            });
            if inside {
                if hit.is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "subgroup rules overlap at moderators {moderators:?}"
                    )));
                }
                hit = Some(g);
            }
        }
        hit.ok_or_else(|| Error::InvalidArgument(format!("no subgroup covers moderators {moderators:?}")))
    }

    fn default_horizon(&self) -> f64 {
        self.truth_horizon.or(self.admin_cutoff).unwrap_or_else(|| {
            let min_hazard = self
                .subgroups
                .iter()
                .flat_map(|g| [g.hazard_t0, g.hazard_t1])
                .fold(f64::INFINITY, f64::min);
            2.0 * std::f64::consts::LN_2 / min_hazard
        })
    }

    /// Cohort shaped like the motivating breast-cancer study: 1806 patients,
    /// 110 covariates, 520 on arm 1, arm medians near 34 and 43 days.
    ///
    /// One binary moderator marks a responsive subgroup (share 0.366) whose
    /// hazard halves under arm 1; elsewhere the arms coincide. With
    /// `h0 = ln 2 / 34`, the arm-1 median solves
    /// `0.366 exp(-h0 t / 2) + 0.634 exp(-h0 t) = 1/2` at `t ~ 43`.
    pub fn paper_shape(seed: u64) -> Self {
        let h0 = std::f64::consts::LN_2 / 34.0;
        ScenarioSpec {
            n: 1806,
            p: 109,
            moderators: vec![Moderator {
                name: "responsive".into(),
                kind: ModeratorKind::Binary { prob: 0.366 },
            }],
            subgroups: vec![
                Subgroup {
                    name: "responsive".into(),
                    rules: vec![Rule {
                        feature: "responsive".into(),
                        relation: Relation::Ge,
                        threshold: 0.5,
                    }],
                    hazard_t0: h0,
                    hazard_t1: h0 / 2.0,
                },
                Subgroup {
                    name: "unresponsive".into(),
                    rules: vec![Rule {
                        feature: "responsive".into(),
                        relation: Relation::Lt,
                        threshold: 0.5,
                    }],
                    hazard_t0: h0,
                    hazard_t1: h0,
                },
            ],
            censoring_hazard: 0.002,
            treat_prob: 520.0 / 1806.0,
            admin_cutoff: Some(365.0),
            truth_horizon: None,
            seed,
        }
    }

    /// Two equal subgroups, arm-1 hazard halved in the first, balanced arms.
    pub fn planted_halved(n: usize, p: usize, seed: u64) -> Self {
        let h0 = std::f64::consts::LN_2 / 34.0;
        ScenarioSpec {
            n,
            p,
            moderators: vec![Moderator {
                name: "responsive".into(),
                kind: ModeratorKind::Binary { prob: 0.5 },
            }],
            subgroups: vec![
                Subgroup {
                    name: "responsive".into(),
                    rules: vec![Rule {
                        feature: "responsive".into(),
                        relation: Relation::Ge,
                        threshold: 0.5,
                    }],
                    hazard_t0: h0,
                    hazard_t1: h0 / 2.0,
                },
                Subgroup {
                    name: "unresponsive".into(),
                    rules: vec![Rule {
                        feature: "responsive".into(),
                        relation: Relation::Lt,
                        threshold: 0.5,
                    }],
                    hazard_t0: h0,
                    hazard_t1: h0,
                },
            ],
            censoring_hazard: 0.002,
            treat_prob: 0.5,
            admin_cutoff: Some(365.0),
            truth_horizon: None,
            seed,
        }
    }

    /// No heterogeneity and no arm difference: one hazard for everyone.
    pub fn null(n: usize, p: usize, mean_days: f64, seed: u64) -> Self {
        ScenarioSpec {
            n,
            p,
            moderators: vec![],
            subgroups: vec![Subgroup {
                name: "everyone".into(),
                rules: vec![],
                hazard_t0: 1.0 / mean_days,
                hazard_t1: 1.0 / mean_days,
            }],
            censoring_hazard: 0.0,
            treat_prob: 0.5,
            admin_cutoff: None,
            truth_horizon: None,
            seed,
        }
    }

    pub fn named(name: &str, seed: u64) -> Option<Self> {
        match name {
            "paper_shape" => Some(ScenarioSpec::paper_shape(seed)),
            "planted_halved" => Some(ScenarioSpec::planted_halved(2000, 20, seed)),
            "null" => Some(ScenarioSpec::null(2000, 20, 50.0, seed)),
            _ => None,
        }
    }
}

pub fn exp_survival(hazard: f64, t: f64) -> f64 {
    (-hazard * t).exp()
}

pub fn exp_median(hazard: f64) -> f64 {
    std::f64::consts::LN_2 / hazard
}

/// `(1 - exp(-hazard * horizon)) / hazard`.
pub fn exp_rmst(hazard: f64, horizon: f64) -> f64 {
    -(-hazard * horizon).exp_m1() / hazard
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupTruth {
    pub name: String,
    pub hazard_t0: f64,
    pub hazard_t1: f64,
    pub median_t0: f64,
    pub median_t1: f64,
    pub median_diff: f64,
    pub rmst_t0: f64,
    pub rmst_t1: f64,
    pub rmst_diff: f64,
}

impl SubgroupTruth {
    pub fn hazard(&self, arm: Arm) -> f64 {
        match arm {
            Arm::T0 => self.hazard_t0,
            Arm::T1 => self.hazard_t1,
        }
    }

    pub fn survival(&self, arm: Arm, t: f64) -> f64 {
        exp_survival(self.hazard(arm), t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub horizon: f64,
    pub subgroups: Vec<SubgroupTruth>,
    pub covariate_names: Vec<String>,
    pub moderator_indices: Vec<usize>,
    /// Subgroup index of each generated record, in record order.
    pub membership: Vec<usize>,
}

impl GroundTruth {
    pub fn subgroup(&self, name: &str) -> Result<&SubgroupTruth> {
        self.subgroups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::UnknownSubgroup(name.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub records: Vec<SurvivalRecord>,
    pub truth: GroundTruth,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Cohort> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let censor = (spec.censoring_hazard > 0.0)
        .then(|| Exp::new(spec.censoring_hazard).expect("validated hazard"));
    let width = spec.n.to_string().len();
    let m = spec.moderators.len();

    let mut records = Vec::with_capacity(spec.n);
    let mut membership = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut x = Vec::with_capacity(spec.n_covariates());
        for moderator in &spec.moderators {
            x.push(match moderator.kind {
                ModeratorKind::Binary { prob } => f64::from(u8::from(rng.random_bool(prob))),
                ModeratorKind::Uniform { low, high } => rng.random_range(low..high),
            });
        }
        for _ in 0..spec.p {
            x.push(StandardNormal.sample(&mut rng));
        }
        let group = spec.subgroup_of(&x[..m])?;
        let arm = if rng.random_bool(spec.treat_prob) { Arm::T1 } else { Arm::T0 };
        let g = &spec.subgroups[group];
        let hazard = match arm {
            Arm::T0 => g.hazard_t0,
            Arm::T1 => g.hazard_t1,
        };
        let event_time: f64 = Exp::new(hazard).expect("validated hazard").sample(&mut rng);
        let mut censor_time = censor.map_or(f64::INFINITY, |c| c.sample(&mut rng));
        if let Some(cut) = spec.admin_cutoff {
            censor_time = censor_time.min(cut);
        }
        let observed = event_time.min(censor_time);
        records.push(SurvivalRecord::new(
            format!("p{i:0width$}"),
            observed,
            event_time <= censor_time,
            arm,
            x,
        )?);
        membership.push(group);
    }

    Ok(Cohort {
        records,
        truth: ground_truth(spec, spec.default_horizon(), membership),
    })
}

fn ground_truth(spec: &ScenarioSpec, horizon: f64, membership: Vec<usize>) -> GroundTruth {
    let subgroups = spec
        .subgroups
        .iter()
        .map(|g| {
            let (m0, m1) = (exp_median(g.hazard_t0), exp_median(g.hazard_t1));
            let (r0, r1) = (exp_rmst(g.hazard_t0, horizon), exp_rmst(g.hazard_t1, horizon));
            SubgroupTruth {
                name: g.name.clone(),
                hazard_t0: g.hazard_t0,
                hazard_t1: g.hazard_t1,
                median_t0: m0,
                median_t1: m1,
                median_diff: m1 - m0,
                rmst_t0: r0,
                rmst_t1: r1,
                rmst_diff: r1 - r0,
            }
        })
        .collect();
    GroundTruth {
        horizon,
        subgroups,
        covariate_names: spec.covariate_names(),
        moderator_indices: (0..spec.moderators.len()).collect(),
        membership,
    }
}

/// True RMST(arm 1) - RMST(arm 0) of `subgroup` up to `horizon`.
pub fn true_differential_rmst(spec: &ScenarioSpec, subgroup: &str, horizon: f64) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let g = spec.subgroup(subgroup)?;
    Ok(exp_rmst(g.hazard_t1, horizon) - exp_rmst(g.hazard_t0, horizon))
}
