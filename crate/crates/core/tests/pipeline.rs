mod common;

use std::collections::BTreeMap;

use causal_survival::causal_tree::{leaf_assign, LeafReport, Relation};
use causal_survival::datagen::{generate, true_differential_rmst, Cohort, ScenarioSpec};
use causal_survival::forest::fit_survival_forest_on;
use causal_survival::pipeline::{
    population_baseline, predict_new_patient, run_two_step, FeatureScope, PipelineConfig, PipelineResult,
};
use causal_survival::survival::{count_events, curve_diff, rmst};
use causal_survival::{Arm, Error, SurvivalRecord};
use common::{mean, variance};

fn penalized(records: &[SurvivalRecord]) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.causal.min_effect_gain = cfg.causal.honest_penalty_level(records, 0.05).unwrap();
    cfg
}

fn run(cohort: &Cohort, cfg: &PipelineConfig) -> PipelineResult {
    run_two_step(&cohort.records, &cohort.truth.covariate_names, cfg).unwrap()
}

/// A point inside the region described by `report`, zero elsewhere.
fn probe_for(report: &LeafReport, p: usize) -> Vec<f64> {
    let mut lo = vec![f64::NEG_INFINITY; p];
    let mut hi = vec![f64::INFINITY; p];
    for c in &report.path {
        match c.relation {
            Relation::Ge => lo[c.feature_index] = lo[c.feature_index].max(c.threshold),
            Relation::Lt => hi[c.feature_index] = hi[c.feature_index].min(c.threshold),
        }
    }
    (0..p)
        .map(|j| match (lo[j].is_finite(), hi[j].is_finite()) {
            (true, _) => lo[j],
            (false, true) => hi[j] - 1.0,
            (false, false) => 0.0,
        })
        .collect()
}

#[test]
fn null_scenario_has_near_zero_differences() {
    let cohort = generate(&ScenarioSpec::null(2000, 20, 50.0, 0)).unwrap();
    let res = run(&cohort, &penalized(&cohort.records));
    let diffs: Vec<f64> = res
        .leaf_results
        .iter()
        .flat_map(|l| l.patient_results.iter().map(|p| p.rmst_diff.abs()))
        .collect();
    assert!(!diffs.is_empty());
    assert!(mean(&diffs) <= 2.0, "{}", mean(&diffs));
}

#[test]
fn planted_subgroup_probe_gains_under_arm_one() {
    let mut positive = 0;
    for s in 0..20 {
        let spec = ScenarioSpec::planted_halved(2000, 20, s);
        let cohort = generate(&spec).unwrap();
        let res = run(&cohort, &PipelineConfig::default());
        let mut x = vec![0.0; spec.n_covariates()];
        x[0] = 1.0;
        if predict_new_patient(&res, &x).is_ok_and(|p| p.rmst_diff > 0.0) {
            positive += 1;
        }
    }
    assert!(positive >= 18, "{positive}/20");
}

#[test]
fn planted_differences_pool_by_true_subgroup() {
    let spec = ScenarioSpec::planted_halved(2000, 20, 1);
    let cohort = generate(&spec).unwrap();
    let res = run(&cohort, &PipelineConfig::default());
    let membership: BTreeMap<&str, usize> = cohort
        .records
        .iter()
        .zip(&cohort.truth.membership)
        .map(|(r, &m)| (r.id.as_str(), m))
        .collect();
    let mut by_group = [Vec::new(), Vec::new()];
    for l in &res.leaf_results {
        for p in &l.patient_results {
            by_group[membership[p.patient_id.as_str()]].push(p.rmst_diff);
        }
    }
    let truth = true_differential_rmst(&spec, "responsive", res.horizon).unwrap();
    let affected = mean(&by_group[0]);
    let null = mean(&by_group[1].iter().map(|d: &f64| d.abs()).collect::<Vec<_>>());
    assert!(((affected - truth) / truth).abs() <= 0.25, "{affected} vs {truth}");
    assert!(null < affected / 2.0, "{null} vs {affected}");
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let cohort = generate(&ScenarioSpec::planted_halved(800, 6, 3)).unwrap();
    let cfg = PipelineConfig {
        seed: 3,
        ..Default::default()
    };
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let a = pool(1).install(|| run(&cohort, &cfg));
    let b = pool(8).install(|| run(&cohort, &cfg));
    let c = run(&cohort, &cfg);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn held_out_patient_replays_exactly() {
    let cohort = generate(&ScenarioSpec::planted_halved(1000, 6, 4)).unwrap();
    let res = run(&cohort, &PipelineConfig::default());
    let index: BTreeMap<&str, &SurvivalRecord> = cohort.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let model = res.model();
    let mut checked = 0;
    for l in &res.leaf_results {
        for stored in l.patient_results.iter().step_by(5) {
            let x = &index[stored.patient_id.as_str()].covariates;
            for pred in [predict_new_patient(&res, x).unwrap(), model.predict(x).unwrap()] {
                assert_eq!(pred.leaf_id, l.report.leaf_id);
                assert_eq!(pred.curve_t0, stored.curve_t0);
                assert_eq!(pred.curve_t1, stored.curve_t1);
                assert_eq!(pred.diff, stored.diff);
                assert_eq!(pred.rmst_diff, stored.rmst_diff);
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn skipped_and_unselected_leaves_refuse_prediction() {
    let spec = ScenarioSpec::planted_halved(600, 5, 2);
    let cohort = generate(&spec).unwrap();
    let res = run(&cohort, &PipelineConfig::default());
    assert!(!res.skipped.is_empty(), "expected a skipped leaf");
    for skip in &res.skipped {
        let x = probe_for(&skip.report, spec.n_covariates());
        assert_eq!(leaf_assign(&res.tree, &x).unwrap(), skip.report.leaf_id);
        match predict_new_patient(&res, &x) {
            Err(Error::NoFittedModel(report)) => assert_eq!(*report, skip.report),
            other => panic!("{other:?}"),
        }
        assert!(matches!(res.model().predict(&x), Err(Error::NoFittedModel(_))));
    }

    let strict = PipelineConfig {
        ate_threshold: 1e9,
        ..Default::default()
    };
    let none = run(&cohort, &strict);
    assert!(none.selected.is_empty() && none.leaf_results.is_empty());
    let x = probe_for(&none.reports[0], spec.n_covariates());
    assert!(matches!(predict_new_patient(&none, &x), Err(Error::NoFittedModel(_))));
}

#[test]
fn skipped_leaves_are_exactly_the_unviable_ones() {
    for s in 0..4 {
        let cohort = generate(&ScenarioSpec::planted_halved(600, 5, 10 + s)).unwrap();
        let cfg = PipelineConfig::default();
        let res = run(&cohort, &cfg);
        let mut covered: Vec<usize> = res
            .leaf_results
            .iter()
            .map(|l| l.report.leaf_id)
            .chain(res.skipped.iter().map(|k| k.report.leaf_id))
            .collect();
        covered.sort_unstable();
        assert_eq!(covered, res.selected);

        let need = cfg.min_arm_records();
        let mut members: BTreeMap<usize, [Vec<SurvivalRecord>; 2]> = BTreeMap::new();
        for r in &cohort.records {
            let id = leaf_assign(&res.tree, &r.covariates).unwrap();
            members.entry(id).or_default()[r.treatment.index()].push(r.clone());
        }
        let n_train = |n: usize| n - ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n.max(1));
        for l in &res.leaf_results {
            let arms = &members[&l.report.leaf_id];
            assert_eq!(l.n_train_t0, n_train(arms[0].len()));
            assert_eq!(l.n_train_t1, n_train(arms[1].len()));
            assert!(l.n_train_t0 >= need && l.n_train_t1 >= need);
            assert_eq!(l.leaf_km_t0, causal_survival::survival::km_estimate(&arms[0]).unwrap());
            let held = arms[0].len() + arms[1].len() - l.n_train_t0 - l.n_train_t1;
            assert_eq!(l.patient_results.len(), held);
        }
        for k in &res.skipped {
            let empty = [Vec::new(), Vec::new()];
            let arms = members.get(&k.report.leaf_id).unwrap_or(&empty);
            let short = arms.iter().any(|a| n_train(a.len()) < need);
            // with enough records the only other reason is an event-free training half
            let eventless = arms.iter().any(|a| count_events(a) <= a.len() - n_train(a.len()));
            assert!(short || eventless, "{}", k.reason);
            assert!(!k.reason.is_empty());
        }
    }
}

#[test]
fn leaf_arms_are_more_homogeneous_than_the_full_arm() {
    let mut holds = 0;
    for s in 0..5 {
        let spec = ScenarioSpec::planted_halved(2000, 20, s);
        let cohort = generate(&spec).unwrap();
        let cfg = PipelineConfig {
            seed: s,
            ..Default::default()
        };
        let res = run(&cohort, &cfg);
        let features: Vec<usize> = res.forest_features().into_iter().collect();
        let mut ok = !res.leaf_results.is_empty();
        // only arm 1 has hazards that differ between subgroups
        for arm in [Arm::T1] {
            let whole: Vec<SurvivalRecord> = cohort.records.iter().filter(|r| r.treatment == arm).cloned().collect();
            let forest = fit_survival_forest_on(&whole, &cfg.forest, s, &features).unwrap();
            let full: Vec<f64> = whole
                .iter()
                .map(|r| rmst(&forest.predict_survival(&r.covariates).unwrap(), res.horizon).unwrap())
                .collect();
            for l in &res.leaf_results {
                let within: Vec<f64> = l
                    .patient_results
                    .iter()
                    .map(|p| {
                        let c = if arm == Arm::T1 { &p.curve_t1 } else { &p.curve_t0 };
                        rmst(c, res.horizon).unwrap()
                    })
                    .collect();
                ok &= variance(&within) <= variance(&full);
            }
        }
        holds += usize::from(ok);
    }
    assert!(holds >= 4, "{holds}/5");
}

#[test]
fn forests_only_see_tree_split_features() {
    for s in 0..3 {
        let cohort = generate(&ScenarioSpec::planted_halved(1000, 8, 20 + s)).unwrap();
        let res = run(&cohort, &PipelineConfig::default());
        let allowed = res.tree.split_features();
        for l in &res.leaf_results {
            assert!(l.features.iter().all(|f| allowed.contains(f)));
            for forest in [&l.forest_t0, &l.forest_t1] {
                assert!(forest.trees().iter().all(|t| t.split_features().is_subset(&allowed)));
            }
        }
    }
    let cohort = generate(&ScenarioSpec::planted_halved(600, 4, 30)).unwrap();
    let all = PipelineConfig {
        feature_scope: FeatureScope::AllFeatures,
        ..Default::default()
    };
    let res = run(&cohort, &all);
    assert!(res.leaf_results.iter().all(|l| l.features == (0..5).collect::<Vec<_>>()));
}

#[test]
fn stored_differences_recompute_exactly() {
    let cohort = generate(&ScenarioSpec::planted_halved(1000, 6, 5)).unwrap();
    let res = run(&cohort, &PipelineConfig::default());
    let h = res.horizon;
    for l in &res.leaf_results {
        for p in &l.patient_results {
            assert_eq!(p.diff, curve_diff(&p.curve_t1, &p.curve_t0));
            assert_eq!(p.rmst_diff, rmst(&p.curve_t1, h).unwrap() - rmst(&p.curve_t0, h).unwrap());
        }
    }
}

#[test]
fn provenance_and_horizon_default() {
    let cohort = generate(&ScenarioSpec::planted_halved(500, 4, 6)).unwrap();
    let cfg = PipelineConfig::default();
    let res = run(&cohort, &cfg);
    let max_event = cohort.records.iter().filter(|r| r.event).map(|r| r.time).fold(0.0, f64::max);
    assert_eq!(res.horizon, max_event);
    assert_eq!(res.provenance.seed, cfg.seed);
    assert_eq!(res.provenance.config_hash, cfg.hash());
    assert_eq!(res.root_ate, res.tree.root_tau());
}

#[test]
fn baseline_edge_cases() {
    let same: Vec<SurvivalRecord> = (0..20)
        .map(|i| {
            let arm = if i % 2 == 0 { Arm::T0 } else { Arm::T1 };
            SurvivalRecord::new(format!("r{i:02}"), f64::from(1 + i / 2), true, arm, vec![0.0]).unwrap()
        })
        .collect();
    assert_eq!(population_baseline(&same).unwrap().median_diff, Some(0.0));

    let mut never = same.clone();
    for r in never.iter_mut().filter(|r| r.treatment == Arm::T1).skip(3) {
        r.event = false;
    }
    let b = population_baseline(&never).unwrap();
    assert!(b.median_t0.is_some());
    assert_eq!(b.median_t1, None);
    assert_eq!(b.median_diff, None);

    let one_arm: Vec<SurvivalRecord> = same.into_iter().filter(|r| r.treatment == Arm::T0).collect();
    assert!(population_baseline(&one_arm).is_err());
}
