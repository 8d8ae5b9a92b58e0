mod common;

use causal_survival::survival::{
    concordance_index, curve_diff, km_estimate, logrank, median_survival, rmst, SurvivalCurve,
};
use causal_survival::{seed, Arm, SurvivalRecord};
use common::{brute_force_km, logrank_table};
use proptest::prelude::*;
use rand::Rng;

fn records(times: &[f64], events: &[bool]) -> Vec<SurvivalRecord> {
    times
        .iter()
        .zip(events)
        .enumerate()
        .map(|(i, (&t, &e))| SurvivalRecord::new(format!("r{i:03}"), t, e, Arm::T0, vec![]).unwrap())
        .collect()
}

/// Integer days in 1..=12 so ties are frequent.
fn cohort(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((1u32..=12, any::<bool>()), 1..=max)
        .prop_map(|v| v.into_iter().map(|(t, e)| (f64::from(t), e)).unzip())
}

fn assert_valid_curve(c: &SurvivalCurve) {
    let p = c.probs();
    assert!(p.iter().all(|&s| (0.0..=1.0).contains(&s)));
    assert!(p.windows(2).all(|w| w[1] <= w[0]));
    assert!(c.times().windows(2).all(|w| w[0] < w[1]));
}

fn sampled_exponential(hazard: f64, step: f64, end: f64) -> SurvivalCurve {
    let n = (end / step).round() as usize;
    let times: Vec<f64> = (1..=n).map(|k| k as f64 * step).collect();
    let probs = times.iter().map(|t| (-hazard * t).exp()).collect();
    SurvivalCurve::new(times, probs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn km_matches_brute_force_oracle((times, events) in cohort(30)) {
        let curve = km_estimate(&records(&times, &events)).unwrap();
        let (grid, probs) = brute_force_km(&times, &events);
        prop_assert_eq!(curve.times(), &grid[..]);
        prop_assert_eq!(curve.probs(), &probs[..]);
    }

    #[test]
    fn km_record_order_invariance((times, events) in cohort(30), shuffle_seed in any::<u64>()) {
        let recs = records(&times, &events);
        let mut shuffled = recs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut seed::rng(shuffle_seed));
        prop_assert_eq!(km_estimate(&recs).unwrap(), km_estimate(&shuffled).unwrap());
    }

    #[test]
    fn logrank_record_order_invariance(
        (ta, ea) in cohort(15),
        (tb, eb) in cohort(15),
        shuffle_seed in any::<u64>(),
    ) {
        prop_assume!(ea.iter().chain(&eb).any(|&e| e));
        let a = records(&ta, &ea);
        let b = records(&tb, &eb);
        let mut a2 = a.clone();
        use rand::seq::SliceRandom;
        a2.shuffle(&mut seed::rng(shuffle_seed));
        prop_assert_eq!(logrank(&a, &b).unwrap(), logrank(&a2, &b).unwrap());
    }

    #[test]
    fn curves_are_monotone_and_bounded((times, events) in cohort(30), (t2, e2) in cohort(30)) {
        let c1 = km_estimate(&records(&times, &events)).unwrap();
        let c0 = km_estimate(&records(&t2, &e2)).unwrap();
        assert_valid_curve(&c1);
        let round_trip: SurvivalCurve = serde_json::from_str(&serde_json::to_string(&c1).unwrap()).unwrap();
        assert_valid_curve(&round_trip);
        let d = curve_diff(&c1, &c0);
        for (t, delta) in d.times.iter().zip(&d.deltas) {
            prop_assert!(*delta >= -1.0 && *delta <= 1.0);
            prop_assert_eq!(*delta, c1.at(*t) - c0.at(*t));
        }
    }

    #[test]
    fn rmst_is_additive((times, events) in cohort(30), h1 in 0.1f64..15.0, extra in 0.1f64..10.0) {
        let c = km_estimate(&records(&times, &events)).unwrap();
        let h2 = h1 + extra;
        let lhs = rmst(&c, h1).unwrap() + c.integrate(h1, h2);
        prop_assert!((lhs - rmst(&c, h2).unwrap()).abs() <= 1e-12 * h2);
    }

    #[test]
    fn logrank_matches_table_and_swaps((ta, ea) in cohort(20), (tb, eb) in cohort(20)) {
        prop_assume!(ea.iter().chain(&eb).any(|&e| e));
        let a = records(&ta, &ea);
        let b = records(&tb, &eb);
        let ab = logrank(&a, &b).unwrap();
        let ba = logrank(&b, &a).unwrap();
        prop_assert_eq!(ab.z, -ba.z);
        prop_assert_eq!(ab.chi_sq, ba.chi_sq);

        let pa: Vec<(f64, bool)> = ta.iter().copied().zip(ea.iter().copied()).collect();
        let pb: Vec<(f64, bool)> = tb.iter().copied().zip(eb.iter().copied()).collect();
        let table = logrank_table(&pa, &pb);
        prop_assert!((ab.observed_a - table.observed_a).abs() <= 1e-10);
        prop_assert!((ab.expected_a - table.expected_a).abs() <= 1e-10);
        prop_assert!((ab.variance - table.variance).abs() <= 1e-10);
        if table.variance > 0.0 {
            let chi = (table.observed_a - table.expected_a).powi(2) / table.variance;
            prop_assert!((ab.chi_sq - chi).abs() <= 1e-10 * chi.max(1.0));
        } else {
            prop_assert!(ab.degenerate);
        }
    }

    #[test]
    fn concordance_of_negated_scores_complements(
        (times, events) in cohort(25),
        raw in prop::collection::vec(any::<u32>(), 25),
    ) {
        let recs = records(&times, &events);
        let mut scores: Vec<f64> = raw[..recs.len()].iter().map(|&r| f64::from(r)).collect();
        // break score ties
        for (i, s) in scores.iter_mut().enumerate() {
            *s += i as f64 * 1e-3;
        }
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        match (concordance_index(&scores, &recs), concordance_index(&neg, &recs)) {
            (Ok(c), Ok(n)) => prop_assert!((c + n - 1.0).abs() <= 1e-12),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "definedness differs"),
        }
    }
}

#[test]
fn km_worked_example_and_median() {
    let c = km_estimate(&records(&[5.0, 8.0, 12.0], &[true, true, false])).unwrap();
    assert_eq!(c.times(), &[5.0, 8.0]);
    assert!((c.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((c.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(median_survival(&c), Some(8.0));
}

#[test]
fn logrank_hand_table() {
    // A dies at 1 and 2, B at 3 and 4: O_A - E_A = 7/6, V = 17/36.
    let a = records(&[1.0, 2.0], &[true, true]);
    let b = records(&[3.0, 4.0], &[true, true]);
    let r = logrank(&a, &b).unwrap();
    assert!((r.chi_sq - 49.0 / 17.0).abs() < 1e-12);
    assert!((r.chi_sq - 2.88).abs() < 0.01);
    let same = logrank(&a, &a).unwrap();
    assert_eq!((same.z, same.chi_sq), (0.0, 0.0));
}

#[test]
fn rmst_of_densely_sampled_exponential() {
    let fine = sampled_exponential(0.1, 1e-4, 10.0);
    let exact = 10.0 * (1.0 - (-1.0f64).exp());
    // the sampled step function overshoots by less than one step
    let got = rmst(&fine, 10.0).unwrap();
    assert!((got - exact).abs() < 1e-4, "{got} vs {exact}");
    assert!((got - 6.321).abs() < 1e-3);
}

#[test]
fn rmst_difference_of_exponentials() {
    let slow = sampled_exponential(0.05, 1e-4, 20.0);
    let fast = sampled_exponential(0.1, 1e-4, 20.0);
    let exact = 20.0 * (1.0 - (-1.0f64).exp()) - 10.0 * (1.0 - (-2.0f64).exp());
    let diff = rmst(&slow, 20.0).unwrap() - rmst(&fast, 20.0).unwrap();
    assert!((diff - exact).abs() < 1e-3);
    assert!((diff - 3.995).abs() < 1e-3);
    assert!((curve_diff(&slow, &fast).area(20.0).unwrap() - diff).abs() < 1e-9);
}

#[test]
fn random_scores_are_uninformative() {
    let mut rng = seed::rng(99);
    let n = 2000;
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
    let events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let c = concordance_index(&scores, &records(&times, &events)).unwrap();
    assert!((c - 0.5).abs() <= 0.05, "{c}");
}
