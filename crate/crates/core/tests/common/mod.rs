#![allow(dead_code)]

use causal_survival::seed;
use causal_survival::{Arm, SurvivalRecord};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

pub fn arm(treated: bool) -> Arm {
    if treated {
        Arm::T1
    } else {
        Arm::T0
    }
}

/// `Y = 50 + tau * (2 * x0 - 1) * T + N(0, 1)`, every record an event.
/// `x0` is a balanced binary moderator followed by `noise` normal columns.
pub fn planted_effect(n: usize, tau: f64, noise: usize, seed_: u64) -> Vec<SurvivalRecord> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|i| {
            let moderator = f64::from(u8::from(i % 2 == 0));
            let treated = rng.random_bool(0.5);
            let mut x = vec![moderator];
            for _ in 0..noise {
                x.push(StandardNormal.sample(&mut rng));
            }
            let eps: f64 = StandardNormal.sample(&mut rng);
            let y = 50.0 + tau * (2.0 * moderator - 1.0) * f64::from(u8::from(treated)) + eps;
            SurvivalRecord::new(format!("r{i:05}"), y, true, arm(treated), x).unwrap()
        })
        .collect()
}

/// Constant effect `tau` with pure-noise covariates.
pub fn constant_effect(n: usize, tau: f64, p: usize, seed_: u64) -> Vec<SurvivalRecord> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|i| {
            let treated = rng.random_bool(0.5);
            let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eps: f64 = StandardNormal.sample(&mut rng);
            let y = 50.0 + tau * f64::from(u8::from(treated)) + 5.0 * eps;
            SurvivalRecord::new(format!("r{i:05}"), y, true, arm(treated), x).unwrap()
        })
        .collect()
}

/// Exponential survival with hazard `base * 4^z`, `z ~ N(0, 1)`, plus
/// exponential censoring. Column 0 holds `z` (or fresh noise when
/// `informative` is false), columns 1..=4 are noise.
pub fn hazard_ratio_cohort(n: usize, informative: bool, seed_: u64) -> Vec<SurvivalRecord> {
    let mut rng = seed::rng(seed_);
    let censor = Exp::new(0.005).unwrap();
    (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let t: f64 = Exp::new(0.02 * 4f64.powf(z)).unwrap().sample(&mut rng);
            let c: f64 = censor.sample(&mut rng);
            let first = if informative { z } else { StandardNormal.sample(&mut rng) };
            let mut x = vec![first];
            for _ in 0..4 {
                x.push(StandardNormal.sample(&mut rng));
            }
            SurvivalRecord::new(format!("r{i:05}"), t.min(c), t <= c, Arm::T0, x).unwrap()
        })
        .collect()
}

/// Two equal groups on binary column 0 with hazards `h_a` (x0 = 0) and `h_b`.
pub fn two_group_exponential(n: usize, h_a: f64, h_b: f64, noise: usize, seed_: u64) -> Vec<SurvivalRecord> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|i| {
            let group_b = i % 2 == 1;
            let h = if group_b { h_b } else { h_a };
            let t: f64 = Exp::new(h).unwrap().sample(&mut rng);
            let mut x = vec![f64::from(u8::from(group_b))];
            for _ in 0..noise {
                x.push(StandardNormal.sample(&mut rng));
            }
            SurvivalRecord::new(format!("r{i:05}"), t, true, Arm::T0, x).unwrap()
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Product-limit estimate computed directly from the definition: for every
/// distinct event time, count the at-risk set and the deaths by scanning
/// all records.
pub fn brute_force_km(times: &[f64], events: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut grid: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut s = 1.0;
    let mut probs = Vec::with_capacity(grid.len());
    for &t in &grid {
        let at_risk = times.iter().filter(|&&u| u >= t).count() as f64;
        let deaths = times.iter().zip(events).filter(|(&u, &e)| e && u == t).count() as f64;
        s = s * (1.0 - deaths / at_risk);
        probs.push(s);
    }
    (grid, probs)
}

pub struct LogRankTable {
    pub observed_a: f64,
    pub expected_a: f64,
    pub variance: f64,
}

/// Observed, expected and hypergeometric variance for group A, tabulated
/// time by time from the raw groups.
pub fn logrank_table(a: &[(f64, bool)], b: &[(f64, bool)]) -> LogRankTable {
    let mut grid: Vec<f64> = a.iter().chain(b).filter(|r| r.1).map(|r| r.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut table = LogRankTable {
        observed_a: 0.0,
        expected_a: 0.0,
        variance: 0.0,
    };
    for &t in &grid {
        let n_a = a.iter().filter(|r| r.0 >= t).count() as f64;
        let n_b = b.iter().filter(|r| r.0 >= t).count() as f64;
        let d_a = a.iter().filter(|r| r.1 && r.0 == t).count() as f64;
        let d_b = b.iter().filter(|r| r.1 && r.0 == t).count() as f64;
        let (n, d) = (n_a + n_b, d_a + d_b);
        table.observed_a += d_a;
        table.expected_a += d * n_a / n;
        if n > 1.0 {
            table.variance += d * (n_a / n) * (n_b / n) * (n - d) / (n - 1.0);
        }
    }
    table
}
