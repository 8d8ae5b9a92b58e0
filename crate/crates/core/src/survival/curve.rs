use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step survival function.
///
/// `S(t) = 1` for `t < times[0]`, otherwise the probability at the largest
/// grid time not exceeding `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct SurvivalCurve {
    times: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCurve {
    times: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawCurve> for SurvivalCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        SurvivalCurve::new(raw.times, raw.probs)
    }
}

impl SurvivalCurve {
    pub fn new(times: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if times.len() != probs.len() {
            return Err(Error::InvalidArgument(format!(
                "curve has {} times but {} probabilities",
                times.len(),
                probs.len()
            )));
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidArgument(format!("curve time {t} is not a finite nonnegative number")));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::InvalidArgument("curve times must be strictly increasing".into()));
            }
        }
        let mut prev = 1.0;
        for &s in &probs {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!("survival probability {s} outside [0, 1]")));
            }
            if s > prev {
                return Err(Error::InvalidArgument("survival probabilities must be nonincreasing".into()));
            }
            prev = s;
        }
        Ok(SurvivalCurve { times, probs })
    }

    /// The curve with no steps, `S(t) = 1` everywhere.
    pub fn unit() -> Self {
        SurvivalCurve {
            times: Vec::new(),
            probs: Vec::new(),
        }
    }

    pub(crate) fn from_parts_unchecked(times: Vec<f64>, probs: Vec<f64>) -> Self {
        debug_assert!(SurvivalCurve::new(times.clone(), probs.clone()).is_ok());
        SurvivalCurve { times, probs }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&g| g <= t);
        if k == 0 {
            1.0
        } else {
            self.probs[k - 1]
        }
    }

    /// Step evaluation on an ascending grid in one merge pass.
    pub fn eval_on(&self, grid: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        let mut k = 0;
        let mut current = 1.0;
        for &t in grid {
            while k < self.times.len() && self.times[k] <= t {
                current = self.probs[k];
                k += 1;
            }
            out.push(current);
        }
        out
    }

    pub fn median(&self) -> Option<f64> {
        median_survival(self)
    }

    /// Exact integral of the step function over `[from, to]`.
    pub fn integrate(&self, from: f64, to: f64) -> f64 {
        integrate_steps(&self.times, &self.probs, 1.0, from, to)
    }

    pub fn rmst(&self, horizon: f64) -> Result<f64> {
        rmst(self, horizon)
    }
}

/// Smallest grid time with `S <= 0.5`, if the curve reaches one half.
pub fn median_survival(curve: &SurvivalCurve) -> Option<f64> {
    curve
        .probs
        .iter()
        .position(|&s| s <= 0.5)
        .map(|k| curve.times[k])
}

/// Restricted mean survival time: area under `curve` on `[0, horizon]`.
pub fn rmst(curve: &SurvivalCurve, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    Ok(curve.integrate(0.0, horizon))
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

fn integrate_steps(times: &[f64], values: &[f64], initial: f64, from: f64, to: f64) -> f64 {
    if to <= from {
        return 0.0;
    }
    let start = times.partition_point(|&g| g <= from);
    let mut value = if start == 0 { initial } else { values[start - 1] };
    let mut left = from;
    let mut area = 0.0;
    for (&t, &v) in times[start..].iter().zip(&values[start..]) {
        if t >= to {
            break;
        }
        area += value * (t - left);
        left = t;
        value = v;
    }
    area + value * (to - left)
}

/// Pointwise `S1(t) - S0(t)` on the union of both grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceCurve {
    pub times: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl DifferenceCurve {
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&g| g <= t);
        if k == 0 {
            0.0
        } else {
            self.deltas[k - 1]
        }
    }

    /// Signed area under the difference curve on `[0, horizon]`.
    pub fn area(&self, horizon: f64) -> Result<f64> {
        check_horizon(horizon)?;
        Ok(integrate_steps(&self.times, &self.deltas, 0.0, 0.0, horizon))
    }
}

pub fn curve_diff(c1: &SurvivalCurve, c0: &SurvivalCurve) -> DifferenceCurve {
    let times = union_grid(&c1.times, &c0.times);
    let deltas = c1
        .eval_on(&times)
        .into_iter()
        .zip(c0.eval_on(&times))
        .map(|(a, b)| a - b)
        .collect();
    DifferenceCurve { times, deltas }
}

/// Sorted union of two strictly increasing grids.
pub fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}
