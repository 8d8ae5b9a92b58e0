use crate::error::Result;
use crate::survival::curve::SurvivalCurve;
use crate::survival::record::{validate_records, SurvivalRecord};

/// Kaplan–Meier product-limit estimate.
///
/// The grid holds only times with at least one event. Records censored at an
/// event time stay in the risk set for that time.
pub fn km_estimate(records: &[SurvivalRecord]) -> Result<SurvivalCurve> {
    validate_records(records)?;
    let mut pairs: Vec<(f64, bool)> = records.iter().map(|r| (r.time, r.event)).collect();
    Ok(km_from_pairs(&mut pairs))
}

/// KM over `(time, event)` pairs; sorts `pairs` in place.
pub(crate) fn km_from_pairs(pairs: &mut [(f64, bool)]) -> SurvivalCurve {
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    km_sorted(pairs.iter().copied())
}

/// KM over pairs already sorted by ascending time.
pub(crate) fn km_sorted<I>(sorted: I) -> SurvivalCurve
where
    I: IntoIterator<Item = (f64, bool)>,
    I::IntoIter: ExactSizeIterator,
{
    let iter = sorted.into_iter();
    let mut at_risk = iter.len();
    let mut times = Vec::new();
    let mut probs = Vec::new();
    let mut s = 1.0_f64;

    let mut iter = iter.peekable();
    while let Some((t, e)) = iter.next() {
        let mut deaths = usize::from(e);
        let mut count = 1;
        while let Some(&(t2, e2)) = iter.peek() {
            if t2 != t {
                break;
            }
            deaths += usize::from(e2);
            count += 1;
            iter.next();
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            times.push(t);
            probs.push(s);
        }
        at_risk -= count;
    }
    SurvivalCurve::from_parts_unchecked(times, probs)
}
