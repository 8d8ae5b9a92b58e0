use crate::error::{Error, Result};
use crate::survival::record::SurvivalRecord;

/// Harrell's C-index; higher risk should mean shorter survival.
pub fn concordance_index(risk_scores: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if risk_scores.len() != records.len() {
        return Err(Error::InvalidArgument(format!(
            "{} risk scores for {} records",
            risk_scores.len(),
            records.len()
        )));
    }
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    concordance_from_parts(risk_scores, &times, &events)
}

pub(crate) fn concordance_from_parts(risk: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    // twice the concordance credit, so ties stay integral
    let mut credit: u64 = 0;
    let mut comparable: u64 = 0;
    for i in 0..times.len() {
        if !events[i] {
            continue;
        }
        for j in 0..times.len() {
            if times[i] < times[j] {
                comparable += 1;
                if risk[i] > risk[j] {
                    credit += 2;
                } else if risk[i] == risk[j] {
                    credit += 1;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(Error::ConcordanceUndefined);
    }
    Ok(credit as f64 / (2 * comparable) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::record::Arm;

    fn cohort(times: &[f64], events: &[bool]) -> Vec<SurvivalRecord> {
        times
            .iter()
            .zip(events)
            .enumerate()
            .map(|(i, (&t, &e))| SurvivalRecord::new(i.to_string(), t, e, Arm::T0, vec![]).unwrap())
            .collect()
    }

    #[test]
    fn perfect_and_inverse() {
        let r = cohort(&[1.0, 2.0, 3.0], &[true; 3]);
        assert_eq!(concordance_index(&[3.0, 2.0, 1.0], &r).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 2.0, 3.0], &r).unwrap(), 0.0);
        assert_eq!(concordance_index(&[1.0, 1.0, 1.0], &r).unwrap(), 0.5);
    }

    #[test]
    fn censored_shorter_time_not_comparable() {
        // only pair (0, 2) and (1, 2)? 0 is censored; 1 has event and 1 < 2
        let r = cohort(&[1.0, 2.0, 3.0], &[false, true, false]);
        assert_eq!(concordance_index(&[0.0, 5.0, 1.0], &r).unwrap(), 1.0);
    }

    #[test]
    fn undefined_without_pairs() {
        let r = cohort(&[1.0, 2.0], &[false, false]);
        assert!(matches!(concordance_index(&[0.0, 1.0], &r), Err(Error::ConcordanceUndefined)));
        let tied = cohort(&[2.0, 2.0], &[true, true]);
        assert!(matches!(concordance_index(&[0.0, 1.0], &tied), Err(Error::ConcordanceUndefined)));
    }

    #[test]
    fn length_mismatch() {
        let r = cohort(&[1.0, 2.0], &[true, true]);
        assert!(concordance_index(&[1.0], &r).is_err());
    }
}
