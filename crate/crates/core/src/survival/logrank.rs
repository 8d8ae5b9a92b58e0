use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::record::SurvivalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    /// Signed statistic, positive when group A has more events than expected.
    pub z: f64,
    pub chi_sq: f64,
    pub observed_a: f64,
    pub expected_a: f64,
    pub variance: f64,
    /// Zero total variance; `z` and `chi_sq` are reported as 0.
    pub degenerate: bool,
}

/// Two-sample log-rank test of `group_a` against `group_b`.
pub fn logrank(group_a: &[SurvivalRecord], group_b: &[SurvivalRecord]) -> Result<LogRankResult> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::Precondition("log-rank needs two nonempty groups".into()));
    }
    if !group_a.iter().chain(group_b).any(|r| r.event) {
        return Err(Error::Precondition("log-rank needs at least one event".into()));
    }
    let mut pooled: Vec<(f64, bool, bool)> = group_a
        .iter()
        .map(|r| (r.time, r.event, true))
        .chain(group_b.iter().map(|r| (r.time, r.event, false)))
        .collect();
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let events: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let in_a: Vec<bool> = pooled.iter().map(|p| p.2).collect();
    Ok(logrank_sorted(&times, &events, &in_a))
}

/// Log-rank over parallel arrays sorted by ascending time.
///
/// The numerator is accumulated for both groups and halved, `(U_a - U_b) / 2`,
/// so swapping the groups negates `z` bit for bit.
pub(crate) fn logrank_sorted(times: &[f64], events: &[bool], in_a: &[bool]) -> LogRankResult {
    debug_assert!(times.len() == events.len() && times.len() == in_a.len());
    let mut n = times.len() as f64;
    let mut n_a = in_a.iter().filter(|&&a| a).count() as f64;

    let (mut u_a, mut u_b) = (0.0, 0.0);
    let (mut observed_a, mut expected_a, mut variance) = (0.0, 0.0, 0.0);

    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let (mut d, mut d_a, mut c, mut c_a) = (0.0, 0.0, 0.0, 0.0);
        while i < times.len() && times[i] == t {
            c += 1.0;
            if in_a[i] {
                c_a += 1.0;
            }
            if events[i] {
                d += 1.0;
                if in_a[i] {
                    d_a += 1.0;
                }
            }
            i += 1;
        }
        if d > 0.0 {
            let n_b = n - n_a;
            let e_a = d * n_a / n;
            u_a += d_a - e_a;
            u_b += (d - d_a) - d * n_b / n;
            observed_a += d_a;
            expected_a += e_a;
            if n > 1.0 {
                variance += d * n_a * n_b * (n - d) / (n * n * (n - 1.0));
            }
        }
        n -= c;
        n_a -= c_a;
    }

    if variance > 0.0 {
        let z = 0.5 * (u_a - u_b) / variance.sqrt();
        LogRankResult {
            z,
            chi_sq: z * z,
            observed_a,
            expected_a,
            variance,
            degenerate: false,
        }
    } else {
        LogRankResult {
            z: 0.0,
            chi_sq: 0.0,
            observed_a,
            expected_a,
            variance: 0.0,
            degenerate: true,
        }
    }
}
