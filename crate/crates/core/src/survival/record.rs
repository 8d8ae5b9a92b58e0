use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm. `T0` is the reference arm; no clinical meaning is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Arm {
    T0,
    T1,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::T0, Arm::T1];

    pub fn index(self) -> usize {
        match self {
            Arm::T0 => 0,
            Arm::T1 => 1,
        }
    }
}

impl From<Arm> for u8 {
    fn from(arm: Arm) -> u8 {
        arm.index() as u8
    }
}

impl TryFrom<u8> for Arm {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Arm::T0),
            1 => Ok(Arm::T1),
            other => Err(format!("treatment must be 0 or 1, got {other}")),
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One patient: observed time in days, event flag, arm and covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub id: String,
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub treatment: Arm,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(
        id: impl Into<String>,
        time: f64,
        event: bool,
        treatment: Arm,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        let record = SurvivalRecord {
            id: id.into(),
            time,
            event,
            treatment,
            covariates,
        };
        record.check_time()?;
        Ok(record)
    }

    fn check_time(&self) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::Schema(format!(
                "record {}: time must be a finite nonnegative number, got {}",
                self.id, self.time
            )));
        }
        Ok(())
    }
}

/// Checks times and a shared covariate length; returns that length.
pub fn validate_records(records: &[SurvivalRecord]) -> Result<usize> {
    let first = records.first().ok_or(Error::EmptyCohort)?;
    let p = first.covariates.len();
    for r in records {
        r.check_time()?;
        if r.covariates.len() != p {
            return Err(Error::Schema(format!(
                "record {}: expected {p} covariates, got {}",
                r.id,
                r.covariates.len()
            )));
        }
    }
    Ok(p)
}

pub fn count_events(records: &[SurvivalRecord]) -> usize {
    records.iter().filter(|r| r.event).count()
}

pub fn split_by_arm(records: &[SurvivalRecord]) -> [Vec<SurvivalRecord>; 2] {
    let mut arms = [Vec::new(), Vec::new()];
    for r in records {
        arms[r.treatment.index()].push(r.clone());
    }
    arms
}

/// Largest observed event time, if any event exists.
pub fn max_event_time(records: &[SurvivalRecord]) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.event)
        .map(|r| r.time)
        .max_by(f64::total_cmp)
}
