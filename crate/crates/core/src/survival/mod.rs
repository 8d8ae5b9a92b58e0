//! Censored-time primitives.

mod concordance;
mod curve;
mod km;
mod logrank;
mod record;

pub use concordance::concordance_index;
pub use curve::{curve_diff, median_survival, rmst, union_grid, DifferenceCurve, SurvivalCurve};
pub use km::km_estimate;
pub use logrank::{logrank, LogRankResult};
pub use record::{count_events, max_event_time, split_by_arm, validate_records, Arm, SurvivalRecord};

pub(crate) use concordance::concordance_from_parts;
pub(crate) use km::km_sorted;
pub(crate) use logrank::logrank_sorted;
