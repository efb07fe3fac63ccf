//! Standalone verifiers: the continuation lemma, smallness conditions,
//! property P on rectangles, invariant disk modes and limit-set trends.

pub mod bessel;
pub mod botsenyuk;
pub mod conditions;
pub mod disk;
pub mod lasalle;
pub mod property_p;

pub use bessel::{
    bessel_j0, bessel_j0_zero, bessel_j1, bessel_j1_zero, j1_zero_table_csv, MAX_ZERO_INDEX,
};
pub use botsenyuk::{botsenyuk_check, BotsenyukInput, BotsenyukReport, BotsenyukStatus};
pub use conditions::{
    condition_regularity, condition_stability, RegularityReport, StabilityReport,
};
pub use disk::{disk_mode_residual, DiskModeReport, DiskModeSpec};
pub use lasalle::{lasalle_report, LasalleOptions, LasalleReport};
pub use property_p::{property_p_scan, PropertyPReport};
