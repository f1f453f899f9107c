//! Independent numerical checks of the closed-form geometry: a brute-force
//! path minimizer, CAT(0) comparison triangles, and randomized sweeps.
//! Everything here works in double precision.

pub mod cat0;
pub mod oracle;
pub mod sampling;
pub mod sweeps;

pub use cat0::{cat0_check, cat0_sweep, field_cat0_check, field_cat0_sweep, Cat0Report, Cat0Sample, FieldCat0Report};
pub use oracle::{brute_force_distance, brute_force_field_distance, brute_force_path, OracleConfig, OraclePath};
pub use sweeps::{
    bounds_sweep, continuity_sweep, field_coherence_sweep, exp_log_sweep, geodesic_sweep, oracle_corpus, oracle_sweep, threshold_sweep,
    volume_law_sweep, BoundsReport, ContinuityReport, CorpusPair, ExpLogReport, FieldCoherenceReport, GeodesicReport, OracleReport,
    ThresholdReport, VolumeReport,
};
