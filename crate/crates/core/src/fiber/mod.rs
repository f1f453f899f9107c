//! Geometry of a single fiber: positive-definite tensors at one point,
//! completed by the cone point.

mod geodesic;
mod path;
mod point;

pub use geodesic::{
    classify, cone_scale, cone_threshold, exp_map, exp_qr, fiber_distance, fiber_geodesic, inv_exp, log_coords,
    CaseTag, FiberGeodesic, GeodesicCase,
};
pub use path::{chord_distance_sum, interval_lengths, path_length, sample_times, SampledPath};
pub(crate) use path::{derivative_weights, validate_times};
pub use point::{FiberPoint, Ingested};
