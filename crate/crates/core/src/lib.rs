//! Distances and minimal paths in the metric completion of the space of
//! Riemannian metrics under the L² metric, for tensor fields sampled on a
//! weighted grid.
//!
//! Tensors are stored in a frame where the reference metric is the
//! identity, so determinants and traces are taken of the stored entries.

// comparisons written as `!(x > 0)` are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fiber;
pub mod field;
pub mod scalar;
pub mod spd;
pub mod verification;

pub use error::{GeoError, Result};
pub use field::{FieldGeodesic, FieldPath, MetricField, Sample, SampleGrid};
pub use fiber::{CaseTag, FiberGeodesic, FiberPoint, GeodesicCase, SampledPath};
pub use scalar::Scalar;
pub use spd::{EigenSystem, SpdTensor, SquareMatrix, SymTensor};

pub type SymTensorF64 = SymTensor<f64>;
pub type SymTensorF32 = SymTensor<f32>;
pub type SpdTensorF64 = SpdTensor<f64>;
pub type SpdTensorF32 = SpdTensor<f32>;
pub type FiberPointF64 = FiberPoint<f64>;
pub type FiberPointF32 = FiberPoint<f32>;
pub type SampleGridF64 = SampleGrid<f64>;
pub type MetricFieldF64 = MetricField<f64>;
pub type MetricFieldF32 = MetricField<f32>;
