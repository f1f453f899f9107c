use crate::error::{GeoError, Result};
use crate::scalar::Scalar;
use crate::spd::{sym_eigen, SpdTensor, SymTensor};

/// A point of the completed fiber: a positive-definite tensor, or the single
/// cone point `[0]` into which every degenerate tensor collapses.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberPoint<T> {
    Spd(SpdTensor<T>),
    Cone { dim: usize },
}

/// Result of turning a raw symmetric tensor into a [`FiberPoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub point: FiberPoint<T>,
    /// Set when a nonzero positive-semidefinite tensor was mapped to the cone
    /// point (as opposed to the tensor being exactly zero).
    pub collapsed: bool,
}

impl<T: Scalar> FiberPoint<T> {
    pub fn cone(dim: usize) -> Self {
        FiberPoint::Cone { dim }
    }

    /// Strict constructor: the tensor must pass the default positivity test.
    pub fn spd(s: SymTensor<T>) -> Result<Self> {
        Ok(FiberPoint::Spd(SpdTensor::new(s)?))
    }

    /// Ingests an arbitrary symmetric tensor at the given relative positivity
    /// tolerance. Positive-definite tensors stay as they are; the zero tensor
    /// and every other positive-semidefinite tensor become the cone point;
    /// indefinite tensors are rejected.
    pub fn ingest(s: SymTensor<T>, tol: T) -> Result<Ingested<T>> {
        let dim = s.dim();
        let eigen = sym_eigen(&s)?;
        let (lo, hi) = (eigen.min_value(), eigen.max_value());
        if hi == T::zero() && lo == T::zero() {
            return Ok(Ingested {
                point: FiberPoint::cone(dim),
                collapsed: false,
            });
        }
        if hi > T::zero() && lo > tol * hi {
            return Ok(Ingested {
                point: FiberPoint::Spd(SpdTensor::with_tolerance(s, tol)?),
                collapsed: false,
            });
        }
        // semidefinite up to the tolerance: lies on the boundary
        if hi > T::zero() && lo >= -tol.max(T::epsilon()) * hi {
            return Ok(Ingested {
                point: FiberPoint::cone(dim),
                collapsed: true,
            });
        }
        Err(GeoError::NotPositiveDefinite {
            min_eigenvalue: lo.to_f64_lossy(),
            max_eigenvalue: hi.to_f64_lossy(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FiberPoint::Spd(a) => a.dim(),
            FiberPoint::Cone { dim } => *dim,
        }
    }

    pub fn is_cone(&self) -> bool {
        matches!(self, FiberPoint::Cone { .. })
    }

    pub fn as_spd(&self) -> Option<&SpdTensor<T>> {
        match self {
            FiberPoint::Spd(a) => Some(a),
            FiberPoint::Cone { .. } => None,
        }
    }

    /// `⁴√det A`, zero at the cone point.
    pub fn fourth_root_det(&self) -> T {
        match self {
            FiberPoint::Spd(a) => a.fourth_root_det(),
            FiberPoint::Cone { .. } => T::zero(),
        }
    }

    /// Matrix representative; the cone point is represented by the zero tensor.
    pub fn to_matrix(&self) -> SymTensor<T> {
        match self {
            FiberPoint::Spd(a) => a.as_sym().clone(),
            FiberPoint::Cone { dim } => SymTensor::zeros(*dim),
        }
    }
}

impl<T: Scalar> From<SpdTensor<T>> for FiberPoint<T> {
    fn from(a: SpdTensor<T>) -> Self {
        FiberPoint::Spd(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_classifies() {
        let tol = 1e-12;
        let spd = FiberPoint::ingest(SymTensor::<f64>::identity(2), tol).unwrap();
        assert!(!spd.point.is_cone());
        assert!(!spd.collapsed);

        let zero = FiberPoint::ingest(SymTensor::<f64>::zeros(2), tol).unwrap();
        assert!(zero.point.is_cone());
        assert!(!zero.collapsed);

        let rank_one = FiberPoint::ingest(SymTensor::diag(&[1.0, 0.0]), tol).unwrap();
        assert!(rank_one.point.is_cone());
        assert!(rank_one.collapsed);

        let tiny = FiberPoint::ingest(SymTensor::diag(&[1.0, 1e-14]), tol).unwrap();
        assert!(tiny.point.is_cone() && tiny.collapsed);

        assert!(FiberPoint::ingest(SymTensor::diag(&[1.0, -0.5]), tol).is_err());
        assert!(FiberPoint::ingest(SymTensor::diag(&[-1.0, -0.5]), tol).is_err());
    }

    #[test]
    fn cone_has_zero_volume() {
        let c = FiberPoint::<f64>::cone(3);
        assert_eq!(c.fourth_root_det(), 0.0);
        assert_eq!(c.to_matrix(), SymTensor::zeros(3));
        assert_eq!(c.dim(), 3);
    }
}
