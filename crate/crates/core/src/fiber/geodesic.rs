//! Closed-form geometry of a single fiber: exponential map, its inverse,
//! distance, and the unique minimal path between two points of the
//! completed fiber (including paths through the cone point).
//!
//! Internally everything is computed in coordinates whitened by the start
//! point `a0`, where `tr_{a0}` becomes the ordinary trace and
//! `a0·exp(a0⁻¹k) = a0^{1/2}·exp(a0^{-1/2} k a0^{-1/2})·a0^{1/2}`.

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::fiber::point::FiberPoint;
use crate::scalar::Scalar;
use crate::spd::{sym_eigen, traceless_split, EigenSystem, SpdTensor, SymTensor};

/// `(4π)²/n`: geodesics exist from `a0` exactly to the points whose
/// log-coordinates have `tr_{a0}(k_T²)` strictly below this value.
pub fn cone_threshold<T: Scalar>(dim: usize) -> T {
    let four_pi = T::lit(4.0) * T::PI();
    four_pi * four_pi / T::from_usize_lossy(dim)
}

/// `4/√n`, the constant relating `⁴√det` to distances from the cone point.
pub fn cone_scale<T: Scalar>(dim: usize) -> T {
    T::lit(4.0) / T::from_usize_lossy(dim).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    Riemannian,
    ConeConcatenation,
    FromCone,
    ToCone,
    BothCone,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Riemannian => "riemannian",
            CaseTag::ConeConcatenation => "cone_concatenation",
            CaseTag::FromCone => "from_cone",
            CaseTag::ToCone => "to_cone",
            CaseTag::BothCone => "both_cone",
        }
    }

    /// True when the minimal path passes through (or ends at) the cone point.
    pub fn touches_cone(self) -> bool {
        !matches!(self, CaseTag::Riemannian)
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which kind of minimal path joins two fiber points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicCase<T> {
    pub tag: CaseTag,
    /// `k` with `a1 = a0·exp(a0⁻¹k)`, when both endpoints are SPD.
    pub log_coords: Option<SymTensor<T>>,
    /// `tr_{a0}(k_T²)`, when both endpoints are SPD.
    pub traceless_norm_sq: Option<T>,
    /// Parameter at which a cone concatenation reaches `[0]`.
    pub switch_time: Option<T>,
}

/// Log-coordinates of `a1` relative to `a0`, in whitened form.
struct WhitenedLog<T> {
    /// `log(a0^{-1/2} a1 a0^{-1/2})`
    log: SymTensor<T>,
    /// `tr_{a0} k`
    trace: T,
    /// whitened traceless part
    traceless: SymTensor<T>,
    /// `tr_{a0}(k_T²)`
    traceless_norm_sq: T,
}

fn check_dims(d0: usize, d1: usize) -> Result<()> {
    if d0 != d1 {
        return Err(GeoError::invalid(format!("dimension mismatch: {d0} vs {d1}")));
    }
    Ok(())
}

fn whitened_log<T: Scalar>(a0: &SpdTensor<T>, a1: &SpdTensor<T>) -> Result<WhitenedLog<T>> {
    check_dims(a0.dim(), a1.dim())?;
    let n = a0.dim();
    let relative = SpdTensor::from_computed(a0.whiten(a1.as_sym()))?;
    let log = relative.log();
    let trace = log.trace();
    let traceless = &log - &SymTensor::scaled_identity(n, trace / T::from_usize_lossy(n));
    let traceless_norm_sq = traceless.frobenius_dot(&traceless);
    Ok(WhitenedLog {
        log,
        trace,
        traceless,
        traceless_norm_sq,
    })
}

/// `k` with `a1 = a0·exp(a0⁻¹k)`.
pub fn log_coords<T: Scalar>(a0: &SpdTensor<T>, a1: &SpdTensor<T>) -> Result<SymTensor<T>> {
    Ok(a0.unwhiten(&whitened_log(a0, a1)?.log))
}

/// The `q(t)`, `r(t)` of the geodesic with initial velocity `b`:
/// `q = 1 + (t/4)·tr_{a0} b`, `r = (t/4)·√(n·tr_{a0}(b_T²))`.
/// Along that geodesic `√det A_t = (q² + r²)·√det A_0`.
pub fn exp_qr<T: Scalar>(a0: &SpdTensor<T>, b: &SymTensor<T>, t: T) -> Result<(T, T)> {
    let (trace, bt) = traceless_split(a0, b)?;
    let n = T::from_usize_lossy(a0.dim());
    let wt = a0.whiten(&bt);
    let quarter = t / T::lit(4.0);
    Ok((
        T::one() + quarter * trace,
        quarter * (n * wt.frobenius_dot(&wt)).sqrt(),
    ))
}

/// Riemannian exponential map: the point at parameter `t` on the geodesic
/// leaving `a0` with velocity `b`.
///
/// A pure-trace velocity with negative trace runs straight into the cone
/// point at `t0 = −4/tr_{a0} b`; the geodesic is undefined beyond it.
pub fn exp_map<T: Scalar>(a0: &SpdTensor<T>, b: &SymTensor<T>, t: T) -> Result<FiberPoint<T>> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(GeoError::invalid("exp_map requires finite t >= 0"));
    }
    let n = a0.dim();
    let nf = T::from_usize_lossy(n);
    let (trace, bt) = traceless_split(a0, b)?;
    let wt = a0.whiten(&bt);
    let bt_sq = wt.frobenius_dot(&wt);
    let q = T::one() + t / T::lit(4.0) * trace;

    let pure_trace = bt_sq == T::zero() || bt_sq <= T::epsilon() * T::epsilon() * trace * trace / nf;
    if pure_trace {
        if trace < T::zero() {
            let t0 = -T::lit(4.0) / trace;
            if t > t0 {
                return Err(GeoError::OutOfDomain {
                    t: t.to_f64_lossy(),
                    t_max: t0.to_f64_lossy(),
                });
            }
            if t == t0 || q <= T::zero() {
                return Ok(FiberPoint::cone(n));
            }
        }
        let factor = q.powf(T::lit(4.0) / nf);
        return Ok(if factor > T::zero() {
            FiberPoint::Spd(a0.scaled(factor))
        } else {
            FiberPoint::cone(n)
        });
    }

    let rho = (nf * bt_sq).sqrt() / T::lit(4.0);
    let r = t * rho;
    let s2 = q * q + r * r;
    if !(s2 > T::zero()) {
        return Ok(FiberPoint::cone(n));
    }
    // atan2 realizes the branch rule: values in [0, π), π/2 where q = 0
    let angle = r.atan2(q);
    let exponent = wt.scale(angle / rho);
    let rotation = sym_eigen(&exponent)?.map(|v| v.exp());
    let factor = s2.powf(T::lit(2.0) / nf);
    let value = a0.unwhiten(&rotation).scale(factor);
    Ok(FiberPoint::Spd(SpdTensor::from_computed(value)?))
}

/// Inverse of the exponential map at `a0`, defined exactly on the pairs
/// classified [`CaseTag::Riemannian`].
pub fn inv_exp<T: Scalar>(a0: &SpdTensor<T>, a1: &SpdTensor<T>) -> Result<SymTensor<T>> {
    let log = whitened_log(a0, a1)?;
    let n = a0.dim();
    let threshold = cone_threshold::<T>(n);
    if !(log.traceless_norm_sq < threshold) {
        return Err(GeoError::NotInExpImage {
            traceless_norm_sq: log.traceless_norm_sq.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    let nf = T::from_usize_lossy(n);
    let theta = (nf * log.traceless_norm_sq).sqrt() / T::lit(4.0);
    let growth = (log.trace / T::lit(4.0)).exp();
    // 4/√(n tr k_T²) · sin θ = sin θ / θ; the b_T = 0 branch is its limit
    let sinc = if theta == T::zero() { T::one() } else { theta.sin() / theta };
    let trace_coef = T::lit(4.0) / nf * (growth * theta.cos() - T::one());
    let whitened = &SymTensor::scaled_identity(n, trace_coef) + &log.traceless.scale(growth * sinc);
    Ok(a0.unwhiten(&whitened))
}

pub fn classify<T: Scalar>(p0: &FiberPoint<T>, p1: &FiberPoint<T>) -> Result<GeodesicCase<T>> {
    check_dims(p0.dim(), p1.dim())?;
    let cone_case = |tag| GeodesicCase {
        tag,
        log_coords: None,
        traceless_norm_sq: None,
        switch_time: None,
    };
    match (p0, p1) {
        (FiberPoint::Cone { .. }, FiberPoint::Cone { .. }) => Ok(cone_case(CaseTag::BothCone)),
        (FiberPoint::Cone { .. }, FiberPoint::Spd(_)) => Ok(cone_case(CaseTag::FromCone)),
        (FiberPoint::Spd(_), FiberPoint::Cone { .. }) => Ok(cone_case(CaseTag::ToCone)),
        (FiberPoint::Spd(a0), FiberPoint::Spd(a1)) => {
            let log = whitened_log(a0, a1)?;
            let riemannian = log.traceless_norm_sq < cone_threshold::<T>(a0.dim());
            let switch_time = if riemannian {
                None
            } else {
                let (f0, f1) = (a0.fourth_root_det(), a1.fourth_root_det());
                Some(f0 / (f0 + f1))
            };
            Ok(GeodesicCase {
                tag: if riemannian {
                    CaseTag::Riemannian
                } else {
                    CaseTag::ConeConcatenation
                },
                log_coords: Some(a0.unwhiten(&log.log)),
                traceless_norm_sq: Some(log.traceless_norm_sq),
                switch_time,
            })
        }
    }
}

/// Distance in the completed fiber.
pub fn fiber_distance<T: Scalar>(p0: &FiberPoint<T>, p1: &FiberPoint<T>) -> Result<T> {
    check_dims(p0.dim(), p1.dim())?;
    let n = p0.dim();
    let c = cone_scale::<T>(n);
    match (p0, p1) {
        (FiberPoint::Cone { .. }, FiberPoint::Cone { .. }) => Ok(T::zero()),
        (FiberPoint::Cone { .. }, FiberPoint::Spd(a)) | (FiberPoint::Spd(a), FiberPoint::Cone { .. }) => {
            Ok(c * a.fourth_root_det())
        }
        (FiberPoint::Spd(a0), FiberPoint::Spd(a1)) => {
            if a0.as_sym() == a1.as_sym() {
                return Ok(T::zero());
            }
            let log = whitened_log(a0, a1)?;
            Ok(distance_from_log(n, a0, a1, &log))
        }
    }
}

fn distance_from_log<T: Scalar>(n: usize, a0: &SpdTensor<T>, a1: &SpdTensor<T>, log: &WhitenedLog<T>) -> T {
    let c = cone_scale::<T>(n);
    let (f0, f1) = (a0.fourth_root_det(), a1.fourth_root_det());
    if log.traceless_norm_sq < cone_threshold::<T>(n) {
        let theta = (T::from_usize_lossy(n) * log.traceless_norm_sq).sqrt() / T::lit(4.0);
        // √A0 − 2·⁴√A0·⁴√A1·cos θ + √A1, written without cancellation
        let half = (theta / T::lit(2.0)).sin();
        let diff = f1 - f0;
        c * (diff * diff + T::lit(4.0) * f0 * f1 * half * half).sqrt()
    } else {
        c * (f0 + f1)
    }
}

#[derive(Debug, Clone)]
enum Shape<T> {
    Riemannian {
        a0: SpdTensor<T>,
        traceless: EigenSystem<T>,
        theta: T,
        growth: T,
    },
    Cone {
        switch_time: T,
    },
    Stationary,
}

/// The unique minimal path between two fiber points, parametrized
/// proportionally to arc length on `[0, 1]`. Construction does the
/// classification and logarithm once; [`FiberGeodesic::at`] is cheap.
#[derive(Debug, Clone)]
pub struct FiberGeodesic<T> {
    start: FiberPoint<T>,
    end: FiberPoint<T>,
    case: GeodesicCase<T>,
    distance: T,
    shape: Shape<T>,
}

impl<T: Scalar> FiberGeodesic<T> {
    pub fn new(start: FiberPoint<T>, end: FiberPoint<T>) -> Result<Self> {
        let case = classify(&start, &end)?;
        let distance = fiber_distance(&start, &end)?;
        let n = start.dim();
        let shape = match (&case.tag, &start, &end) {
            (CaseTag::Riemannian, FiberPoint::Spd(a0), FiberPoint::Spd(a1)) => {
                let log = whitened_log(a0, a1)?;
                if log.log.max_abs() == T::zero() {
                    Shape::Stationary
                } else {
                    Shape::Riemannian {
                        a0: a0.clone(),
                        traceless: sym_eigen(&log.traceless)?,
                        theta: (T::from_usize_lossy(n) * log.traceless_norm_sq).sqrt() / T::lit(4.0),
                        growth: (log.trace / T::lit(4.0)).exp(),
                    }
                }
            }
            (CaseTag::ConeConcatenation, ..) => Shape::Cone {
                switch_time: case.switch_time.expect("cone case carries its switch time"),
            },
            (CaseTag::FromCone, ..) => Shape::Cone {
                switch_time: T::zero(),
            },
            (CaseTag::ToCone, ..) => Shape::Cone {
                switch_time: T::one(),
            },
            _ => Shape::Stationary,
        };
        Ok(Self {
            start,
            end,
            case,
            distance,
            shape,
        })
    }

    pub fn start(&self) -> &FiberPoint<T> {
        &self.start
    }

    pub fn end(&self) -> &FiberPoint<T> {
        &self.end
    }

    pub fn case(&self) -> &GeodesicCase<T> {
        &self.case
    }

    /// Length of the path, equal to the fiber distance of its endpoints.
    pub fn length(&self) -> T {
        self.distance
    }

    /// Parameter at which the path sits at the cone point, if it ever does.
    pub fn cone_time(&self) -> Option<T> {
        match (&self.shape, self.case.tag) {
            (Shape::Cone { switch_time }, _) => Some(*switch_time),
            (_, CaseTag::BothCone) => Some(T::zero()),
            _ => None,
        }
    }

    pub fn at(&self, t: T) -> Result<FiberPoint<T>> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(GeoError::invalid(format!(
                "geodesic parameter must lie in [0, 1], got {t}"
            )));
        }
        if t == T::zero() {
            return Ok(self.start.clone());
        }
        if t == T::one() {
            return Ok(self.end.clone());
        }
        let n = self.start.dim();
        let nf = T::from_usize_lossy(n);
        match &self.shape {
            Shape::Stationary => Ok(self.start.clone()),
            Shape::Cone { switch_time } => {
                let ts = *switch_time;
                let (anchor, s) = if t < ts {
                    (&self.start, T::one() - t / ts)
                } else if t > ts {
                    (&self.end, (t - ts) / (T::one() - ts))
                } else {
                    return Ok(FiberPoint::cone(n));
                };
                let factor = s.powf(T::lit(4.0) / nf);
                match anchor {
                    FiberPoint::Spd(a) if factor > T::zero() => Ok(FiberPoint::Spd(a.scaled(factor))),
                    _ => Ok(FiberPoint::cone(n)),
                }
            }
            Shape::Riemannian {
                a0,
                traceless,
                theta,
                growth,
            } => {
                let q = (T::one() - t) + t * *growth * theta.cos();
                let r = t * *growth * theta.sin();
                let s2 = q * q + r * r;
                if !(s2 > T::zero()) {
                    return Ok(FiberPoint::cone(n));
                }
                let coef = if *theta > T::zero() {
                    r.atan2(q) / *theta
                } else {
                    t * *growth / q
                };
                let rotation = traceless.map(|v| (coef * v).exp());
                let value = a0.unwhiten(&rotation).scale(s2.powf(T::lit(2.0) / nf));
                Ok(FiberPoint::Spd(SpdTensor::from_computed(value)?))
            }
        }
    }
}

/// Point at parameter `t ∈ [0, 1]` on the minimal path from `p0` to `p1`.
pub fn fiber_geodesic<T: Scalar>(p0: &FiberPoint<T>, p1: &FiberPoint<T>, t: T) -> Result<FiberPoint<T>> {
    FiberGeodesic::new(p0.clone(), p1.clone())?.at(t)
}
