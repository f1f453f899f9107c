use crate::error::{GeoError, Result};
use crate::fiber::geodesic::{cone_scale, fiber_distance, inv_exp, FiberGeodesic};
use crate::fiber::point::FiberPoint;
use crate::scalar::Scalar;
use crate::spd::{fiber_inner, SymTensor};

/// Widest finite-difference stencil used for speed estimates.
const MAX_STENCIL: usize = 7;

/// A path in the completed fiber known only at finitely many times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath<T> {
    times: Vec<T>,
    points: Vec<FiberPoint<T>>,
}

impl<T: Scalar> SampledPath<T> {
    pub fn new(times: Vec<T>, points: Vec<FiberPoint<T>>) -> Result<Self> {
        validate_times(&times)?;
        if times.len() != points.len() {
            return Err(GeoError::invalid(format!(
                "{} times but {} points",
                times.len(),
                points.len()
            )));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(GeoError::invalid("path points have mixed dimensions"));
        }
        Ok(Self { times, points })
    }

    /// Samples `g` at `samples` uniform times, plus the time at which it
    /// visits the cone point (if any) so that no interval straddles `[0]`.
    pub fn from_geodesic(g: &FiberGeodesic<T>, samples: usize) -> Result<Self> {
        let times = sample_times(samples, g.cone_time())?;
        let points = times.iter().map(|&t| g.at(t)).collect::<Result<Vec<_>>>()?;
        Self::new(times, points)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn points(&self) -> &[FiberPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

pub(crate) fn validate_times<T: Scalar>(times: &[T]) -> Result<()> {
    if times.len() < 2 {
        return Err(GeoError::invalid("a sampled path needs at least two samples"));
    }
    if times[0] != T::zero() || times[times.len() - 1] != T::one() {
        return Err(GeoError::invalid("sample times must start at 0 and end at 1"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(GeoError::invalid("sample times must be strictly increasing"));
    }
    Ok(())
}

/// `samples` uniform times on `[0, 1]`, with `extra` merged in when it is
/// strictly inside and not already a grid time.
pub fn sample_times<T: Scalar>(samples: usize, extra: Option<T>) -> Result<Vec<T>> {
    if samples < 2 {
        return Err(GeoError::invalid("at least two time samples are required"));
    }
    let last = T::from_usize_lossy(samples - 1);
    let mut times: Vec<T> = (0..samples)
        .map(|k| {
            if k == samples - 1 {
                T::one()
            } else {
                T::from_usize_lossy(k) / last
            }
        })
        .collect();
    if let Some(e) = extra {
        if e > T::zero() && e < T::one() && !times.contains(&e) {
            let at = times.partition_point(|&t| t < e);
            times.insert(at, e);
        }
    }
    Ok(times)
}

/// Weights `w` with `f'(x0) ≈ Σ w_j f(x_j)`, exact for polynomials of degree
/// below `nodes.len()` (Fornberg's recursion).
pub(crate) fn derivative_weights<T: Scalar>(x0: T, nodes: &[T]) -> Vec<T> {
    let m = nodes.len();
    // c[j][d]: weight of node j for derivative order d, d ∈ {0, 1}
    let mut c = vec![[T::zero(); 2]; m];
    c[0][0] = T::one();
    let mut c1 = T::one();
    let mut c4 = nodes[0] - x0;
    for i in 1..m {
        let mut c2 = T::one();
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 = c2 * c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// Finite-difference speed `‖ȧ(t_k)‖_{a_k}` at every sample of an SPD run
/// `lo..=hi`.
///
/// Neighbors are first mapped into the tangent space at `a_k` by the
/// inverse exponential, so the differences are taken in normal coordinates.
/// There a geodesic is a straight line, cone rays included, and the stencil
/// is insensitive to the conditioning of `a_k`. If some neighbor is beyond
/// the threshold as seen from `a_k`, the stencil falls back to raw matrix
/// entries.
fn run_speeds<T: Scalar>(path: &SampledPath<T>, lo: usize, hi: usize) -> Result<Vec<T>> {
    let run = hi - lo + 1;
    let width = run.min(MAX_STENCIL);
    let dim = path.dim();
    (lo..=hi)
        .map(|k| {
            let start = k.saturating_sub(width / 2).clamp(lo, hi + 1 - width);
            let nodes = &path.times[start..start + width];
            let weights = derivative_weights(path.times[k], nodes);
            let a = path.points[k].as_spd().expect("runs contain SPD samples");
            let neighbor = |j: usize| path.points[start + j].as_spd().expect("runs contain SPD samples");
            let normal: Result<Vec<SymTensor<T>>> = (0..width)
                .map(|j| {
                    if start + j == k {
                        Ok(SymTensor::zeros(dim))
                    } else {
                        inv_exp(a, neighbor(j))
                    }
                })
                .collect();
            let offsets = match normal {
                Ok(v) => v,
                Err(GeoError::NotInExpImage { .. }) => (0..width).map(|j| neighbor(j).as_sym() - a.as_sym()).collect(),
                Err(e) => return Err(e),
            };
            // weights sum to zero, so a zero offset at a_k keeps constant
            // stretches exactly stationary
            let mut velocity = SymTensor::zeros(dim);
            for (w, d) in weights.into_iter().zip(&offsets) {
                velocity = &velocity + &d.scale(w);
            }
            Ok(fiber_inner(a, &velocity, &velocity)?.max(T::zero()).sqrt())
        })
        .collect()
}

/// Length of each interval `[t_k, t_{k+1}]`.
///
/// Between SPD samples this is the trapezoidal integral of the
/// finite-difference speed, differenced in normal coordinates at each
/// sample. An interval ending at the cone point is taken to be the straight ray to `[0]`, whose length is exactly the distance
/// `(4/√n)·⁴√det` of the other endpoint.
pub fn interval_lengths<T: Scalar>(path: &SampledPath<T>) -> Result<Vec<T>> {
    let m = path.len();
    let mut speeds: Vec<Option<T>> = vec![None; m];
    let mut k = 0;
    while k < m {
        if path.points[k].is_cone() {
            k += 1;
            continue;
        }
        let lo = k;
        while k + 1 < m && !path.points[k + 1].is_cone() {
            k += 1;
        }
        if k > lo {
            for (offset, v) in run_speeds(path, lo, k)?.into_iter().enumerate() {
                speeds[lo + offset] = Some(v);
            }
        }
        k += 1;
    }
    let c = cone_scale::<T>(path.dim());
    let half = T::lit(0.5);
    Ok((0..m - 1)
        .map(|k| match (speeds[k], speeds[k + 1]) {
            (Some(v0), Some(v1)) => half * (v0 + v1) * (path.times[k + 1] - path.times[k]),
            _ => c * (path.points[k].fourth_root_det() - path.points[k + 1].fourth_root_det()).abs(),
        })
        .collect())
}

/// Quadrature length of a sampled path.
pub fn path_length<T: Scalar>(path: &SampledPath<T>) -> Result<T> {
    Ok(interval_lengths(path)?.into_iter().fold(T::zero(), |acc, l| acc + l))
}

/// `Σ d(p_k, p_{k+1})`, a lower bound for the length of any path through
/// the samples.
pub fn chord_distance_sum<T: Scalar>(path: &SampledPath<T>) -> Result<T> {
    path.points
        .windows(2)
        .try_fold(T::zero(), |acc, w| Ok(acc + fiber_distance(&w[0], &w[1])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{sym_exp, SpdTensor};
    use approx::assert_relative_eq;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn uniform(samples: usize) -> Vec<f64> {
        sample_times(samples, None).unwrap()
    }

    #[test]
    fn fornberg_weights_are_exact_on_polynomials() {
        let nodes = [0.0, 0.1, 0.25, 0.3, 0.55];
        let w = derivative_weights(0.25, &nodes);
        let p = |x: f64| 3.0 * x.powi(4) - x.powi(3) + 2.0 * x - 1.0;
        let dp = |x: f64| 12.0 * x.powi(3) - 3.0 * x.powi(2) + 2.0;
        let approx: f64 = nodes.iter().zip(&w).map(|(x, w)| w * p(*x)).sum();
        assert_relative_eq!(approx, dp(0.25), epsilon = 1e-10);
        // two-point stencil is the forward difference
        let w = derivative_weights(0.0, &[0.0, 0.5]);
        assert_relative_eq!(w[0], -2.0);
        assert_relative_eq!(w[1], 2.0);
    }

    #[test]
    fn sample_times_inserts_breakpoints() {
        let t = sample_times(5, Some(0.3)).unwrap();
        assert_eq!(t, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
        assert_eq!(sample_times(5, Some(0.5)).unwrap().len(), 5);
        assert_eq!(sample_times(5, Some(1.0)).unwrap().len(), 5);
        assert!(sample_times::<f64>(1, None).is_err());
    }

    #[test]
    fn rejects_bad_times() {
        let p = FiberPoint::<f64>::Spd(SpdTensor::identity(2));
        assert!(SampledPath::new(vec![0.0, 0.5, 0.4, 1.0], vec![p.clone(); 4]).is_err());
        assert!(SampledPath::new(vec![0.0, 0.5, 0.5, 1.0], vec![p.clone(); 4]).is_err());
        assert!(SampledPath::new(vec![0.1, 1.0], vec![p.clone(); 2]).is_err());
        assert!(SampledPath::new(vec![0.0, 1.0], vec![p.clone(); 3]).is_err());
        assert!(SampledPath::new(vec![0.0], vec![p]).is_err());
    }

    #[test]
    fn constant_path_has_zero_length() {
        let p = FiberPoint::<f64>::Spd(SpdTensor::identity(3));
        let path = SampledPath::new(uniform(9), vec![p; 9]).unwrap();
        assert_eq!(path_length(&path).unwrap(), 0.0);
        let cones = SampledPath::new(uniform(3), vec![FiberPoint::<f64>::cone(2); 3]).unwrap();
        assert_eq!(path_length(&cones).unwrap(), 0.0);
    }

    #[test]
    fn conformal_geodesic_length() {
        let i = FiberPoint::Spd(SpdTensor::identity(2));
        let four = FiberPoint::spd(SymTensor::scaled_identity(2, 4.0)).unwrap();
        let g = FiberGeodesic::new(i, four).unwrap();
        let path = SampledPath::from_geodesic(&g, 65).unwrap();
        assert_relative_eq!(path_length(&path).unwrap(), 2.0 * SQRT2, max_relative = 1e-6);
    }

    #[test]
    fn cone_geodesic_length() {
        let i = FiberPoint::Spd(SpdTensor::identity(2));
        let far = FiberPoint::Spd(sym_exp(&SymTensor::diag(&[10.0, -10.0])).unwrap());
        let g = FiberGeodesic::new(i, far).unwrap();
        let path = SampledPath::from_geodesic(&g, 65).unwrap();
        assert_relative_eq!(path_length(&path).unwrap(), 4.0 * SQRT2, max_relative = 1e-6);
        assert_relative_eq!(chord_distance_sum(&path).unwrap(), 4.0 * SQRT2, max_relative = 1e-10);
    }

    #[test]
    fn entrywise_chord_is_longer_than_cone_path() {
        let a0 = SymTensor::<f64>::identity(2);
        let a1 = sym_exp(&SymTensor::diag(&[10.0, -10.0])).unwrap().into_sym();
        let times = uniform(257);
        let points = times
            .iter()
            .map(|&t| FiberPoint::spd(&a0.scale(1.0 - t) + &a1.scale(t)).unwrap())
            .collect();
        let path = SampledPath::new(times, points).unwrap();
        let length = path_length(&path).unwrap();
        assert!(length > 4.0 * SQRT2, "chord length {length}");
    }
}
