//! Brute-force minimization of path length over piecewise-linear paths in
//! matrix entries.
//!
//! Nothing here uses the closed-form geometry or the eigen-solver: the
//! speed `√tr((a⁻¹ȧ)²)·det(a)^{1/4}` is integrated with an LU factorization
//! and tanh-sinh quadrature, and waypoints are kept positive semidefinite by
//! storing them as `L·Lᵀ`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::fiber::FiberPoint;
use crate::field::{weighted_l2, MetricField};
use crate::verification::sampling::trial_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    /// Points of the polygonal path, endpoints included.
    pub waypoints: usize,
    /// Half-width `m` of the tanh-sinh rule (`2m + 1` nodes per segment).
    pub quadrature_substeps: usize,
    /// Perturbations tried per restart, over all refinement levels.
    pub iterations: usize,
    pub restarts: usize,
    /// Initial perturbation size, relative to the waypoint scale.
    pub step_scale: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            waypoints: 33,
            quadrature_substeps: 16,
            iterations: 30_000,
            restarts: 2,
            step_scale: 0.5,
            seed: 0x5eed,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints < 3 {
            return Err(GeoError::invalid("oracle needs at least 3 waypoints"));
        }
        if self.quadrature_substeps < 8 {
            return Err(GeoError::invalid("oracle needs at least 8 quadrature substeps"));
        }
        if self.iterations == 0 || self.restarts == 0 {
            return Err(GeoError::invalid("oracle iterations and restarts must be positive"));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(GeoError::invalid("oracle step scale must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Best path found by the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePath {
    pub length: f64,
    /// Row-major waypoint matrices, endpoints included.
    pub waypoints: Vec<Vec<f64>>,
    /// Smallest `⁴√det` over the waypoints.
    pub min_fourth_root_det: f64,
    /// Length of the better of the two initial paths.
    pub initial_length: f64,
}

/// LU factorization with partial pivoting; `None` when singular.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn new(n: usize, a: &[f64]) -> Option<Self> {
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .expect("non-empty range");
            if lu[p * n + k] == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / lu[k * n + k];
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Some(Self { n, lu, perm, sign })
    }

    fn det(&self) -> f64 {
        (0..self.n).fold(self.sign, |acc, i| acc * self.lu[i * self.n + i])
    }

    /// `a⁻¹·b` for a row-major `b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n * n];
        for col in 0..n {
            let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i] * n + col]).collect();
            for i in 0..n {
                for j in 0..i {
                    y[i] -= self.lu[i * n + j] * y[j];
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    y[i] -= self.lu[i * n + j] * y[j];
                }
                y[i] /= self.lu[i * n + i];
            }
            for i in 0..n {
                x[i * n + col] = y[i];
            }
        }
        x
    }
}

/// Metric speed of the velocity `delta` at the point `a`; zero where `a`
/// is singular, matching the vanishing volume factor.
fn speed(n: usize, a: &[f64], delta: &[f64]) -> f64 {
    let Some(lu) = Lu::new(n, a) else {
        return 0.0;
    };
    let det = lu.det();
    if !(det > 0.0) {
        return 0.0;
    }
    let m = lu.solve(delta);
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += m[i * n + j] * m[j * n + i];
        }
    }
    let v = tr.max(0.0).sqrt() * det.sqrt().sqrt();
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// tanh-sinh nodes and weights on `(0, 1)`.
struct Quadrature {
    nodes: Vec<(f64, f64)>,
}

impl Quadrature {
    fn new(m: usize) -> Self {
        let h = 3.0 / m as f64;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let nodes = (-(m as i64)..=m as i64)
            .map(|k| {
                let s = k as f64 * h;
                let u = half_pi * s.sinh();
                // τ = 1/(1 + e^{-2u}) with dτ/du = 2τ(1 − τ)
                let tau = 1.0 / (1.0 + (-2.0 * u).exp());
                let one_minus = 1.0 / (1.0 + (2.0 * u).exp());
                let w = h * half_pi * s.cosh() * 2.0 * tau * one_minus;
                (tau, w)
            })
            .filter(|&(tau, w)| tau > 0.0 && tau < 1.0 && w > 0.0)
            .collect();
        Self { nodes }
    }

    fn segment_length(&self, n: usize, p: &[f64], q: &[f64]) -> f64 {
        let delta: Vec<f64> = q.iter().zip(p).map(|(b, a)| b - a).collect();
        let mut point = vec![0.0; n * n];
        self.nodes
            .iter()
            .map(|&(tau, w)| {
                for (k, x) in point.iter_mut().enumerate() {
                    *x = p[k] + tau * delta[k];
                }
                w * speed(n, &point, &delta)
            })
            .sum()
    }
}

/// Lower-triangular `L` with `L·Lᵀ = a` (jittered toward the diagonal when
/// `a` is not numerically positive definite).
fn cholesky(n: usize, a: &[f64]) -> Vec<f64> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    loop {
        let mut l = vec![0.0; n * n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j] + if i == j { jitter } else { 0.0 };
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        ok = false;
                        break 'outer;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        if ok {
            return l;
        }
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 10.0 };
    }
}

fn gram(n: usize, l: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    a
}

fn det_of(n: usize, a: &[f64]) -> f64 {
    Lu::new(n, a).map(|lu| lu.det()).unwrap_or(0.0)
}

fn lerp(p: &[f64], q: &[f64], t: f64) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect()
}

/// Entries of the lower triangle, the free coordinates of a waypoint.
fn lower_indices(n: usize) -> Vec<usize> {
    (0..n).flat_map(|i| (0..=i).map(move |j| i * n + j)).collect()
}

struct Search<'a> {
    n: usize,
    quad: &'a Quadrature,
    factors: Vec<Vec<f64>>,
    points: Vec<Vec<f64>>,
    segments: Vec<f64>,
    steps: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(n: usize, quad: &'a Quadrature, points: Vec<Vec<f64>>, step: f64) -> Self {
        let factors = points.iter().map(|p| cholesky(n, p)).collect::<Vec<_>>();
        let mut s = Self {
            n,
            quad,
            factors,
            points,
            segments: Vec::new(),
            steps: Vec::new(),
        };
        s.segments = (0..s.points.len() - 1)
            .map(|k| quad.segment_length(n, &s.points[k], &s.points[k + 1]))
            .collect();
        s.steps = vec![step; s.points.len()];
        s
    }

    fn length(&self) -> f64 {
        self.segments.iter().sum()
    }

    /// Halves every segment, keeping the current path.
    fn refine(&mut self) {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        let mut steps = Vec::with_capacity(points.capacity());
        for k in 0..self.points.len() - 1 {
            points.push(self.points[k].clone());
            points.push(lerp(&self.points[k], &self.points[k + 1], 0.5));
            steps.push(self.steps[k]);
            steps.push(0.5 * (self.steps[k] + self.steps[k + 1]));
        }
        points.push(self.points.last().expect("non-empty").clone());
        steps.push(*self.steps.last().expect("non-empty"));
        let step = steps.clone();
        *self = Search::new(self.n, self.quad, points, 0.0);
        self.steps = step;
    }

    fn run(&mut self, rng: &mut impl Rng, iterations: usize) {
        let n = self.n;
        let coords = lower_indices(n);
        let last = self.points.len() - 1;
        if last < 2 {
            return;
        }
        for _ in 0..iterations {
            let k = rng.random_range(1..last);
            let scale = self.factors[k].iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let step = self.steps[k] * scale;
            let mut trial = self.factors[k].clone();
            if rng.random_bool(0.5) {
                let c = coords[rng.random_range(0..coords.len())];
                trial[c] += step * rng.sample::<f64, _>(StandardNormal);
            } else {
                for &c in &coords {
                    trial[c] += step / (coords.len() as f64).sqrt() * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let point = gram(n, &trial);
            let left = self.quad.segment_length(n, &self.points[k - 1], &point);
            let right = self.quad.segment_length(n, &point, &self.points[k + 1]);
            if left + right < self.segments[k - 1] + self.segments[k] {
                self.factors[k] = trial;
                self.points[k] = point;
                self.segments[k - 1] = left;
                self.segments[k] = right;
                self.steps[k] = (self.steps[k] * 1.3).min(1.0);
            } else {
                self.steps[k] = (self.steps[k] * 0.93).max(1e-9);
            }
        }
    }
}

fn polyline(p: &[f64], q: &[f64], segments: usize) -> Vec<Vec<f64>> {
    (0..=segments).map(|k| lerp(p, q, k as f64 / segments as f64)).collect()
}

/// Chord `p → m → q` with `segments ≥ 2` segments in total.
fn two_leg(p: &[f64], m: &[f64], q: &[f64], segments: usize) -> Vec<Vec<f64>> {
    let left = segments / 2;
    let mut out = polyline(p, m, left);
    out.pop();
    out.extend(polyline(m, q, segments - left));
    out
}

/// Coarse-to-fine level sizes (in segments) ending at `segments`.
fn levels(segments: usize) -> Vec<usize> {
    let mut out = vec![segments];
    let mut s = segments;
    while s.is_multiple_of(2) && s > 2 {
        s /= 2;
        out.push(s);
    }
    out.reverse();
    out
}

fn endpoint_matrix(p: &FiberPoint<f64>) -> Vec<f64> {
    p.to_matrix().as_slice().to_vec()
}

/// Runs the local search from both initial paths and returns the best
/// path over all restarts.
pub fn brute_force_path(p0: &FiberPoint<f64>, p1: &FiberPoint<f64>, cfg: &OracleConfig) -> Result<OraclePath> {
    cfg.validate()?;
    if p0.dim() != p1.dim() {
        return Err(GeoError::invalid("oracle endpoints have different dimensions"));
    }
    if p0.is_cone() && p1.is_cone() {
        return Err(GeoError::invalid("oracle endpoints are both the cone point"));
    }
    let n = p0.dim();
    let a0 = endpoint_matrix(p0);
    let a1 = endpoint_matrix(p1);
    let quad = Quadrature::new(cfg.quadrature_substeps);
    let segments = cfg.waypoints - 1;
    let plan = levels(segments);
    let coarse = plan[0];

    // small midpoint with ⁴√det ≈ 1e-3·max(⁴√A0, ⁴√A1)
    let sum: Vec<f64> = a0.iter().zip(&a1).map(|(x, y)| x + y).collect();
    let f_sum = det_of(n, &sum).max(0.0).sqrt().sqrt();
    let f_max = det_of(n, &a0).max(det_of(n, &a1)).max(0.0).sqrt().sqrt();
    let eta = if f_sum > 0.0 {
        (1e-3 * f_max / f_sum).powf(4.0 / n as f64)
    } else {
        1e-6
    };
    let mid: Vec<f64> = sum.iter().map(|x| eta * x).collect();

    let starts = [polyline(&a0, &a1, coarse), two_leg(&a0, &mid, &a1, coarse)];
    let initial_length = starts
        .iter()
        .map(|pts| Search::new(n, &quad, pts.clone(), cfg.step_scale).length())
        .fold(f64::INFINITY, f64::min);

    let per_level = cfg.iterations / plan.len();
    let mut best: Option<Search> = None;
    for restart in 0..cfg.restarts {
        for (s_idx, start) in starts.iter().enumerate() {
            let mut rng = trial_rng(cfg.seed, (restart * starts.len() + s_idx) as u64);
            let mut search = Search::new(n, &quad, start.clone(), cfg.step_scale);
            for (level, &size) in plan.iter().enumerate() {
                if level > 0 && search.points.len() - 1 < size {
                    search.refine();
                }
                search.run(&mut rng, per_level.max(1));
            }
            while search.points.len() - 1 < segments {
                search.refine();
            }
            if best.as_ref().is_none_or(|b| search.length() < b.length()) {
                best = Some(search);
            }
        }
    }
    let best = best.expect("at least one restart");
    let min_fourth_root_det = best
        .points
        .iter()
        .map(|p| det_of(n, p).max(0.0).sqrt().sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(OraclePath {
        length: best.length(),
        waypoints: best.points,
        min_fourth_root_det,
        initial_length,
    })
}

/// Length of the shortest polygonal path found between `p0` and `p1`.
pub fn brute_force_distance(p0: &FiberPoint<f64>, p1: &FiberPoint<f64>, cfg: &OracleConfig) -> Result<f64> {
    if p0.dim() == p1.dim() && p0 == p1 {
        return Ok(0.0);
    }
    Ok(brute_force_path(p0, p1, cfg)?.length)
}

/// Lower bound on any field path's length from per-sample oracle results:
/// a field path's length is at least the weighted L² norm of the lengths
/// of the paths its samples follow.
pub fn brute_force_field_distance(f0: &MetricField<f64>, f1: &MetricField<f64>, cfg: &OracleConfig) -> Result<f64> {
    if f0.grid() != f1.grid() {
        return Err(GeoError::invalid("fields live on different grids"));
    }
    let lengths = f0
        .values()
        .par_iter()
        .zip(f1.values())
        .enumerate()
        .map(|(i, (p, q))| {
            if p.is_cone() && q.is_cone() {
                return Ok(0.0);
            }
            let cfg = OracleConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            brute_force_distance(p, q, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_l2(f0.grid().weights(), &lengths))
}

/// Length of an entrywise-linear polygon through the given matrices under
/// the oracle's quadrature.
pub fn polygon_length(dim: usize, points: &[Vec<f64>], quadrature_substeps: usize) -> f64 {
    let quad = Quadrature::new(quadrature_substeps);
    points
        .windows(2)
        .map(|w| quad.segment_length(dim, &w[0], &w[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::SymTensor;
    use approx::assert_relative_eq;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn lu_determinant_and_solve() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let lu = Lu::new(3, &a).unwrap();
        assert_relative_eq!(lu.det(), 18.0, epsilon = 1e-12);
        let x = lu.solve(&a);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(x[i * 3 + j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        assert!(Lu::new(2, &[1.0, 2.0, 2.0, 4.0]).is_none() || det_of(2, &[1.0, 2.0, 2.0, 4.0]).abs() < 1e-15);
    }

    #[test]
    fn cholesky_round_trip() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let g = gram(3, &cholesky(3, &a));
        for (x, y) in g.iter().zip(&a) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn ray_to_zero_has_exact_length() {
        // ∫₀¹ √(tr((a⁻¹a)²))·det(a)^{1/4} with a = τ·I, n = 2: ∫ √2/τ · τ^{1/2} = 2√2;
        // the rule stops near τ = 1e-14, losing ~2√τ of the singular tail
        let l = polygon_length(2, &[vec![0.0; 4], vec![1.0, 0.0, 0.0, 1.0]], 16);
        assert_relative_eq!(l, 2.0 * SQRT2, max_relative = 1e-7);
    }

    #[test]
    fn tanh_sinh_on_smooth_segment() {
        // I → 4I entrywise: a = (1+3τ)I, speed = √2·3/(1+3τ)·(1+3τ)^{1/2}
        let l = polygon_length(2, &[vec![1.0, 0.0, 0.0, 1.0], vec![4.0, 0.0, 0.0, 4.0]], 16);
        assert_relative_eq!(l, 2.0 * SQRT2, max_relative = 1e-12);
    }

    #[test]
    fn identical_endpoints_give_zero() {
        let p = FiberPoint::spd(SymTensor::<f64>::identity(2)).unwrap();
        assert_eq!(brute_force_distance(&p, &p, &OracleConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = OracleConfig {
            waypoints: 2,
            ..OracleConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OracleConfig {
            step_scale: 1.5,
            ..OracleConfig::default()
        };
        assert!(bad.validate().is_err());
        let p = FiberPoint::<f64>::cone(2);
        assert!(brute_force_path(&p, &p, &OracleConfig::default()).is_err());
    }

    #[test]
    fn levels_halve_down() {
        assert_eq!(levels(32), vec![2, 4, 8, 16, 32]);
        assert_eq!(levels(5), vec![5]);
    }
}
