//! Comparison-triangle tests of the CAT(0) inequality.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::fiber::{classify, fiber_distance, fiber_geodesic, CaseTag, FiberPoint};
use crate::field::{field_distance, field_geodesic, sample_distances, weighted_l2, MetricField, SampleGrid};
use crate::verification::sampling::{log_ball_point, mixed_point, trial_rng};

/// Outcome of one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cat0Sample {
    /// `d(w₁, w₂) − |w̄₁ − w̄₂|`; CAT(0) asks for this to be `≤ 0`.
    pub slack: f64,
    /// Amount by which the side lengths fail the triangle inequality.
    pub side_violation: f64,
}

impl Cat0Sample {
    pub fn violation(&self) -> f64 {
        self.slack.max(self.side_violation)
    }
}

fn side_violation(ab: f64, ac: f64, bc: f64) -> f64 {
    [ab - ac - bc, ac - ab - bc, bc - ab - ac]
        .into_iter()
        .fold(0.0, f64::max)
}

/// `|w̄₁ − w̄₂|` for `w̄₁ = s·b̄`, `w̄₂ = t·c̄` in the planar triangle with
/// `ā = 0` and the given side lengths.
pub fn comparison_distance(ab: f64, ac: f64, bc: f64, s: f64, t: f64) -> f64 {
    let cos = if ab > 0.0 && ac > 0.0 {
        ((ab * ab + ac * ac - bc * bc) / (2.0 * ab * ac)).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let (x1, y1) = (s * ab, 0.0);
    let (x2, y2) = (t * ac * cos, t * ac * sin);
    ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt()
}

/// Compares the points at parameters `s` on `[a, b]` and `t` on `[a, c]`
/// with their planar counterparts.
pub fn cat0_check(
    a: &FiberPoint<f64>,
    b: &FiberPoint<f64>,
    c: &FiberPoint<f64>,
    s: f64,
    t: f64,
) -> Result<Cat0Sample> {
    let ab = fiber_distance(a, b)?;
    let ac = fiber_distance(a, c)?;
    let bc = fiber_distance(b, c)?;
    let w1 = fiber_geodesic(a, b, s)?;
    let w2 = fiber_geodesic(a, c, t)?;
    Ok(Cat0Sample {
        slack: fiber_distance(&w1, &w2)? - comparison_distance(ab, ac, bc, s, t),
        side_violation: side_violation(ab, ac, bc),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldCat0Sample {
    /// Against the planar triangle with the field side lengths.
    pub planar_slack: f64,
    /// Against the triangle assembled from per-sample planar triangles.
    pub per_sample_slack: f64,
    pub side_violation: f64,
}

impl FieldCat0Sample {
    pub fn violation(&self) -> f64 {
        self.planar_slack.max(self.per_sample_slack).max(self.side_violation)
    }
}

pub fn field_cat0_check(
    g: &MetricField<f64>,
    h: &MetricField<f64>,
    k: &MetricField<f64>,
    s: f64,
    t: f64,
) -> Result<FieldCat0Sample> {
    let gh = field_distance(g, h)?;
    let gk = field_distance(g, k)?;
    let hk = field_distance(h, k)?;
    let w1 = field_geodesic(g, h, s)?;
    let w2 = field_geodesic(g, k, t)?;
    let d = field_distance(&w1, &w2)?;

    let (ab, ac, bc) = (sample_distances(g, h)?, sample_distances(g, k)?, sample_distances(h, k)?);
    let local: Vec<f64> = (0..ab.len())
        .map(|i| comparison_distance(ab[i], ac[i], bc[i], s, t))
        .collect();
    let assembled = weighted_l2(g.grid().weights(), &local);
    Ok(FieldCat0Sample {
        planar_slack: d - comparison_distance(gh, gk, hk, s, t),
        per_sample_slack: d - assembled,
        side_violation: side_violation(gh, gk, hk),
    })
}

/// How a triangle sits relative to the cone point, by the number of its
/// sides shorter than the threshold and by cone vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleShape {
    /// No side passes through the cone point.
    Riemannian,
    /// No cone vertex; every side passes through the cone point.
    AllSidesCone,
    /// No cone vertex; exactly one side avoids the cone point.
    OneRiemannianSide,
    /// No cone vertex; exactly two sides avoid the cone point.
    TwoRiemannianSides,
    /// One vertex is the cone point; the opposite side passes through it.
    ConeVertexFar,
    /// One vertex is the cone point; the opposite side avoids it.
    ConeVertexNear,
    /// Two or more vertices at the cone point.
    Degenerate,
}

impl TriangleShape {
    pub const ALL: [TriangleShape; 7] = [
        TriangleShape::Riemannian,
        TriangleShape::AllSidesCone,
        TriangleShape::OneRiemannianSide,
        TriangleShape::TwoRiemannianSides,
        TriangleShape::ConeVertexFar,
        TriangleShape::ConeVertexNear,
        TriangleShape::Degenerate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TriangleShape::Riemannian => "riemannian",
            TriangleShape::AllSidesCone => "all_sides_cone",
            TriangleShape::OneRiemannianSide => "one_riemannian_side",
            TriangleShape::TwoRiemannianSides => "two_riemannian_sides",
            TriangleShape::ConeVertexFar => "cone_vertex_far",
            TriangleShape::ConeVertexNear => "cone_vertex_near",
            TriangleShape::Degenerate => "degenerate",
        }
    }

    /// The five shapes of triangles that meet the cone point.
    pub fn touches_cone(self) -> bool {
        !matches!(self, TriangleShape::Riemannian | TriangleShape::Degenerate)
    }
}

pub fn triangle_shape(a: &FiberPoint<f64>, b: &FiberPoint<f64>, c: &FiberPoint<f64>) -> Result<TriangleShape> {
    let vertices = [a, b, c];
    let cones = vertices.iter().filter(|p| p.is_cone()).count();
    Ok(match cones {
        0 => {
            let mut riemannian = 0;
            for (p, q) in [(a, b), (b, c), (c, a)] {
                if classify(p, q)?.tag == CaseTag::Riemannian {
                    riemannian += 1;
                }
            }
            match riemannian {
                0 => TriangleShape::AllSidesCone,
                1 => TriangleShape::OneRiemannianSide,
                2 => TriangleShape::TwoRiemannianSides,
                _ => TriangleShape::Riemannian,
            }
        }
        1 => {
            let others: Vec<_> = vertices.into_iter().filter(|p| !p.is_cone()).collect();
            if classify(others[0], others[1])?.tag == CaseTag::Riemannian {
                TriangleShape::ConeVertexNear
            } else {
                TriangleShape::ConeVertexFar
            }
        }
        _ => TriangleShape::Degenerate,
    })
}

pub type Triangle = [FiberPoint<f64>; 3];

/// Draws a triangle of the requested shape by rejection.
pub fn sample_triangle(rng: &mut impl Rng, n: usize, shape: TriangleShape) -> Result<Triangle> {
    const MAX_ATTEMPTS: usize = 100_000;
    let radius = match shape {
        TriangleShape::Riemannian | TriangleShape::ConeVertexNear => 4.0,
        _ => 9.0,
    };
    for _ in 0..MAX_ATTEMPTS {
        let mut tri: Triangle = std::array::from_fn(|_| FiberPoint::Spd(log_ball_point(rng, n, radius)));
        match shape {
            TriangleShape::ConeVertexFar | TriangleShape::ConeVertexNear => tri[2] = FiberPoint::cone(n),
            TriangleShape::Degenerate => {
                tri[1] = FiberPoint::cone(n);
                tri[2] = FiberPoint::cone(n);
            }
            _ => {}
        }
        if triangle_shape(&tri[0], &tri[1], &tri[2])? == shape {
            // the cone vertex (and the special side) may sit anywhere
            tri.rotate_left(rng.random_range(0..3));
            return Ok(tri);
        }
    }
    Err(GeoError::invalid(format!("could not sample a {} triangle", shape.as_str())))
}

fn matrix_or_cone(p: &FiberPoint<f64>) -> Option<Vec<f64>> {
    p.as_spd().map(|a| a.as_sym().as_slice().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstTriangle {
    pub trial: u64,
    pub shape: TriangleShape,
    /// Row-major matrices; `None` is the cone point.
    pub vertices: [Option<Vec<f64>>; 3],
    pub s: f64,
    pub t: f64,
    pub sample: Cat0Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cat0Report {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_violation: f64,
    pub max_side_violation: f64,
    pub shape_counts: BTreeMap<&'static str, usize>,
    pub worst_case: Option<WorstTriangle>,
    pub pass: bool,
}

/// Shapes visited by the sweep, round-robin over trials.
pub fn sweep_shapes(include_cone: bool) -> Vec<TriangleShape> {
    TriangleShape::ALL
        .into_iter()
        .filter(|s| *s != TriangleShape::Degenerate)
        .filter(|s| include_cone || !matches!(s, TriangleShape::ConeVertexFar | TriangleShape::ConeVertexNear))
        .collect()
}

/// Random fiber triangles in dimensions 2 and 3 with random `(s, t)`.
pub fn cat0_sweep(trials: usize, seed: u64, include_cone: bool, tolerance: f64) -> Result<Cat0Report> {
    let shapes = sweep_shapes(include_cone);
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let shape = shapes[trial as usize % shapes.len()];
            let n = 2 + (trial as usize / shapes.len()) % 2;
            let tri = sample_triangle(&mut rng, n, shape)?;
            let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
            let sample = cat0_check(&tri[0], &tri[1], &tri[2], s, t)?;
            Ok(WorstTriangle {
                trial,
                shape,
                vertices: [matrix_or_cone(&tri[0]), matrix_or_cone(&tri[1]), matrix_or_cone(&tri[2])],
                s,
                t,
                sample,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut shape_counts = BTreeMap::new();
    for r in &results {
        *shape_counts.entry(r.shape.as_str()).or_insert(0) += 1;
    }
    let worst = results
        .iter()
        .max_by(|x, y| x.sample.violation().total_cmp(&y.sample.violation()))
        .cloned();
    let max_violation = worst.as_ref().map_or(f64::NEG_INFINITY, |w| w.sample.violation());
    let max_side_violation = results.iter().map(|r| r.sample.side_violation).fold(0.0, f64::max);
    let pass = max_violation <= tolerance && max_side_violation <= tolerance;
    Ok(Cat0Report {
        trials,
        seed,
        tolerance,
        max_violation,
        max_side_violation,
        shape_counts,
        worst_case: worst.filter(|w| w.sample.violation() > tolerance),
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldTriangleKind {
    /// Independent mixed samples at every grid point.
    Mixed,
    /// One vertex is the cone point everywhere.
    ConeVertex,
    /// Triangles of the fiber-sweep shapes replicated along the grid with
    /// independent draws per sample.
    Shaped,
}

impl FieldTriangleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldTriangleKind::Mixed => "mixed",
            FieldTriangleKind::ConeVertex => "cone_vertex",
            FieldTriangleKind::Shaped => "shaped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCat0Report {
    pub trials: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub tolerance: f64,
    pub max_planar_slack: f64,
    pub max_per_sample_slack: f64,
    pub max_side_violation: f64,
    pub kind_counts: BTreeMap<&'static str, usize>,
    pub worst_trial: Option<u64>,
    pub pass: bool,
}

/// Random field triangles on a uniform grid of `grid_size` samples.
pub fn field_cat0_sweep(trials: usize, seed: u64, grid_size: usize, tolerance: f64) -> Result<FieldCat0Report> {
    let kinds = [FieldTriangleKind::Mixed, FieldTriangleKind::ConeVertex, FieldTriangleKind::Shaped];
    let shapes = sweep_shapes(true);
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let kind = kinds[trial as usize % kinds.len()];
            let n = 2 + (trial as usize / kinds.len()) % 2;
            let grid = Arc::new(SampleGrid::uniform(n, grid_size)?);
            let mut vertices: [Vec<FiberPoint<f64>>; 3] = Default::default();
            for _ in 0..grid_size {
                let tri: Triangle = match kind {
                    FieldTriangleKind::Mixed => std::array::from_fn(|_| mixed_point(&mut rng, n)),
                    FieldTriangleKind::ConeVertex => {
                        [FiberPoint::cone(n), mixed_point(&mut rng, n), mixed_point(&mut rng, n)]
                    }
                    FieldTriangleKind::Shaped => {
                        let shape = shapes[rng.random_range(0..shapes.len())];
                        sample_triangle(&mut rng, n, shape)?
                    }
                };
                for (v, p) in vertices.iter_mut().zip(tri) {
                    v.push(p);
                }
            }
            let [g, h, k] = vertices.map(|v| MetricField::new(grid.clone(), v));
            let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
            Ok((trial, kind, field_cat0_check(&g?, &h?, &k?, s, t)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut kind_counts = BTreeMap::new();
    for (_, kind, _) in &results {
        *kind_counts.entry(kind.as_str()).or_insert(0) += 1;
    }
    let fold = |f: fn(&FieldCat0Sample) -> f64| results.iter().map(|r| f(&r.2)).fold(f64::NEG_INFINITY, f64::max);
    let max_planar_slack = fold(|s| s.planar_slack);
    let max_per_sample_slack = fold(|s| s.per_sample_slack);
    let max_side_violation = fold(|s| s.side_violation);
    let worst_trial = results
        .iter()
        .filter(|r| r.2.violation() > tolerance)
        .max_by(|x, y| x.2.violation().total_cmp(&y.2.violation()))
        .map(|r| r.0);
    Ok(FieldCat0Report {
        trials,
        seed,
        grid_size,
        tolerance,
        max_planar_slack,
        max_per_sample_slack,
        max_side_violation,
        kind_counts,
        worst_trial,
        pass: worst_trial.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::SymTensor;
    use approx::assert_relative_eq;

    fn scaled_eye(c: f64) -> FiberPoint<f64> {
        FiberPoint::spd(SymTensor::scaled_identity(2, c)).unwrap()
    }

    #[test]
    fn comparison_distance_on_right_triangle() {
        // 3-4-5 triangle with the right angle at ā
        assert_relative_eq!(comparison_distance(3.0, 4.0, 5.0, 1.0, 1.0), 5.0, epsilon = 1e-14);
        assert_relative_eq!(comparison_distance(3.0, 4.0, 5.0, 0.5, 0.5), 2.5, epsilon = 1e-14);
        assert_eq!(comparison_distance(3.0, 4.0, 5.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn collapsed_side_is_flat() {
        let a = scaled_eye(1.0);
        let c = scaled_eye(4.0);
        let r = cat0_check(&a, &a, &c, 0.3, 0.6).unwrap();
        assert!(r.slack.abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn triangle_through_cone_vertex() {
        let r = cat0_check(&scaled_eye(1.0), &scaled_eye(4.0), &FiberPoint::cone(2), 0.5, 0.5).unwrap();
        assert!(r.violation() <= 1e-9, "{r:?}");
    }

    #[test]
    fn shapes_are_recognized() {
        let far = FiberPoint::Spd(crate::spd::sym_exp(&SymTensor::diag(&[10.0, -10.0])).unwrap());
        let cone = FiberPoint::cone(2);
        assert_eq!(
            triangle_shape(&scaled_eye(1.0), &far, &cone).unwrap(),
            TriangleShape::ConeVertexFar
        );
        assert_eq!(
            triangle_shape(&scaled_eye(1.0), &scaled_eye(4.0), &cone).unwrap(),
            TriangleShape::ConeVertexNear
        );
        assert_eq!(
            triangle_shape(&scaled_eye(1.0), &scaled_eye(4.0), &scaled_eye(2.0)).unwrap(),
            TriangleShape::Riemannian
        );
        assert_eq!(
            triangle_shape(&scaled_eye(1.0), &cone, &cone).unwrap(),
            TriangleShape::Degenerate
        );
    }

    #[test]
    fn every_shape_can_be_sampled() {
        let mut rng = trial_rng(3, 0);
        for n in [2, 3] {
            for shape in sweep_shapes(true) {
                let tri = sample_triangle(&mut rng, n, shape).unwrap();
                assert_eq!(triangle_shape(&tri[0], &tri[1], &tri[2]).unwrap(), shape);
            }
        }
    }

    #[test]
    fn constant_fields_match_fiber_check() {
        let grid = Arc::new(SampleGrid::uniform(2, 4).unwrap());
        let (a, b, c) = (scaled_eye(1.0), scaled_eye(4.0), FiberPoint::cone(2));
        let fiber = cat0_check(&a, &b, &c, 0.25, 0.8).unwrap();
        let [g, h, k] = [a, b, c].map(|p| MetricField::constant(grid.clone(), p).unwrap());
        let field = field_cat0_check(&g, &h, &k, 0.25, 0.8).unwrap();
        assert_relative_eq!(field.planar_slack, fiber.slack, epsilon = 1e-12);
        assert_relative_eq!(field.per_sample_slack, fiber.slack, epsilon = 1e-12);
    }
}
