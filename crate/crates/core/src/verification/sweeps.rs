//! Randomized checks of the closed-form geometry, each producing a
//! serializable report.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::fiber::{
    classify, cone_scale, cone_threshold, derivative_weights, exp_map, exp_qr, fiber_distance, inv_exp, path_length, sample_times,
    CaseTag, FiberGeodesic, FiberPoint, SampledPath,
};
use crate::field::{
    field_distance, field_path_length, weighted_l2, FieldGeodesic, FieldPath, MetricField, SampleGrid,
};
use crate::spd::{fiber_inner, fiber_norm, sym_exp, SpdTensor, SymTensor};
use crate::verification::oracle::{brute_force_field_distance, brute_force_path, OracleConfig};
use crate::verification::sampling::{
    conditioned_cone_pair, cone_pair, displaced, mixed_point, random_direction, random_spd, random_traceless_direction, riemannian_pair,
    trial_rng,
};

/// Largest `θ` (the threshold is `π`) drawn for random Riemannian pairs.
pub const MAX_RIEMANNIAN_ANGLE: f64 = 0.97 * std::f64::consts::PI;

fn max(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn min(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::INFINITY, f64::min)
}

fn rel_diff(a: &SymTensor<f64>, b: &SymTensor<f64>) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    /// `min(d − lower)`; negative means the lower bound failed.
    pub min_lower_slack: f64,
    /// `min(upper − d)`; negative means the upper bound failed.
    pub min_upper_slack: f64,
    /// Largest `|d − lower|` over conformal pairs, relative to `max(1, d)`.
    pub max_conformal_gap: f64,
    /// Largest `|upper − d|` over cone-case pairs, relative to `max(1, d)`.
    pub max_cone_gap: f64,
    pub pass: bool,
}

/// `(4/√n)|⁴√A₁ − ⁴√A₀| ≤ d ≤ (4/√n)(⁴√A₀ + ⁴√A₁)` on random pairs,
/// cycling through general, conformal, cone-case and degenerate pairs.
pub fn bounds_sweep(trials: usize, seed: u64) -> Result<BoundsReport> {
    const SLACK: f64 = -1e-10;
    const EQUALITY: f64 = 1e-12;
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = 2 + (trial as usize / 4) % 2;
            let regime = trial % 4;
            let (p0, p1) = match regime {
                0 => (mixed_point(&mut rng, n), mixed_point(&mut rng, n)),
                1 => {
                    let a = random_spd(&mut rng, n, 2.0);
                    let c = rng.random_range(-3.0f64..3.0).exp();
                    (FiberPoint::Spd(a.clone()), FiberPoint::Spd(a.scaled(c)))
                }
                2 => {
                    let (a0, a1) = cone_pair(&mut rng, n);
                    (a0.into(), a1.into())
                }
                _ => {
                    let (a0, a1) = riemannian_pair(&mut rng, n, MAX_RIEMANNIAN_ANGLE);
                    (a0.into(), a1.into())
                }
            };
            let d = fiber_distance(&p0, &p1)?;
            let (f0, f1) = (p0.fourth_root_det(), p1.fourth_root_det());
            let c = cone_scale::<f64>(n);
            let (lower, upper) = (c * (f1 - f0).abs(), c * (f0 + f1));
            let scale = d.max(1.0);
            let conformal_gap = (regime == 1).then(|| (d - lower).abs() / scale);
            let cone_gap = (regime == 2).then(|| (upper - d).abs() / scale);
            Ok((d - lower, upper - d, conformal_gap, cone_gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let min_lower_slack = min(rows.iter().map(|r| r.0));
    let min_upper_slack = min(rows.iter().map(|r| r.1));
    let violations = rows.iter().filter(|r| r.0 < SLACK || r.1 < SLACK).count();
    let max_conformal_gap = max(rows.iter().filter_map(|r| r.2));
    let max_cone_gap = max(rows.iter().filter_map(|r| r.3));
    Ok(BoundsReport {
        trials,
        seed,
        violations,
        min_lower_slack,
        min_upper_slack,
        max_conformal_gap,
        max_cone_gap,
        pass: violations == 0 && max_conformal_gap <= EQUALITY && max_cone_gap <= EQUALITY,
    })
}

/// Largest endpoint condition number in the geodesic sweep. Entrywise
/// differences of a tensor with condition number `κ` carry rounding of order
/// `ε·κ/h`, so beyond this the speed check measures floating point rather
/// than the parametrization.
pub const GEODESIC_MAX_CONDITION: f64 = 1e8;

/// Finite-difference step for speed checks. Rounding in strongly anisotropic
/// tensors grows like `1/h`, truncation like `h⁴`.
pub const SPEED_STEP: f64 = 1e-3;

/// Metric speed of `g` at time `t` from a five-point finite difference of
/// step `h` on the matrix entries. The stencil is shifted off-center where
/// it would leave `[0, 1]` or straddle the cone point. `None` at the cone
/// point itself.
pub fn speed_at(g: &FiberGeodesic<f64>, t: f64, h: f64) -> Result<Option<f64>> {
    let FiberPoint::Spd(a) = g.at(t)? else {
        return Ok(None);
    };
    let cone = g.cone_time();
    let admissible = |shift: i32| {
        let lo = t + f64::from(shift - 2) * h;
        let hi = t + f64::from(shift + 2) * h;
        lo >= 0.0 && hi <= 1.0 && !cone.is_some_and(|c| lo <= c && c <= hi)
    };
    let Some(shift) = [0, -1, 1, -2, 2].into_iter().find(|&s| admissible(s)) else {
        return Err(GeoError::invalid(format!("no admissible stencil of step {h} at t = {t}")));
    };
    let nodes: Vec<f64> = (-2..=2).map(|j| t + f64::from(shift + j) * h).collect();
    let weights = derivative_weights(t, &nodes);
    let mut velocity = SymTensor::zeros(a.dim());
    for (&s, w) in nodes.iter().zip(weights) {
        let offset = if s == t { SymTensor::zeros(a.dim()) } else { &g.at(s)?.to_matrix() - a.as_sym() };
        velocity = &velocity + &offset.scale(w);
    }
    Ok(Some(fiber_inner(&a, &velocity, &velocity)?.max(0.0).sqrt()))
}

/// Largest relative deviation of the finite-difference speed from its mean
/// over `count` uniform interior times. The two times on either side of a
/// cone visit are skipped: the stencil there is one-sided and the `s^{4/n}`
/// profile is not smooth on the scale of the step.
pub fn speed_deviation(g: &FiberGeodesic<f64>, count: usize, h: f64) -> Result<f64> {
    if g.length() == 0.0 {
        return Ok(0.0);
    }
    let step = 1.0 / (count + 1) as f64;
    let near_cone = |t: f64| g.cone_time().is_some_and(|c| (t - c).abs() < step);
    let mut speeds = Vec::with_capacity(count);
    for k in 1..=count {
        let t = k as f64 * step;
        if near_cone(t) {
            continue;
        }
        if let Some(v) = speed_at(g, t, h)? {
            speeds.push(v);
        }
    }
    if speeds.is_empty() {
        return Ok(0.0);
    }
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    Ok(max(speeds.iter().map(|v| (v - mean).abs() / mean)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicReport {
    pub trials: usize,
    pub seed: u64,
    pub samples: usize,
    pub riemannian_pairs: usize,
    pub cone_pairs: usize,
    pub max_endpoint_error: f64,
    pub max_speed_deviation: f64,
    pub max_length_error_riemannian: f64,
    pub max_length_error_cone: f64,
    pub pass: bool,
}

/// Endpoint reproduction, constant speed and sampled length of geodesics
/// between random pairs of both cases (and with cone endpoints).
pub fn geodesic_sweep(trials: usize, seed: u64, samples: usize) -> Result<GeodesicReport> {
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = 2 + (trial as usize / 4) % 2;
            let (p0, p1): (FiberPoint<f64>, FiberPoint<f64>) = match trial % 4 {
                0 | 1 => {
                    let (a0, a1) = riemannian_pair(&mut rng, n, MAX_RIEMANNIAN_ANGLE);
                    (a0.into(), a1.into())
                }
                2 => {
                    let (a0, a1) = conditioned_cone_pair(&mut rng, n, GEODESIC_MAX_CONDITION);
                    (a0.into(), a1.into())
                }
                _ => {
                    let a = FiberPoint::Spd(random_spd(&mut rng, n, 1.0));
                    if rng.random_bool(0.5) {
                        (a, FiberPoint::cone(n))
                    } else {
                        (FiberPoint::cone(n), a)
                    }
                }
            };
            let g = FiberGeodesic::new(p0.clone(), p1.clone())?;
            let endpoint = |q: &FiberPoint<f64>, p: &FiberPoint<f64>| match (q, p) {
                (FiberPoint::Spd(x), FiberPoint::Spd(y)) => rel_diff(x.as_sym(), y.as_sym()),
                (FiberPoint::Cone { .. }, FiberPoint::Cone { .. }) => 0.0,
                _ => f64::INFINITY,
            };
            let endpoint_error = endpoint(&g.at(0.0)?, &p0).max(endpoint(&g.at(1.0)?, &p1));
            let speed = speed_deviation(&g, 64, SPEED_STEP)?;
            let path = SampledPath::from_geodesic(&g, samples)?;
            let d = g.length();
            let length_error = (path_length(&path)? - d).abs() / d;
            Ok((g.case().tag == CaseTag::Riemannian, endpoint_error, speed, length_error))
        })
        .collect::<Result<Vec<_>>>()?;
    let riemannian_pairs = rows.iter().filter(|r| r.0).count();
    let max_endpoint_error = max(rows.iter().map(|r| r.1));
    let max_speed_deviation = max(rows.iter().map(|r| r.2));
    let max_length_error_riemannian = max(rows.iter().filter(|r| r.0).map(|r| r.3));
    let max_length_error_cone = max(rows.iter().filter(|r| !r.0).map(|r| r.3));
    Ok(GeodesicReport {
        trials,
        seed,
        samples,
        riemannian_pairs,
        cone_pairs: trials - riemannian_pairs,
        max_endpoint_error,
        max_speed_deviation,
        max_length_error_riemannian,
        max_length_error_cone,
        pass: max_endpoint_error <= 1e-9
            && max_speed_deviation < 1e-4
            && max_length_error_riemannian <= 1e-6
            && max_length_error_cone <= 1e-3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpLogReport {
    pub trials: usize,
    pub seed: u64,
    /// `max |exp(a0, ψ, 1) − a1| / |a1|` (entrywise max norms).
    pub max_round_trip_error: f64,
    /// `max |‖ψ‖_{a0} − d| / d`.
    pub max_norm_mismatch: f64,
    pub pass: bool,
}

pub fn exp_log_sweep(trials: usize, seed: u64) -> Result<ExpLogReport> {
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = 2 + (trial as usize) % 2;
            let (a0, a1) = riemannian_pair(&mut rng, n, MAX_RIEMANNIAN_ANGLE);
            let h = inv_exp(&a0, &a1)?;
            let back = exp_map(&a0, &h, 1.0)?;
            let round_trip = match back {
                FiberPoint::Spd(b) => rel_diff(b.as_sym(), a1.as_sym()),
                FiberPoint::Cone { .. } => f64::INFINITY,
            };
            let d = fiber_distance(&a0.clone().into(), &a1.into())?;
            let norm = fiber_norm(&a0, &h)?;
            Ok((round_trip, if d > 0.0 { (norm - d).abs() / d } else { norm }))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_round_trip_error = max(rows.iter().map(|r| r.0));
    let max_norm_mismatch = max(rows.iter().map(|r| r.1));
    Ok(ExpLogReport {
        trials,
        seed,
        max_round_trip_error,
        max_norm_mismatch,
        pass: max_round_trip_error <= 1e-8 && max_norm_mismatch <= 1e-10,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    pub trials: usize,
    pub seed: u64,
    pub times: usize,
    pub max_relative_error: f64,
    pub pass: bool,
}

/// `⁴√det a_t = √(q² + r²)·⁴√det a_0` along exponential-map geodesics with
/// random initial velocities, sampled at `times` uniform times in `(0, 1]`.
pub fn volume_law_sweep(trials: usize, seed: u64, times: usize) -> Result<VolumeReport> {
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = 2 + (trial as usize) % 2;
            let a0 = random_spd(&mut rng, n, 1.0);
            // velocity whose angle reaches up to ~3π/4 at t = 1
            let b = a0.unwhiten(&random_direction(&mut rng, n).scale(rng.random_range(0.1..8.0)));
            let f0 = a0.fourth_root_det();
            let mut worst: f64 = 0.0;
            for k in 1..=times {
                let t = k as f64 / times as f64;
                let (q, r) = exp_qr(&a0, &b, t)?;
                let expected = (q * q + r * r).sqrt() * f0;
                let got = exp_map(&a0, &b, t)?.fourth_root_det();
                worst = worst.max((got - expected).abs() / expected);
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_error = max(rows.into_iter());
    Ok(VolumeReport {
        trials,
        seed,
        times,
        max_relative_error,
        pass: max_relative_error < 1e-10,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub trials: usize,
    pub seed: u64,
    /// Offset of `tr_{a0}(k_T²)` on either side of the threshold.
    pub offset: f64,
    pub max_gap: f64,
    /// Whether every pair landed on the intended side.
    pub classification_ok: bool,
    pub pass: bool,
}

/// Distances to the two points whose log-coordinates put `tr_{a0}(k_T²)`
/// at `threshold ± offset` along a common direction.
pub fn threshold_sweep(trials: usize, seed: u64, offset: f64) -> Result<ThresholdReport> {
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = 2 + (trial as usize) % 2;
            let a0 = random_spd(&mut rng, n, 1.0);
            let dir = random_traceless_direction(&mut rng, n);
            let trace = rng.random_range(-2.0..2.0);
            let thr = cone_threshold::<f64>(n);
            let below = FiberPoint::Spd(displaced(&a0, &dir, thr - offset, trace));
            let above = FiberPoint::Spd(displaced(&a0, &dir, thr + offset, trace));
            let start = FiberPoint::Spd(a0);
            let sides_ok = classify(&start, &below)?.tag == CaseTag::Riemannian
                && classify(&start, &above)?.tag == CaseTag::ConeConcatenation;
            let gap = (fiber_distance(&start, &below)? - fiber_distance(&start, &above)?).abs();
            Ok((gap, sides_ok))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_gap = max(rows.iter().map(|r| r.0));
    let classification_ok = rows.iter().all(|r| r.1);
    Ok(ThresholdReport {
        trials,
        seed,
        offset,
        max_gap,
        classification_ok,
        pass: max_gap < 1e-6,
    })
}

/// Endpoint configurations for continuity probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityRegime {
    /// The target is the cone point.
    ConeTarget,
    /// `tr_{a0}(k_T²)` below the threshold.
    SubThreshold,
    /// `tr_{a0}(k_T²)` above the threshold.
    SuperThreshold,
    /// The target sits exactly at the threshold and the perturbed targets
    /// approach it from the Riemannian side.
    ThresholdFromBelow,
    /// As above, approached from the cone side.
    ThresholdFromAbove,
}

impl ContinuityRegime {
    pub const ALL: [ContinuityRegime; 5] = [
        ContinuityRegime::ConeTarget,
        ContinuityRegime::SubThreshold,
        ContinuityRegime::SuperThreshold,
        ContinuityRegime::ThresholdFromBelow,
        ContinuityRegime::ThresholdFromAbove,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub regime: ContinuityRegime,
    pub perturbation: f64,
    /// Largest `d(a1, a1')` realized by the perturbations.
    pub max_endpoint_distance: f64,
    /// `sup_t d(g_t, g'_t)`, maximized over trials.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<ContinuityRow>,
    pub pass: bool,
}

/// Allowed sup-deviation for each endpoint perturbation size.
pub const CONTINUITY_LIMITS: [(f64, f64); 2] = [(1e-3, 1e-1), (1e-6, 1e-3)];

/// A point at fiber distance `delta` from `target` (distance measured by
/// the closed form), in a random direction.
fn perturb_target(rng: &mut impl Rng, target: &FiberPoint<f64>, delta: f64) -> Result<FiberPoint<f64>> {
    let n = target.dim();
    match target {
        FiberPoint::Cone { .. } => {
            // (4/√n)·⁴√det = delta
            let shape = random_spd(rng, n, 1.0);
            let f = shape.fourth_root_det();
            let c = (delta / (cone_scale::<f64>(n) * f)).powf(4.0 / n as f64);
            Ok(FiberPoint::Spd(shape.scaled(c)))
        }
        FiberPoint::Spd(a1) => {
            // scale a unit log-direction so that d(a1, a1') ≈ delta
            let dir = random_direction(rng, n);
            let unit = SpdTensor::new(a1.unwhiten(sym_exp(&dir.scale(1e-4))?.as_sym()))?;
            let per_unit = fiber_distance(target, &FiberPoint::Spd(unit))? / 1e-4;
            let step = delta / per_unit;
            Ok(FiberPoint::Spd(SpdTensor::new(
                a1.unwhiten(sym_exp(&dir.scale(step))?.as_sym()),
            )?))
        }
    }
}

/// Sup over a fine time grid of the distance between corresponding points
/// of two geodesics sharing a start point.
fn sup_deviation(g: &FiberGeodesic<f64>, h: &FiberGeodesic<f64>, samples: usize) -> Result<f64> {
    let mut times: Vec<f64> = (0..samples).map(|k| k as f64 / (samples - 1) as f64).collect();
    times.extend(g.cone_time());
    times.extend(h.cone_time());
    let mut worst: f64 = 0.0;
    for t in times {
        worst = worst.max(fiber_distance(&g.at(t)?, &h.at(t)?)?);
    }
    Ok(worst)
}

/// Perturbs the target endpoint by `d(a1, a1') = δ` in each regime and
/// records the sup-over-`t` deviation of the minimal paths.
pub fn continuity_sweep(trials: usize, seed: u64) -> Result<ContinuityReport> {
    let mut rows = Vec::new();
    for regime in ContinuityRegime::ALL {
        for (delta, _) in CONTINUITY_LIMITS {
            let results = (0..trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(seed, trial);
                    let n = 2 + (trial as usize) % 2;
                    let a0 = random_spd(&mut rng, n, 1.0);
                    let thr = cone_threshold::<f64>(n);
                    let dir = random_traceless_direction(&mut rng, n);
                    let trace = rng.random_range(-1.0..1.0);
                    let start = FiberPoint::Spd(a0.clone());
                    let (target, moved) = match regime {
                        ContinuityRegime::ConeTarget => {
                            let target = FiberPoint::cone(n);
                            let moved = perturb_target(&mut rng, &target, delta)?;
                            (target, moved)
                        }
                        ContinuityRegime::SubThreshold | ContinuityRegime::SuperThreshold => {
                            let fraction = if regime == ContinuityRegime::SubThreshold { 0.5 } else { 2.0 };
                            let target = FiberPoint::Spd(displaced(&a0, &dir, fraction * thr, trace));
                            let moved = perturb_target(&mut rng, &target, delta)?;
                            (target, moved)
                        }
                        ContinuityRegime::ThresholdFromBelow | ContinuityRegime::ThresholdFromAbove => {
                            let below = regime == ContinuityRegime::ThresholdFromBelow;
                            threshold_neighbor(&a0, &dir, trace, delta, below)?
                        }
                    };
                    let endpoint_distance = fiber_distance(&target, &moved)?;
                    let g = FiberGeodesic::new(start.clone(), target)?;
                    let h = FiberGeodesic::new(start, moved)?;
                    Ok((endpoint_distance, sup_deviation(&g, &h, 257)?))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ContinuityRow {
                regime,
                perturbation: delta,
                max_endpoint_distance: max(results.iter().map(|r| r.0)),
                max_deviation: max(results.iter().map(|r| r.1)),
            });
        }
    }
    let pass = rows.iter().all(|r| {
        CONTINUITY_LIMITS
            .iter()
            .any(|(delta, limit)| *delta == r.perturbation && r.max_deviation <= *limit)
    });
    Ok(ContinuityReport {
        trials,
        seed,
        rows,
        pass,
    })
}

/// The threshold point `s = √thr` on the ray
/// `a0^{1/2}·exp(s·dir + trace/n)·a0^{1/2}`, and the point of the ray at
/// fiber distance `delta` from it on the requested side.
fn threshold_neighbor(
    a0: &SpdTensor<f64>,
    dir: &SymTensor<f64>,
    trace: f64,
    delta: f64,
    below: bool,
) -> Result<(FiberPoint<f64>, FiberPoint<f64>)> {
    let n = a0.dim();
    let thr = cone_threshold::<f64>(n);
    let at = |s: f64| FiberPoint::Spd(displaced(a0, dir, s * s, trace));
    let target = at(thr.sqrt());
    let sign = if below { -1.0 } else { 1.0 };
    // distance grows linearly in the offset; find the offset by bisection
    let dist = |o: f64| fiber_distance(&target, &at(thr.sqrt() + sign * o));
    let (mut lo, mut hi) = (0.0, 1.0);
    while dist(hi)? < delta {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist(mid)? < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let moved = at(thr.sqrt() + sign * 0.5 * (lo + hi));
    Ok((target, moved))
}

/// One oracle test pair; `None` stands for the cone point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPair {
    pub dim: usize,
    pub a0: Option<Vec<f64>>,
    pub a1: Option<Vec<f64>>,
}

impl CorpusPair {
    pub fn from_points(p0: &FiberPoint<f64>, p1: &FiberPoint<f64>) -> Self {
        let m = |p: &FiberPoint<f64>| p.as_spd().map(|a| a.as_sym().as_slice().to_vec());
        Self {
            dim: p0.dim(),
            a0: m(p0),
            a1: m(p1),
        }
    }

    pub fn points(&self) -> Result<(FiberPoint<f64>, FiberPoint<f64>)> {
        let p = |m: &Option<Vec<f64>>| match m {
            Some(data) => FiberPoint::spd(SymTensor::from_row_major(self.dim, data)?),
            None => Ok(FiberPoint::cone(self.dim)),
        };
        Ok((p(&self.a0)?, p(&self.a1)?))
    }
}

/// The fixed oracle corpus: the two worked pairs followed by seeded random
/// pairs in dimensions 2 and 3 cycling through Riemannian, cone-case,
/// conformal and cone-endpoint pairs.
pub fn oracle_corpus(size: usize, seed: u64) -> Vec<CorpusPair> {
    let eye = FiberPoint::Spd(SpdTensor::identity(2));
    let mut out = vec![
        CorpusPair::from_points(&eye, &FiberPoint::Spd(SpdTensor::identity(2).scaled(4.0))),
        CorpusPair::from_points(
            &eye,
            &FiberPoint::Spd(sym_exp(&SymTensor::diag(&[10.0, -10.0])).expect("finite")),
        ),
    ];
    let mut trial = 0u64;
    while out.len() < size {
        let mut rng = trial_rng(seed, trial);
        let n = 2 + (trial as usize / 4) % 2;
        let (p0, p1): (FiberPoint<f64>, FiberPoint<f64>) = match trial % 4 {
            0 => {
                let (a0, a1) = riemannian_pair(&mut rng, n, 0.9 * std::f64::consts::PI);
                (a0.into(), a1.into())
            }
            1 => {
                let (a0, a1) = cone_pair(&mut rng, n);
                (a0.into(), a1.into())
            }
            2 => {
                let a = random_spd(&mut rng, n, 1.0);
                let c = rng.random_range(-2.0f64..2.0).exp();
                (FiberPoint::Spd(a.clone()), FiberPoint::Spd(a.scaled(c)))
            }
            _ => (FiberPoint::Spd(random_spd(&mut rng, n, 1.0)), FiberPoint::cone(n)),
        };
        out.push(CorpusPair::from_points(&p0, &p1));
        trial += 1;
    }
    out.truncate(size);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEntry {
    pub index: usize,
    pub dim: usize,
    pub case: CaseTag,
    pub closed_form: f64,
    pub oracle: f64,
    /// `(oracle − closed_form) / closed_form`
    pub relative_error: f64,
    pub min_fourth_root_det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub pairs: usize,
    pub config: OracleConfig,
    pub max_relative_error: f64,
    /// Largest `(closed_form − oracle) / closed_form`, i.e. how far the
    /// oracle beat the closed form.
    pub max_undercut: f64,
    pub entries: Vec<OracleEntry>,
    pub pass: bool,
}

/// Runs the brute-force oracle on every pair and compares with the closed
/// form: agreement within `3%`, undercut at most `0.1%`.
pub fn oracle_sweep(corpus: &[CorpusPair], cfg: &OracleConfig) -> Result<OracleReport> {
    cfg.validate()?;
    let entries = corpus
        .par_iter()
        .enumerate()
        .map(|(index, pair)| {
            let (p0, p1) = pair.points()?;
            if p0.is_cone() && p1.is_cone() {
                return Err(GeoError::invalid(format!("corpus pair {index} has two cone endpoints")));
            }
            let closed_form = fiber_distance(&p0, &p1)?;
            let cfg = OracleConfig {
                seed: cfg.seed.wrapping_add(index as u64),
                ..*cfg
            };
            let (oracle, min_fourth_root_det) = if p0 == p1 {
                (0.0, p0.fourth_root_det())
            } else {
                let path = brute_force_path(&p0, &p1, &cfg)?;
                (path.length, path.min_fourth_root_det)
            };
            let relative_error = if closed_form > 0.0 {
                (oracle - closed_form) / closed_form
            } else {
                oracle
            };
            Ok(OracleEntry {
                index,
                dim: pair.dim,
                case: classify(&p0, &p1)?.tag,
                closed_form,
                oracle,
                relative_error,
                min_fourth_root_det,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_error = max(entries.iter().map(|e| e.relative_error.abs()));
    let max_undercut = entries.iter().map(|e| -e.relative_error).fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleReport {
        pairs: entries.len(),
        config: *cfg,
        max_relative_error,
        max_undercut,
        pass: max_relative_error <= 0.03 && max_undercut <= 1e-3,
        entries,
    })
}

fn random_field_pair(rng: &mut impl Rng, n: usize, grid: &Arc<SampleGrid<f64>>) -> Result<(MetricField<f64>, MetricField<f64>)> {
    let mut v0 = Vec::with_capacity(grid.len());
    let mut v1 = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let (p, q): (FiberPoint<f64>, FiberPoint<f64>) = match rng.random_range(0..6) {
            0 | 1 => {
                let (a0, a1) = riemannian_pair(rng, n, MAX_RIEMANNIAN_ANGLE);
                (a0.into(), a1.into())
            }
            2 | 3 => {
                let (a0, a1) = cone_pair(rng, n);
                (a0.into(), a1.into())
            }
            4 => (FiberPoint::Spd(random_spd(rng, n, 1.0)), FiberPoint::cone(n)),
            _ => (mixed_point(rng, n), mixed_point(rng, n)),
        };
        v0.push(p);
        v1.push(q);
    }
    Ok((MetricField::new(grid.clone(), v0)?, MetricField::new(grid.clone(), v1)?))
}

/// Smooth SPD curve `exp((1 − t)X₀ + tX₁ + sin(πt)·Y)` sampled at `times`,
/// or the cone point throughout.
fn random_curve(rng: &mut impl Rng, n: usize, times: &[f64]) -> Result<Vec<FiberPoint<f64>>> {
    if rng.random_range(0..8) == 0 {
        return Ok(vec![FiberPoint::cone(n); times.len()]);
    }
    let x0 = random_direction(rng, n).scale(rng.random_range(0.0..3.0));
    let x1 = random_direction(rng, n).scale(rng.random_range(0.0..3.0));
    let y = random_direction(rng, n).scale(rng.random_range(0.0..2.0));
    times
        .iter()
        .map(|&t| {
            let log = &(&x0.scale(1.0 - t) + &x1.scale(t)) + &y.scale((std::f64::consts::PI * t).sin());
            Ok(FiberPoint::Spd(sym_exp(&log)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCoherenceReport {
    pub seed: u64,
    pub grid_size: usize,
    pub geodesic_trials: usize,
    pub samples: usize,
    /// `max |L(sampled field geodesic) − d| / d`
    pub max_length_error: f64,
    pub path_trials: usize,
    /// `min (L² − Σ_i w_i·L_i²)` over random sampled field paths.
    pub min_inequality_slack: f64,
    pub oracle_trials: usize,
    /// Largest `(d − oracle bound) / d`; positive when the oracle found a
    /// shorter path than the closed form allows.
    pub max_oracle_undercut: f64,
    pub pass: bool,
}

/// Field-level consistency: sampled field geodesics have length equal to
/// the field distance, the length of any sampled field path dominates the
/// weighted L² norm of its sample-path lengths, and brute-force paths do
/// not beat the field distance.
pub fn field_coherence_sweep(
    seed: u64,
    grid_size: usize,
    geodesic_trials: usize,
    path_trials: usize,
    oracle_trials: usize,
    cfg: &OracleConfig,
) -> Result<FieldCoherenceReport> {
    const SAMPLES: usize = 65;
    let geodesic_errors = (0..geodesic_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let n = 2 + (trial as usize) % 2;
            let grid = Arc::new(SampleGrid::uniform(n, grid_size)?);
            let (f0, f1) = random_field_pair(&mut rng, n, &grid)?;
            let d = field_distance(&f0, &f1)?;
            let path = FieldGeodesic::new(&f0, &f1)?.sample(SAMPLES)?;
            let length = field_path_length(&path)?.total;
            Ok(if d > 0.0 { (length - d).abs() / d } else { length })
        })
        .collect::<Result<Vec<_>>>()?;

    let slacks = (0..path_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed ^ 0x9e37_79b9, trial);
            let n = 2 + (trial as usize) % 2;
            let grid = Arc::new(SampleGrid::uniform(n, grid_size)?);
            let times = sample_times(rng.random_range(9..66), None)?;
            let curves = (0..grid_size)
                .map(|_| random_curve(&mut rng, n, &times))
                .collect::<Result<Vec<_>>>()?;
            let fields = (0..times.len())
                .map(|k| MetricField::new(grid.clone(), curves.iter().map(|c| c[k].clone()).collect()))
                .collect::<Result<Vec<_>>>()?;
            let length = field_path_length(&FieldPath::new(times, fields)?)?;
            let bound = weighted_l2(grid.weights(), &length.per_sample);
            Ok(length.total * length.total - bound * bound)
        })
        .collect::<Result<Vec<_>>>()?;

    let undercuts = (0..oracle_trials as u64)
        .map(|trial| {
            let mut rng = trial_rng(seed ^ 0x51_7cc1, trial);
            let n = 2 + (trial as usize) % 2;
            let grid = Arc::new(SampleGrid::uniform(n, 4)?);
            let (f0, f1) = random_field_pair(&mut rng, n, &grid)?;
            let d = field_distance(&f0, &f1)?;
            let cfg = OracleConfig {
                seed: cfg.seed.wrapping_add(trial),
                ..*cfg
            };
            let bound = brute_force_field_distance(&f0, &f1, &cfg)?;
            Ok((d - bound) / d)
        })
        .collect::<Result<Vec<_>>>()?;

    let max_length_error = max(geodesic_errors.into_iter());
    let min_inequality_slack = min(slacks.into_iter());
    let max_oracle_undercut = undercuts.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(FieldCoherenceReport {
        seed,
        grid_size,
        geodesic_trials,
        samples: SAMPLES,
        max_length_error,
        path_trials,
        min_inequality_slack,
        oracle_trials,
        max_oracle_undercut,
        pass: max_length_error <= 1e-3 && min_inequality_slack >= -1e-9 && max_oracle_undercut <= 0.02,
    })
}
