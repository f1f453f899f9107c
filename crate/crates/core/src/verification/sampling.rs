//! Seeded random tensors and pairs for sweeps.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fiber::{cone_threshold, FiberPoint};
use crate::spd::{sym_exp, SpdTensor, SquareMatrix, SymTensor};

/// Generator for trial `trial` of a run seeded with `seed`. Streams make
/// every trial independent of scheduling order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random orthogonal matrix (Gram-Schmidt on a Gaussian matrix).
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> SquareMatrix<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        // two passes keep the columns orthogonal to working precision
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let data = (0..n * n).map(|k| cols[k % n][k / n]).collect();
    SquareMatrix::from_row_major(n, data).expect("square by construction")
}

/// Symmetric matrix with independent Gaussian entries, scaled to unit
/// Frobenius norm.
pub fn random_direction(rng: &mut impl Rng, n: usize) -> SymTensor<f64> {
    loop {
        let s = SymTensor::from_fn(n, |_, _| gaussian(rng));
        let norm = s.frobenius_norm();
        if norm > 1e-8 {
            return s.scale(1.0 / norm);
        }
    }
}

/// Unit-norm traceless direction.
pub fn random_traceless_direction(rng: &mut impl Rng, n: usize) -> SymTensor<f64> {
    loop {
        let s = random_direction(rng, n);
        let t = &s - &SymTensor::scaled_identity(n, s.trace() / n as f64);
        let norm = t.frobenius_norm();
        if norm > 1e-8 {
            return t.scale(1.0 / norm);
        }
    }
}

/// `O·diag(exp(u))·Oᵀ` with `u` uniform in `[-spread, spread]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, spread: f64) -> SpdTensor<f64> {
    let o = random_orthogonal(rng, n);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..=spread)).collect();
    let d = SymTensor::diag(&u.iter().map(|x| x.exp()).collect::<Vec<_>>());
    SpdTensor::new(d.conjugate(&o.transpose())).expect("well conditioned by construction")
}

/// `a0^{1/2}·exp(L)·a0^{1/2}` where `L` has trace `trace` and traceless part
/// of squared norm `traceless_sq` along `direction`.
pub fn displaced(a0: &SpdTensor<f64>, direction: &SymTensor<f64>, traceless_sq: f64, trace: f64) -> SpdTensor<f64> {
    let n = a0.dim();
    let log = &direction.scale(traceless_sq.sqrt()) + &SymTensor::scaled_identity(n, trace / n as f64);
    let rel = sym_exp(&log).expect("moderate exponent");
    SpdTensor::new(a0.unwhiten(rel.as_sym())).expect("positive by construction")
}

/// A pair whose log-coordinates have `tr_{a0}(k_T²) = fraction·(4π)²/n`.
pub fn pair_at_fraction(rng: &mut impl Rng, n: usize, fraction: f64) -> (SpdTensor<f64>, SpdTensor<f64>) {
    let a0 = random_spd(rng, n, 1.0);
    let dir = random_traceless_direction(rng, n);
    let trace = rng.random_range(-2.0..=2.0);
    let a1 = displaced(&a0, &dir, fraction * cone_threshold::<f64>(n), trace);
    (a0, a1)
}

/// Pair joined by a Riemannian geodesic, `θ` uniform in `[0, max_angle)`
/// where `θ = π` is the threshold.
pub fn riemannian_pair(rng: &mut impl Rng, n: usize, max_angle: f64) -> (SpdTensor<f64>, SpdTensor<f64>) {
    let ratio: f64 = rng.random_range(0.0..max_angle) / std::f64::consts::PI;
    pair_at_fraction(rng, n, ratio * ratio)
}

/// Pair beyond the threshold, joined through the cone point.
pub fn cone_pair(rng: &mut impl Rng, n: usize) -> (SpdTensor<f64>, SpdTensor<f64>) {
    let ratio: f64 = rng.random_range(1.02..2.0);
    pair_at_fraction(rng, n, ratio * ratio)
}

/// Spectral condition number.
pub fn condition(a: &SpdTensor<f64>) -> f64 {
    a.eigen().max_value() / a.eigen().min_value()
}

/// [`cone_pair`] redrawn until both endpoints have condition number at most
/// `max_condition`.
pub fn conditioned_cone_pair(rng: &mut impl Rng, n: usize, max_condition: f64) -> (SpdTensor<f64>, SpdTensor<f64>) {
    loop {
        let (a0, a1) = cone_pair(rng, n);
        if condition(&a0) <= max_condition && condition(&a1) <= max_condition {
            return (a0, a1);
        }
    }
}

/// A fiber point drawn from a mixture of well-conditioned, strongly
/// anisotropic, near-degenerate and cone points.
pub fn mixed_point(rng: &mut impl Rng, n: usize) -> FiberPoint<f64> {
    match rng.random_range(0..10) {
        0 => FiberPoint::cone(n),
        1 => {
            // one eigenvalue near the boundary
            let o = random_orthogonal(rng, n);
            let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            d[0] = 10f64.powf(rng.random_range(-9.0..-4.0));
            FiberPoint::Spd(SpdTensor::new(SymTensor::diag(&d).conjugate(&o.transpose())).unwrap())
        }
        2..=4 => FiberPoint::Spd(random_spd(rng, n, 4.0)),
        _ => FiberPoint::Spd(random_spd(rng, n, 1.0)),
    }
}

/// Vertex for triangle sweeps: `exp(X)` with `X` of random direction and
/// norm up to `radius`, so pairs land on both sides of the threshold.
pub fn log_ball_point(rng: &mut impl Rng, n: usize, radius: f64) -> SpdTensor<f64> {
    let dir = random_direction(rng, n);
    let r = rng.random_range(0.0..radius);
    sym_exp(&dir.scale(r)).expect("bounded exponent")
}
