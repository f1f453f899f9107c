//! Small dense symmetric-matrix algebra.
//!
//! Every tensor is expressed in a frame in which the fixed reference metric
//! is the identity, so `A = g⁻¹a` is just the stored matrix and the
//! determinant, square and fourth roots of `A` are those of the entries.
//! Dimensions are small (2 to 4 in practice, at most a handful), so all
//! storage is a flat row-major `Vec` and the eigensolver is cyclic Jacobi.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{GeoError, Result};
use crate::scalar::Scalar;

const MAX_JACOBI_SWEEPS: usize = 64;

/// Dense square matrix, row-major. Used for eigenvector frames and for
/// orthogonal changes of basis; symmetric data lives in [`SymTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(GeoError::invalid(format!(
                "expected {dim}x{dim} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { dim: n, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: matmul(self.dim, &self.data, &other.data),
        }
    }

    /// Largest entrywise deviation of `selfᵀ·self` from the identity.
    pub fn orthogonality_defect(&self) -> T {
        let g = self.transpose().matmul(self);
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }
}

fn matmul<T: Scalar>(n: usize, a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + aik * b[k * n + j];
            }
        }
    }
    out
}

/// Symmetric `(0,2)`-tensor at a point. Symmetry is enforced by every
/// constructor: the stored matrix satisfies `m[i][j] == m[j][i]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymTensor<T> {
    /// Builds a tensor from row-major entries, replacing the matrix by its
    /// symmetric part. Use [`asymmetry`] first when the caller needs to warn
    /// about inputs that were not symmetric to begin with.
    pub fn from_row_major(dim: usize, data: &[T]) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(GeoError::invalid(format!(
                "expected {} entries for a {dim}x{dim} tensor, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(GeoError::invalid("tensor has non-finite entries"));
        }
        let half = T::lit(0.5);
        Ok(Self::from_fn(dim, |i, j| {
            if i == j {
                data[i * dim + i]
            } else {
                half * (data[i * dim + j] + data[j * dim + i])
            }
        }))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(GeoError::invalid("rows must form a square matrix"));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        Self::from_row_major(dim, &flat)
    }

    /// Builds a tensor from `f(i, j)` evaluated on the upper triangle `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, c: T) -> Self {
        Self::from_fn(dim, |i, j| if i == j { c } else { T::zero() })
    }

    pub fn diag(values: &[T]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { T::zero() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `tr(self · other)` for two symmetric matrices.
    pub fn frobenius_dot(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    /// `m · self · m` for a symmetric `m`.
    pub fn sandwich(&self, m: &SymTensor<T>) -> Self {
        let n = self.dim;
        let prod = matmul(n, &matmul(n, &m.data, &self.data), &m.data);
        symmetrize(n, &prod)
    }

    /// `oᵀ · self · o`.
    pub fn conjugate(&self, o: &SquareMatrix<T>) -> Self {
        let n = self.dim;
        let ot = o.transpose();
        let prod = matmul(n, &matmul(n, &ot.data, &self.data), &o.data);
        symmetrize(n, &prod)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(GeoError::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

fn symmetrize<T: Scalar>(n: usize, m: &[T]) -> SymTensor<T> {
    let half = T::lit(0.5);
    SymTensor::from_fn(n, |i, j| {
        if i == j {
            m[i * n + i]
        } else {
            half * (m[i * n + j] + m[j * n + i])
        }
    })
}

/// Largest `|m[i][j] - m[j][i]|` of a row-major square matrix.
pub fn asymmetry<T: Scalar>(dim: usize, data: &[T]) -> T {
    let mut worst = T::zero();
    for i in 0..dim {
        for j in (i + 1)..dim {
            worst = worst.max((data[i * dim + j] - data[j * dim + i]).abs());
        }
    }
    worst
}

impl<T: Scalar> Add for &SymTensor<T> {
    type Output = SymTensor<T>;
    fn add(self, rhs: Self) -> SymTensor<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        SymTensor {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &SymTensor<T> {
    type Output = SymTensor<T>;
    fn sub(self, rhs: Self) -> SymTensor<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        SymTensor {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul<T> for &SymTensor<T> {
    type Output = SymTensor<T>;
    fn mul(self, rhs: T) -> SymTensor<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Neg for &SymTensor<T> {
    type Output = SymTensor<T>;
    fn neg(self) -> SymTensor<T> {
        self.scale(-T::one())
    }
}

/// Eigendecomposition `s = frame · diag(values) · frameᵀ`, eigenvalues
/// sorted in descending order, eigenvectors in the columns of `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem<T> {
    pub values: Vec<T>,
    pub frame: SquareMatrix<T>,
}

impl<T: Scalar> EigenSystem<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `frame · diag(f(λ)) · frameᵀ`.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> SymTensor<T> {
        let n = self.dim();
        let mapped: Vec<T> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.frame;
        SymTensor::from_fn(n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| acc + v.get(i, k) * mapped[k] * v.get(j, k))
        })
    }

    pub fn reconstruct(&self) -> SymTensor<T> {
        self.map(|v| v)
    }

    pub fn min_value(&self) -> T {
        *self.values.last().expect("non-empty eigensystem")
    }

    pub fn max_value(&self) -> T {
        self.values[0]
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eigen<T: Scalar>(s: &SymTensor<T>) -> Result<EigenSystem<T>> {
    if !s.is_finite() {
        return Err(GeoError::invalid("eigendecomposition of non-finite tensor"));
    }
    let n = s.dim;
    let mut a = s.data.clone();
    let mut v = SquareMatrix::<T>::identity(n).data;
    let scale = s.frobenius_norm();
    let tol = T::JACOBI_TOL * scale;

    for _ in 0..MAX_JACOBI_SWEEPS {
        let off = off_diagonal_norm(n, &a);
        if off <= tol || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                let t = if theta.abs() > T::lit(1e150).min(T::max_value().sqrt()) {
                    T::one() / (T::lit(2.0) * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut frame = vec![T::zero(); n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            frame[row * n + col] = v[row * n + src];
        }
    }
    Ok(EigenSystem {
        values,
        frame: SquareMatrix { dim: n, data: frame },
    })
}

fn off_diagonal_norm<T: Scalar>(n: usize, a: &[T]) -> T {
    let mut sum = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum = sum + a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Positive-definite symmetric tensor together with its eigensystem.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdTensor<T> {
    base: SymTensor<T>,
    eigen: EigenSystem<T>,
}

impl<T: Scalar> SpdTensor<T> {
    /// Validates positivity with the default tolerance
    /// (`min λ > POSITIVITY_TOL · max λ`).
    pub fn new(base: SymTensor<T>) -> Result<Self> {
        Self::with_tolerance(base, T::POSITIVITY_TOL)
    }

    pub fn with_tolerance(base: SymTensor<T>, tol: T) -> Result<Self> {
        let eigen = sym_eigen(&base)?;
        let (lo, hi) = (eigen.min_value(), eigen.max_value());
        if !(hi > T::zero() && lo > tol * hi) {
            return Err(GeoError::NotPositiveDefinite {
                min_eigenvalue: lo.to_f64_lossy(),
                max_eigenvalue: hi.to_f64_lossy(),
            });
        }
        Ok(Self { base, eigen })
    }

    /// Accepts any tensor whose eigenvalues are strictly positive. Meant for
    /// values produced by exp/scaling of known SPD data, where the relative
    /// positivity tolerance would reject legitimately ill-conditioned results.
    pub(crate) fn from_computed(base: SymTensor<T>) -> Result<Self> {
        Self::with_tolerance(base, T::zero())
    }

    fn from_eigen(eigen: EigenSystem<T>) -> Self {
        Self {
            base: eigen.reconstruct(),
            eigen,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_eigen(EigenSystem {
            values: vec![T::one(); dim],
            frame: SquareMatrix::identity(dim),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn as_sym(&self) -> &SymTensor<T> {
        &self.base
    }

    pub fn into_sym(self) -> SymTensor<T> {
        self.base
    }

    pub fn eigen(&self) -> &EigenSystem<T> {
        &self.eigen
    }

    pub fn det(&self) -> T {
        self.eigen.values.iter().fold(T::one(), |acc, &v| acc * v)
    }

    /// `√det A`, the volume density of the tensor relative to the reference.
    pub fn sqrt_det(&self) -> T {
        self.eigen.values.iter().fold(T::one(), |acc, &v| acc * v.sqrt())
    }

    /// `⁴√det A`.
    pub fn fourth_root_det(&self) -> T {
        let quarter = T::lit(0.25);
        self.eigen
            .values
            .iter()
            .fold(T::one(), |acc, &v| acc * v.powf(quarter))
    }

    pub fn powf(&self, p: T) -> SpdTensor<T> {
        self.map_values(|v| v.powf(p))
    }

    pub fn sqrt(&self) -> SpdTensor<T> {
        self.map_values(|v| v.sqrt())
    }

    pub fn inv_sqrt(&self) -> SpdTensor<T> {
        self.map_values(|v| T::one() / v.sqrt())
    }

    pub fn inverse(&self) -> SpdTensor<T> {
        self.map_values(|v| T::one() / v)
    }

    pub fn log(&self) -> SymTensor<T> {
        self.eigen.map(|v| v.ln())
    }

    /// `c · self` for `c > 0`, reusing the eigenframe.
    pub fn scaled(&self, c: T) -> SpdTensor<T> {
        debug_assert!(c > T::zero());
        Self {
            base: self.base.scale(c),
            eigen: EigenSystem {
                values: self.eigen.values.iter().map(|&v| v * c).collect(),
                frame: self.eigen.frame.clone(),
            },
        }
    }

    /// `self^{-1/2} · b · self^{-1/2}`: the coordinates of `b` in a frame
    /// orthonormal for `self`. Traces `tr_a(·)` become plain traces there.
    pub fn whiten(&self, b: &SymTensor<T>) -> SymTensor<T> {
        let n = self.dim();
        let inv_sqrt: Vec<T> = self.eigen.values.iter().map(|&v| T::one() / v.sqrt()).collect();
        let rotated = b.conjugate(&self.eigen.frame);
        let scaled = SymTensor::from_fn(n, |i, j| rotated.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
        scaled.conjugate(&self.eigen.frame.transpose())
    }

    /// Inverse of [`SpdTensor::whiten`]: `self^{1/2} · w · self^{1/2}`.
    pub fn unwhiten(&self, w: &SymTensor<T>) -> SymTensor<T> {
        let n = self.dim();
        let sqrt: Vec<T> = self.eigen.values.iter().map(|&v| v.sqrt()).collect();
        let rotated = w.conjugate(&self.eigen.frame);
        let scaled = SymTensor::from_fn(n, |i, j| rotated.get(i, j) * sqrt[i] * sqrt[j]);
        scaled.conjugate(&self.eigen.frame.transpose())
    }

    fn map_values(&self, f: impl Fn(T) -> T) -> SpdTensor<T> {
        Self::from_eigen(EigenSystem {
            values: self.eigen.values.iter().map(|&v| f(v)).collect(),
            frame: self.eigen.frame.clone(),
        })
    }
}

/// Matrix exponential of a symmetric tensor.
pub fn sym_exp<T: Scalar>(s: &SymTensor<T>) -> Result<SpdTensor<T>> {
    let eigen = sym_eigen(s)?;
    let values = eigen.values.iter().map(|&v| v.exp()).collect::<Vec<_>>();
    if values.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
        return Err(GeoError::invalid("matrix exponential over- or underflows"));
    }
    Ok(SpdTensor::from_eigen(EigenSystem {
        values,
        frame: eigen.frame,
    }))
}

pub fn spd_log<T: Scalar>(p: &SpdTensor<T>) -> SymTensor<T> {
    p.log()
}

pub fn spd_sqrt<T: Scalar>(p: &SpdTensor<T>) -> SpdTensor<T> {
    p.sqrt()
}

/// Logarithm of a raw symmetric tensor; refuses anything that fails the
/// default positivity test instead of regularizing it.
pub fn checked_log<T: Scalar>(s: &SymTensor<T>) -> Result<SymTensor<T>> {
    Ok(SpdTensor::new(s.clone())?.log())
}

/// `tr_a(bc) = tr(a⁻¹ b a⁻¹ c)`.
pub fn trace_pair<T: Scalar>(a: &SpdTensor<T>, b: &SymTensor<T>, c: &SymTensor<T>) -> Result<T> {
    a.as_sym().check_same_dim(b)?;
    a.as_sym().check_same_dim(c)?;
    Ok(a.whiten(b).frobenius_dot(&a.whiten(c)))
}

/// The fiber metric `⟨b, c⟩_a = tr_a(bc) · √det A`.
pub fn fiber_inner<T: Scalar>(a: &SpdTensor<T>, b: &SymTensor<T>, c: &SymTensor<T>) -> Result<T> {
    Ok(trace_pair(a, b, c)? * a.sqrt_det())
}

/// `|b|_a = ⟨b, b⟩_a^{1/2}`.
pub fn fiber_norm<T: Scalar>(a: &SpdTensor<T>, b: &SymTensor<T>) -> Result<T> {
    Ok(fiber_inner(a, b, b)?.max(T::zero()).sqrt())
}

/// Splits `b` into its pure-trace scalar `tr_{a0} b` and its traceless part
/// `b_T = b − (1/n)(tr_{a0} b)·a0`.
pub fn traceless_split<T: Scalar>(a0: &SpdTensor<T>, b: &SymTensor<T>) -> Result<(T, SymTensor<T>)> {
    a0.as_sym().check_same_dim(b)?;
    let n = T::from_usize_lossy(a0.dim());
    let trace = a0.whiten(b).trace();
    let bt = b - &a0.as_sym().scale(trace / n);
    Ok((trace, bt))
}

/// Re-expresses `a` in the frame where `reference` is the identity:
/// `reference^{-1/2} · a · reference^{-1/2}`.
pub fn whiten_against<T: Scalar>(a: &SymTensor<T>, reference: &SpdTensor<T>) -> Result<SymTensor<T>> {
    reference.as_sym().check_same_dim(a)?;
    Ok(reference.whiten(a))
}
