//! Tensor fields over a weighted sample grid and the L² distance between them.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::fiber::{
    classify, fiber_distance, interval_lengths, sample_times, validate_times, CaseTag, FiberGeodesic, FiberPoint,
    GeodesicCase, SampledPath,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub id: String,
    pub weight: T,
}

/// Quadrature atoms of a unit-volume measure on the base manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid<T> {
    dim: usize,
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> SampleGrid<T> {
    pub fn new(dim: usize, samples: Vec<Sample<T>>) -> Result<Self> {
        Self::check_shape(dim, &samples)?;
        let total = samples.iter().fold(T::zero(), |acc, s| acc + s.weight);
        if (total - T::one()).abs() > T::WEIGHT_SUM_TOL {
            return Err(GeoError::invalid(format!(
                "grid weights sum to {total}, expected 1 (normalize the weights to accept this grid)"
            )));
        }
        Ok(Self { dim, samples })
    }

    /// Rescales the weights to sum to one.
    pub fn normalized(dim: usize, mut samples: Vec<Sample<T>>) -> Result<Self> {
        Self::check_shape(dim, &samples)?;
        let total = samples.iter().fold(T::zero(), |acc, s| acc + s.weight);
        for s in &mut samples {
            s.weight = s.weight / total;
        }
        Self::new(dim, samples)
    }

    /// `k` samples named `0..k` with equal weights.
    pub fn uniform(dim: usize, k: usize) -> Result<Self> {
        let w = T::one() / T::from_usize_lossy(k);
        Self::normalized(
            dim,
            (0..k).map(|i| Sample { id: i.to_string(), weight: w }).collect(),
        )
    }

    fn check_shape(dim: usize, samples: &[Sample<T>]) -> Result<()> {
        if dim == 0 {
            return Err(GeoError::invalid("grid dimension must be positive"));
        }
        if samples.is_empty() {
            return Err(GeoError::invalid("grid has no samples"));
        }
        let mut seen = HashSet::new();
        for s in samples {
            if !seen.insert(s.id.as_str()) {
                return Err(GeoError::invalid(format!("duplicate sample id {:?}", s.id)));
            }
            if !(s.weight > T::zero()) || !s.weight.is_finite() {
                return Err(GeoError::invalid(format!("sample {:?} has non-positive weight", s.id)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|s| s.weight)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.id == id)
    }
}

/// One fiber point per grid sample, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField<T> {
    grid: Arc<SampleGrid<T>>,
    values: Vec<FiberPoint<T>>,
}

impl<T: Scalar> MetricField<T> {
    pub fn new(grid: Arc<SampleGrid<T>>, values: Vec<FiberPoint<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GeoError::invalid(format!(
                "field has {} values for {} samples",
                values.len(),
                grid.len()
            )));
        }
        if let Some(p) = values.iter().find(|p| p.dim() != grid.dim()) {
            return Err(GeoError::invalid(format!(
                "field value of dimension {} on a grid of dimension {}",
                p.dim(),
                grid.dim()
            )));
        }
        Ok(Self { grid, values })
    }

    /// The same fiber point at every sample.
    pub fn constant(grid: Arc<SampleGrid<T>>, value: FiberPoint<T>) -> Result<Self> {
        let values = vec![value; grid.len()];
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<SampleGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[FiberPoint<T>] {
        &self.values
    }

    pub fn get(&self, id: &str) -> Option<&FiberPoint<T>> {
        self.grid.index_of(id).map(|i| &self.values[i])
    }

    /// Same degeneracy set and pointwise distance zero elsewhere: the two
    /// fields represent the same element of the completion.
    pub fn equivalent(&self, other: &Self, tol: T) -> Result<bool> {
        check_same_grid(self, other)?;
        for (p, q) in self.values.iter().zip(&other.values) {
            match (p, q) {
                (FiberPoint::Cone { .. }, FiberPoint::Cone { .. }) => {}
                (FiberPoint::Spd(_), FiberPoint::Spd(_)) => {
                    if fiber_distance(p, q)? > tol {
                        return Ok(false);
                    }
                }
                _ => return Ok(false),
            }
        }
        Ok(true)
    }
}

fn check_same_grid<T: Scalar>(f0: &MetricField<T>, f1: &MetricField<T>) -> Result<()> {
    if Arc::ptr_eq(&f0.grid, &f1.grid) || f0.grid == f1.grid {
        Ok(())
    } else {
        Err(GeoError::invalid("fields live on different grids"))
    }
}

/// Per-sample fiber distances, in grid order.
pub fn sample_distances<T: Scalar>(f0: &MetricField<T>, f1: &MetricField<T>) -> Result<Vec<T>> {
    check_same_grid(f0, f1)?;
    f0.values
        .par_iter()
        .zip(&f1.values)
        .map(|(p, q)| fiber_distance(p, q))
        .collect()
}

/// `(Σ_i w_i·d_i²)^{1/2}`
pub fn weighted_l2<T: Scalar>(weights: impl Iterator<Item = T>, values: &[T]) -> T {
    weights
        .zip(values)
        .fold(T::zero(), |acc, (w, d)| acc + w * *d * *d)
        .sqrt()
}

/// Distance between fields: the weighted L² norm of the pointwise distances.
pub fn field_distance<T: Scalar>(f0: &MetricField<T>, f1: &MetricField<T>) -> Result<T> {
    let d = sample_distances(f0, f1)?;
    Ok(weighted_l2(f0.grid.weights(), &d))
}

/// The minimal path between two fields, built pointwise from fiber geodesics.
#[derive(Debug, Clone)]
pub struct FieldGeodesic<T> {
    grid: Arc<SampleGrid<T>>,
    paths: Vec<FiberGeodesic<T>>,
}

impl<T: Scalar> FieldGeodesic<T> {
    pub fn new(f0: &MetricField<T>, f1: &MetricField<T>) -> Result<Self> {
        check_same_grid(f0, f1)?;
        let paths = f0
            .values
            .par_iter()
            .zip(&f1.values)
            .map(|(p, q)| FiberGeodesic::new(p.clone(), q.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: f0.grid.clone(),
            paths,
        })
    }

    pub fn grid(&self) -> &Arc<SampleGrid<T>> {
        &self.grid
    }

    pub fn sample_paths(&self) -> &[FiberGeodesic<T>] {
        &self.paths
    }

    pub fn length(&self) -> T {
        let lengths: Vec<T> = self.paths.iter().map(|p| p.length()).collect();
        weighted_l2(self.grid.weights(), &lengths)
    }

    pub fn at(&self, t: T) -> Result<MetricField<T>> {
        let values = self.paths.iter().map(|p| p.at(t)).collect::<Result<Vec<_>>>()?;
        MetricField::new(self.grid.clone(), values)
    }

    /// Times at which some sample passes through the cone point.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = self
            .paths
            .iter()
            .filter_map(|p| p.cone_time())
            .filter(|&t| t > T::zero() && t < T::one())
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        out.dedup();
        out
    }

    /// Samples the path at `samples` uniform times plus every breakpoint.
    pub fn sample(&self, samples: usize) -> Result<FieldPath<T>> {
        let mut times = sample_times(samples, None)?;
        for b in self.breakpoints() {
            if !times.contains(&b) {
                let at = times.partition_point(|&t| t < b);
                times.insert(at, b);
            }
        }
        let fields = times
            .par_iter()
            .map(|&t| self.at(t))
            .collect::<Result<Vec<_>>>()?;
        FieldPath::new(times, fields)
    }
}

/// Value of the field geodesic from `f0` to `f1` at `t`.
pub fn field_geodesic<T: Scalar>(f0: &MetricField<T>, f1: &MetricField<T>, t: T) -> Result<MetricField<T>> {
    FieldGeodesic::new(f0, f1)?.at(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldClassification<T> {
    pub cases: Vec<GeodesicCase<T>>,
    /// Samples where both fields are positive definite.
    pub mask_n: Vec<String>,
    /// Samples joined by a Riemannian geodesic.
    pub mask_p: Vec<String>,
}

pub fn classify_fields<T: Scalar>(f0: &MetricField<T>, f1: &MetricField<T>) -> Result<FieldClassification<T>> {
    check_same_grid(f0, f1)?;
    let cases = f0
        .values
        .iter()
        .zip(&f1.values)
        .map(|(p, q)| classify(p, q))
        .collect::<Result<Vec<_>>>()?;
    let ids = f0.grid.samples.iter().map(|s| &s.id);
    let mut mask_n = Vec::new();
    let mut mask_p = Vec::new();
    for (id, case) in ids.zip(&cases) {
        match case.tag {
            CaseTag::Riemannian => {
                mask_n.push(id.clone());
                mask_p.push(id.clone());
            }
            CaseTag::ConeConcatenation => mask_n.push(id.clone()),
            _ => {}
        }
    }
    Ok(FieldClassification { cases, mask_n, mask_p })
}

/// A field path known at finitely many times.
#[derive(Debug, Clone)]
pub struct FieldPath<T> {
    times: Vec<T>,
    fields: Vec<MetricField<T>>,
}

impl<T: Scalar> FieldPath<T> {
    pub fn new(times: Vec<T>, fields: Vec<MetricField<T>>) -> Result<Self> {
        validate_times(&times)?;
        if times.len() != fields.len() {
            return Err(GeoError::invalid("field path needs one field per time"));
        }
        for f in &fields[1..] {
            check_same_grid(&fields[0], f)?;
        }
        Ok(Self { times, fields })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn fields(&self) -> &[MetricField<T>] {
        &self.fields
    }

    pub fn grid(&self) -> &Arc<SampleGrid<T>> {
        self.fields[0].grid()
    }

    /// The path followed by sample `i`.
    pub fn sample_path(&self, i: usize) -> Result<SampledPath<T>> {
        SampledPath::new(
            self.times.clone(),
            self.fields.iter().map(|f| f.values[i].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldPathLength<T> {
    pub total: T,
    /// Length of the path followed by each sample, in grid order.
    pub per_sample: Vec<T>,
}

/// Quadrature length of a sampled field path. On each time interval the
/// field displacement is the weighted L² combination of the per-sample
/// displacements.
pub fn field_path_length<T: Scalar>(path: &FieldPath<T>) -> Result<FieldPathLength<T>> {
    let grid = path.grid();
    let intervals = (0..grid.len())
        .into_par_iter()
        .map(|i| interval_lengths(&path.sample_path(i)?))
        .collect::<Result<Vec<_>>>()?;
    let steps = path.times.len() - 1;
    let total = (0..steps).fold(T::zero(), |acc, k| {
        let step: Vec<T> = intervals.iter().map(|l| l[k]).collect();
        acc + weighted_l2(grid.weights(), &step)
    });
    let per_sample = intervals
        .iter()
        .map(|l| l.iter().fold(T::zero(), |acc, x| acc + *x))
        .collect();
    Ok(FieldPathLength { total, per_sample })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{sym_exp, SpdTensor, SymTensor};
    use approx::assert_relative_eq;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn grid(weights: &[f64]) -> Arc<SampleGrid<f64>> {
        let samples = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Sample { id: format!("s{i}"), weight: w })
            .collect();
        Arc::new(SampleGrid::new(2, samples).unwrap())
    }

    fn eye() -> FiberPoint<f64> {
        FiberPoint::Spd(SpdTensor::identity(2))
    }

    fn far() -> FiberPoint<f64> {
        FiberPoint::Spd(sym_exp(&SymTensor::diag(&[10.0, -10.0])).unwrap())
    }

    #[test]
    fn grid_validation() {
        let s = |id: &str, w: f64| Sample { id: id.into(), weight: w };
        assert!(SampleGrid::new(2, vec![s("a", 0.5), s("b", 0.5)]).is_ok());
        assert!(SampleGrid::new(2, vec![s("a", 0.5), s("a", 0.5)]).is_err());
        assert!(SampleGrid::new(2, vec![s("a", 1.5), s("b", -0.5)]).is_err());
        assert!(SampleGrid::new(2, vec![s("a", 1.0), s("b", 1.0)]).is_err());
        let g = SampleGrid::normalized(2, vec![s("a", 1.0), s("b", 3.0)]).unwrap();
        assert_relative_eq!(g.samples()[1].weight, 0.75);
        assert!(SampleGrid::<f64>::new(2, vec![]).is_err());
    }

    #[test]
    fn field_distance_examples() {
        let g = grid(&[0.75, 0.25]);
        let f0 = MetricField::new(g.clone(), vec![eye(), eye()]).unwrap();
        let f1 = MetricField::new(g.clone(), vec![eye(), far()]).unwrap();
        assert_eq!(field_distance(&f0, &f0).unwrap(), 0.0);
        assert_relative_eq!(field_distance(&f0, &f1).unwrap(), 2.0 * SQRT2, max_relative = 1e-12);

        let g = grid(&[0.5, 0.5]);
        let f0 = MetricField::constant(g.clone(), eye()).unwrap();
        let f1 = MetricField::constant(g, FiberPoint::cone(2)).unwrap();
        assert_relative_eq!(field_distance(&f0, &f1).unwrap(), 2.0 * SQRT2, max_relative = 1e-14);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let f0 = MetricField::constant(grid(&[0.5, 0.5]), eye()).unwrap();
        let f1 = MetricField::constant(grid(&[0.25, 0.75]), eye()).unwrap();
        assert!(field_distance(&f0, &f1).is_err());
        assert!(MetricField::new(grid(&[1.0]), vec![eye(), eye()]).is_err());
        assert!(MetricField::new(grid(&[1.0]), vec![FiberPoint::cone(3)]).is_err());
    }

    #[test]
    fn mixed_geodesic_hits_cone_only_where_expected() {
        let g = grid(&[0.5, 0.5]);
        let four = FiberPoint::spd(SymTensor::scaled_identity(2, 4.0)).unwrap();
        let f0 = MetricField::new(g.clone(), vec![eye(), eye()]).unwrap();
        let f1 = MetricField::new(g, vec![four, far()]).unwrap();
        let geo = FieldGeodesic::new(&f0, &f1).unwrap();
        let ts = geo.breakpoints()[0];
        let mid = geo.at(ts).unwrap();
        assert!(mid.values()[1].is_cone());
        assert!(!mid.values()[0].is_cone());
        assert_eq!(geo.at(0.0).unwrap(), f0);
        assert_eq!(geo.at(1.0).unwrap(), f1);
    }

    #[test]
    fn classification_masks() {
        let g = grid(&[0.25, 0.25, 0.5]);
        let four = FiberPoint::spd(SymTensor::scaled_identity(2, 4.0)).unwrap();
        let f0 = MetricField::constant(g.clone(), eye()).unwrap();
        let f1 = MetricField::new(g, vec![four, FiberPoint::cone(2), far()]).unwrap();
        let c = classify_fields(&f0, &f1).unwrap();
        assert_eq!(c.mask_n, vec!["s0", "s2"]);
        assert_eq!(c.mask_p, vec!["s0"]);
        assert_eq!(c.cases[1].tag, CaseTag::ToCone);
    }

    #[test]
    fn equivalence_tracks_degeneracy_sets() {
        let g = grid(&[0.5, 0.5]);
        let f0 = MetricField::new(g.clone(), vec![eye(), FiberPoint::cone(2)]).unwrap();
        let f1 = f0.clone();
        assert!(f0.equivalent(&f1, 1e-12).unwrap());
        assert_eq!(field_distance(&f0, &f1).unwrap(), 0.0);
        let f2 = MetricField::new(g, vec![FiberPoint::cone(2), eye()]).unwrap();
        assert!(!f0.equivalent(&f2, 1e-12).unwrap());
    }

    #[test]
    fn conformal_field_geodesic_length() {
        let g = grid(&[0.3, 0.7]);
        let f0 = MetricField::constant(g.clone(), eye()).unwrap();
        let f1 = MetricField::new(
            g,
            vec![
                FiberPoint::spd(SymTensor::scaled_identity(2, 4.0)).unwrap(),
                FiberPoint::spd(SymTensor::scaled_identity(2, 0.25)).unwrap(),
            ],
        )
        .unwrap();
        let path = FieldGeodesic::new(&f0, &f1).unwrap().sample(65).unwrap();
        let len = field_path_length(&path).unwrap();
        assert_relative_eq!(len.total, field_distance(&f0, &f1).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn splitting_a_sample_preserves_distance() {
        let g = grid(&[0.4, 0.6]);
        let f0 = MetricField::new(g.clone(), vec![eye(), far()]).unwrap();
        let f1 = MetricField::new(g, vec![FiberPoint::cone(2), eye()]).unwrap();
        let split = grid(&[0.4, 0.3, 0.3]);
        let s0 = MetricField::new(split.clone(), vec![eye(), far(), far()]).unwrap();
        let s1 = MetricField::new(split, vec![FiberPoint::cone(2), eye(), eye()]).unwrap();
        assert_relative_eq!(
            field_distance(&f0, &f1).unwrap(),
            field_distance(&s0, &s1).unwrap(),
            max_relative = 1e-12
        );
    }
}
