//! The JSON field format.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "grid": [{"id": "x0", "weight": 0.5}, {"id": "x1", "weight": 0.5, "reference": [2, 0, 0, 2]}],
//!   "fields": {
//!     "g0": {"x0": {"spd": [1, 0, 0, 1]}, "x1": {"cone": true}},
//!     "g1": {"x0": {"spd": [4, 0, 0, 4]}, "x1": {"spd": [1, 0, 0, 1]}}
//!   }
//! }
//! ```
//!
//! Matrices are row-major. A grid entry with a `reference` tensor has its
//! values whitened against that tensor on load, so the reference plays the
//! role of the identity at that sample.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use metgeo::spd::asymmetry;
use metgeo::{FiberPoint, MetricField, Sample, SampleGrid, Scalar, SpdTensor, SymTensor};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::to_json;

/// Inputs further than this from symmetric are symmetrized with a warning.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub dim: usize,
    pub grid: Vec<GridEntry>,
    pub fields: BTreeMap<String, BTreeMap<String, Entry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub id: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Spd { spd: Vec<f64> },
    Cone { cone: bool },
}

impl Entry {
    pub fn from_point(p: &FiberPoint<f64>) -> Self {
        match p {
            FiberPoint::Spd(a) => Entry::Spd {
                spd: a.as_sym().as_slice().to_vec(),
            },
            FiberPoint::Cone { .. } => Entry::Cone { cone: true },
        }
    }
}

impl FieldFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed field file: {e}")))
    }

    /// Canonical text: keys in sorted order, floats at 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::output::write_file(path, &self.to_json()?)
    }
}

/// Options applied while turning a [`FieldFile`] into metric fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub normalize_weights: bool,
    /// Relative eigenvalue threshold below which a tensor counts as
    /// degenerate and is collapsed to the cone point.
    pub positivity_tol: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            normalize_weights: false,
            positivity_tol: f64::POSITIVITY_TOL,
        }
    }
}

/// Fields of a file, validated and expressed in the whitened frame.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub grid: Arc<SampleGrid<f64>>,
    /// Reference tensor per sample, when the file gives one.
    pub references: Vec<Option<SpdTensor<f64>>>,
    pub fields: BTreeMap<String, MetricField<f64>>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn from_file(file: &FieldFile, opts: LoadOptions) -> Result<Self> {
        let n = file.dim;
        if n == 0 {
            return Err(CliError::input("dim must be positive"));
        }
        let mut warnings = Vec::new();
        let samples: Vec<Sample<f64>> = file
            .grid
            .iter()
            .map(|g| Sample {
                id: g.id.clone(),
                weight: g.weight,
            })
            .collect();
        let grid = if opts.normalize_weights {
            SampleGrid::normalized(n, samples)?
        } else {
            SampleGrid::new(n, samples)?
        };
        let grid = Arc::new(grid);

        let references = file
            .grid
            .iter()
            .map(|g| {
                g.reference
                    .as_ref()
                    .map(|m| {
                        let sym = symmetric(n, m, &format!("reference of sample {}", g.id), &mut warnings)?;
                        SpdTensor::new(sym)
                            .map_err(|e| CliError::input(format!("reference of sample {}: {e}", g.id)))
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;

        let mut fields = BTreeMap::new();
        for (name, entries) in &file.fields {
            if let Some(extra) = entries.keys().find(|id| grid.index_of(id).is_none()) {
                return Err(CliError::input(format!("field {name}: unknown sample id {extra}")));
            }
            let values = grid
                .samples()
                .iter()
                .zip(&references)
                .map(|(s, reference)| {
                    let entry = entries
                        .get(&s.id)
                        .ok_or_else(|| CliError::input(format!("field {name}: no value for sample {}", s.id)))?;
                    let context = format!("field {name}, sample {}", s.id);
                    ingest(n, entry, reference.as_ref(), opts.positivity_tol, &context, &mut warnings)
                })
                .collect::<Result<Vec<_>>>()?;
            fields.insert(name.clone(), MetricField::new(Arc::clone(&grid), values)?);
        }
        Ok(Self {
            grid,
            references,
            fields,
            warnings,
        })
    }

    pub fn field(&self, name: &str) -> Result<&MetricField<f64>> {
        self.fields.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.fields.keys().map(String::as_str).collect();
            CliError::input(format!("no field named {name} (file has: {})", known.join(", ")))
        })
    }

    /// Maps a whitened value at sample `i` back to file coordinates.
    pub fn to_file_frame(&self, i: usize, p: &FiberPoint<f64>) -> Entry {
        match (p, &self.references[i]) {
            (FiberPoint::Spd(a), Some(r)) => Entry::Spd {
                spd: r.unwhiten(a.as_sym()).as_slice().to_vec(),
            },
            _ => Entry::from_point(p),
        }
    }

    /// Maps a whitened tangent vector at sample `i` back to file coordinates.
    pub fn tangent_to_file_frame(&self, i: usize, b: &SymTensor<f64>) -> SymTensor<f64> {
        match &self.references[i] {
            Some(r) => r.unwhiten(b),
            None => b.clone(),
        }
    }

    /// A field file on this grid holding `fields`, in file coordinates.
    pub fn to_field_file(&self, original: &FieldFile, fields: &[(String, &MetricField<f64>)]) -> FieldFile {
        let fields = fields
            .iter()
            .map(|(name, f)| {
                let entries = self
                    .grid
                    .samples()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.id.clone(), self.to_file_frame(i, &f.values()[i])))
                    .collect();
                (name.clone(), entries)
            })
            .collect();
        FieldFile {
            dim: original.dim,
            grid: original.grid.clone(),
            fields,
        }
    }
}

fn symmetric(n: usize, m: &[f64], context: &str, warnings: &mut Vec<String>) -> Result<SymTensor<f64>> {
    if m.len() != n * n {
        return Err(CliError::input(format!("{context}: expected {} entries, got {}", n * n, m.len())));
    }
    let skew = asymmetry(n, m);
    if skew > SYMMETRY_TOL {
        warnings.push(format!("{context}: asymmetry {skew:e} exceeds {SYMMETRY_TOL:e}, symmetrized"));
    }
    SymTensor::from_row_major(n, m).map_err(|e| CliError::input(format!("{context}: {e}")))
}

fn ingest(
    n: usize,
    entry: &Entry,
    reference: Option<&SpdTensor<f64>>,
    tol: f64,
    context: &str,
    warnings: &mut Vec<String>,
) -> Result<FiberPoint<f64>> {
    let raw = match entry {
        Entry::Cone { cone: true } => return Ok(FiberPoint::cone(n)),
        Entry::Cone { cone: false } => {
            return Err(CliError::input(format!("{context}: \"cone\" must be true")));
        }
        Entry::Spd { spd } => symmetric(n, spd, context, warnings)?,
    };
    let whitened = match reference {
        Some(r) => r.whiten(&raw),
        None => raw,
    };
    let ingested = FiberPoint::ingest(whitened, tol).map_err(|e| CliError::input(format!("{context}: {e}")))?;
    if ingested.collapsed {
        warnings.push(format!("{context}: degenerate tensor mapped to the cone point"));
    }
    Ok(ingested.point)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SAMPLES: &str = r#"{
        "dim": 2,
        "grid": [{"id": "a", "weight": 0.5}, {"id": "b", "weight": 0.5, "reference": [4, 0, 0, 1]}],
        "fields": {
            "g0": {"a": {"spd": [1, 0, 0, 1]}, "b": {"cone": true}},
            "g1": {"b": {"spd": [4, 0.5, 0.5, 1]}, "a": {"spd": [2, 1e-9, 0, 2]}}
        }
    }"#;

    #[test]
    fn loads_whitens_and_warns() {
        let file = FieldFile::parse(TWO_SAMPLES).unwrap();
        let ds = Dataset::from_file(&file, LoadOptions::default()).unwrap();
        assert_eq!(ds.grid.len(), 2);
        assert!(ds.field("g0").unwrap().values()[1].is_cone());
        let b = ds.field("g1").unwrap().values()[1].to_matrix();
        assert!((b.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((b.get(0, 1) - 0.25).abs() < 1e-14);
        assert_eq!(ds.warnings.len(), 1, "{:?}", ds.warnings);
        let back = ds.to_file_frame(1, &ds.field("g1").unwrap().values()[1]);
        let Entry::Spd { spd } = back else { panic!() };
        assert!((spd[1] - 0.5).abs() < 1e-14 && (spd[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip_is_value_identical() {
        let file = FieldFile::parse(TWO_SAMPLES).unwrap();
        let text = file.to_json().unwrap();
        let again = FieldFile::parse(&text).unwrap();
        assert_eq!(file, again);
        assert_eq!(text, again.to_json().unwrap());
        // canonical order puts g1's entries as a, b
        assert!(text.find("\"a\"").unwrap() < text.rfind("\"b\"").unwrap());
    }

    #[test]
    fn rejects_bad_files() {
        let bad_weights = TWO_SAMPLES.replace("\"weight\": 0.5, \"reference\"", "\"weight\": 0.7, \"reference\"");
        let file = FieldFile::parse(&bad_weights).unwrap();
        assert!(Dataset::from_file(&file, LoadOptions::default()).is_err());
        let opts = LoadOptions {
            normalize_weights: true,
            ..LoadOptions::default()
        };
        assert!(Dataset::from_file(&file, opts).is_ok());

        let missing = TWO_SAMPLES.replace("\"b\": {\"cone\": true}", "\"c\": {\"cone\": true}");
        let file = FieldFile::parse(&missing).unwrap();
        assert!(matches!(Dataset::from_file(&file, LoadOptions::default()), Err(CliError::Input(_))));

        let indefinite = TWO_SAMPLES.replace("[1, 0, 0, 1]", "[1, 0, 0, -1]");
        let file = FieldFile::parse(&indefinite).unwrap();
        assert!(Dataset::from_file(&file, LoadOptions::default()).is_err());

        assert!(FieldFile::parse("{\"dim\": 2}").is_err());
    }
}
