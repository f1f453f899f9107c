use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use metgeo::fiber::{exp_map, inv_exp, CaseTag};
use metgeo::field::{classify_fields, sample_distances, weighted_l2, FieldGeodesic};
use metgeo::spd::fiber_norm;
use metgeo::verification::{
    bounds_sweep, cat0_sweep, geodesic_sweep, oracle_corpus, oracle_sweep, CorpusPair, OracleConfig,
};
use metgeo::{FiberPoint, MetricField};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::fieldfile::{Dataset, FieldFile, LoadOptions};
use crate::output::{full, short, to_json, write_file, Format, Sink};

/// Loads a field file, reporting load warnings on stderr.
pub fn load(path: &Path, opts: LoadOptions) -> Result<(FieldFile, Dataset)> {
    let file = FieldFile::load(path)?;
    let ds = Dataset::from_file(&file, opts)?;
    for w in &ds.warnings {
        eprintln!("warning: {w}");
    }
    Ok((file, ds))
}

fn pair<'a>(ds: &'a Dataset, f0: &str, f1: &str) -> Result<(&'a MetricField<f64>, &'a MetricField<f64>)> {
    Ok((ds.field(f0)?, ds.field(f1)?))
}

#[derive(Debug, Serialize)]
pub struct SampleDistance {
    pub id: String,
    pub weight: f64,
    pub distance: f64,
    pub case: CaseTag,
}

#[derive(Debug, Serialize)]
pub struct DistReport {
    pub field0: String,
    pub field1: String,
    pub distance: f64,
    pub samples: Vec<SampleDistance>,
}

pub fn dist_report(ds: &Dataset, f0: &str, f1: &str) -> Result<DistReport> {
    let (g0, g1) = pair(ds, f0, f1)?;
    let per_sample = sample_distances(g0, g1)?;
    let cases = classify_fields(g0, g1)?.cases;
    let distance = weighted_l2(ds.grid.weights(), &per_sample);
    let samples = ds
        .grid
        .samples()
        .iter()
        .zip(per_sample)
        .zip(cases)
        .map(|((s, d), c)| SampleDistance {
            id: s.id.clone(),
            weight: s.weight,
            distance: d,
            case: c.tag,
        })
        .collect();
    Ok(DistReport {
        field0: f0.to_string(),
        field1: f1.to_string(),
        distance,
        samples,
    })
}

pub fn dist(ds: &Dataset, f0: &str, f1: &str, sink: &Sink) -> Result<()> {
    let report = dist_report(ds, f0, f1)?;
    let mut human = format!("d({f0}, {f1}) = {}\n\n", short(report.distance));
    let _ = writeln!(human, "{:<16} {:>12} {:>14}  case", "sample", "weight", "d_x");
    for s in &report.samples {
        let _ = writeln!(human, "{:<16} {:>12} {:>14}  {}", s.id, short(s.weight), short(s.distance), s.case);
    }
    sink.emit(
        &human,
        || to_json(&report),
        || {
            let mut csv = String::from("sample_id,weight,distance,case\n");
            for s in &report.samples {
                let _ = writeln!(csv, "{},{},{},{}", s.id, full(s.weight), full(s.distance), s.case);
            }
            Ok(csv)
        },
    )
}

/// The geodesic between two fields at `t_samples` uniform times, as a field
/// file plus the per-sample volume and case table.
pub struct GeodesicOutput {
    pub file: FieldFile,
    pub csv: String,
    pub times: Vec<f64>,
}

pub fn geodesic_output(file: &FieldFile, ds: &Dataset, f0: &str, f1: &str, t_samples: usize) -> Result<GeodesicOutput> {
    if t_samples < 2 {
        return Err(CliError::input("--t-samples must be at least 2"));
    }
    let (g0, g1) = pair(ds, f0, f1)?;
    let g = FieldGeodesic::new(g0, g1)?;
    let cases: Vec<CaseTag> = g.sample_paths().iter().map(|p| p.case().tag).collect();
    let last = (t_samples - 1) as f64;
    let times: Vec<f64> = (0..t_samples)
        .map(|k| if k + 1 == t_samples { 1.0 } else { k as f64 / last })
        .collect();
    let width = (t_samples - 1).to_string().len();
    let mut fields = Vec::with_capacity(t_samples);
    let mut csv = String::from("t,sample_id,fourth_root_det,case\n");
    for (k, &t) in times.iter().enumerate() {
        let field = g.at(t)?;
        for ((s, p), case) in ds.grid.samples().iter().zip(field.values()).zip(&cases) {
            let vol = match &ds.references[ds.grid.index_of(&s.id).expect("grid id")] {
                // the volume factor is frame dependent; report it in file coordinates
                Some(r) => p.fourth_root_det() * r.fourth_root_det(),
                None => p.fourth_root_det(),
            };
            let _ = writeln!(csv, "{},{},{},{}", full(t), s.id, full(vol), case);
        }
        fields.push((format!("t_{k:0width$}"), field));
    }
    let named: Vec<(String, &MetricField<f64>)> = fields.iter().map(|(n, f)| (n.clone(), f)).collect();
    let mut out = ds.to_field_file(file, &named);
    // the endpoints are the inputs themselves, not their image under a
    // round trip through the whitened frame
    for (name, source) in [(&named[0].0, f0), (&named[named.len() - 1].0, f1)] {
        out.fields.insert(name.clone(), file.fields[source].clone());
    }
    Ok(GeodesicOutput { file: out, csv, times })
}

pub fn geodesic(file: &FieldFile, ds: &Dataset, f0: &str, f1: &str, t_samples: usize, sink: &Sink) -> Result<()> {
    let out = geodesic_output(file, ds, f0, f1, t_samples)?;
    let mut human = format!(
        "geodesic {f0} -> {f1}: {} fields at t = {}, ..., {}\n",
        out.times.len(),
        short(out.times[0]),
        short(out.times[out.times.len() - 1])
    );
    // a field file written to --out gets the table next to it
    if let (Some(path), Format::Json) = (&sink.out, sink.machine_format()) {
        let table = path.with_extension("csv");
        write_file(&table, &out.csv)?;
        let _ = writeln!(human, "fields: {}\ntable:  {}", path.display(), table.display());
    }
    // the fields are the product here, so stdout gets them by default
    let sink = Sink {
        format: sink.format.or(Some(Format::Json)),
        out: sink.out.clone(),
    };
    sink.emit(&human, || out.file.to_json(), || Ok(out.csv.clone()))
}

#[derive(Debug, Serialize)]
pub struct TangentSample {
    pub id: String,
    /// `ψ(k)` in row-major order, in file coordinates.
    pub tangent: Vec<f64>,
    pub norm: f64,
    pub distance: f64,
    pub norm_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction_error: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ExplogReport {
    pub field0: String,
    pub field1: String,
    pub samples: Vec<TangentSample>,
    pub max_norm_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_reconstruction_error: Option<f64>,
}

pub fn explog_report(ds: &Dataset, f0: &str, f1: &str, verify: bool) -> Result<ExplogReport> {
    let (g0, g1) = pair(ds, f0, f1)?;
    let cases = classify_fields(g0, g1)?.cases;
    let offending: Vec<&str> = ds
        .grid
        .samples()
        .iter()
        .zip(&cases)
        .filter(|(_, c)| c.tag != CaseTag::Riemannian)
        .map(|(s, _)| s.id.as_str())
        .collect();
    if !offending.is_empty() {
        return Err(CliError::Domain(format!(
            "samples outside the image of the exponential map: {}",
            offending.join(", ")
        )));
    }
    let distances = sample_distances(g0, g1)?;
    let mut samples = Vec::with_capacity(ds.grid.len());
    for (i, s) in ds.grid.samples().iter().enumerate() {
        let (FiberPoint::Spd(a0), FiberPoint::Spd(a1)) = (&g0.values()[i], &g1.values()[i]) else {
            unreachable!("riemannian samples have SPD endpoints");
        };
        let psi = inv_exp(a0, a1)?;
        let norm = fiber_norm(a0, &psi)?;
        let d = distances[i];
        let norm_error = if d > 0.0 { (norm - d).abs() / d } else { norm };
        let reconstruction_error = if verify {
            let back = exp_map(a0, &psi, 1.0)?.to_matrix();
            let scale = a1.as_sym().max_abs();
            Some(back.max_abs_diff(a1.as_sym()) / scale)
        } else {
            None
        };
        samples.push(TangentSample {
            id: s.id.clone(),
            tangent: ds.tangent_to_file_frame(i, &psi).as_slice().to_vec(),
            norm,
            distance: d,
            norm_error,
            reconstruction_error,
        });
    }
    let max_norm_error = samples.iter().map(|s| s.norm_error).fold(0.0, f64::max);
    let max_reconstruction_error = verify.then(|| samples.iter().filter_map(|s| s.reconstruction_error).fold(0.0, f64::max));
    Ok(ExplogReport {
        field0: f0.to_string(),
        field1: f1.to_string(),
        samples,
        max_norm_error,
        max_reconstruction_error,
    })
}

pub fn explog(ds: &Dataset, f0: &str, f1: &str, verify: bool, tolerance: f64, sink: &Sink) -> Result<()> {
    let report = explog_report(ds, f0, f1, verify)?;
    let mut human = format!("psi = inv_exp({f0}, {f1}) per sample\n\n");
    for s in &report.samples {
        let entries: Vec<String> = s.tangent.iter().map(|&x| short(x)).collect();
        let _ = writeln!(human, "{:<16} [{}]  |psi| {}  d_x {}", s.id, entries.join(", "), short(s.norm), short(s.distance));
    }
    let _ = writeln!(human, "\nmax relative |psi| - d_x: {:e}", report.max_norm_error);
    if let Some(e) = report.max_reconstruction_error {
        let _ = writeln!(human, "max reconstruction error: {e:e}");
    }
    sink.emit(
        &human,
        || to_json(&report),
        || {
            let mut csv = String::from("sample_id,entry,value,norm,distance,norm_error,reconstruction_error\n");
            for s in &report.samples {
                let recon = s.reconstruction_error.map(full).unwrap_or_default();
                for (k, &x) in s.tangent.iter().enumerate() {
                    let _ = writeln!(
                        csv,
                        "{},{k},{},{},{},{},{recon}",
                        s.id,
                        full(x),
                        full(s.norm),
                        full(s.distance),
                        full(s.norm_error)
                    );
                }
            }
            Ok(csv)
        },
    )?;
    match report.max_reconstruction_error {
        Some(e) if !(e <= tolerance) => Err(CliError::Verification(format!(
            "exp/log reconstruction error {e:e} exceeds {tolerance:e}"
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Bounds,
    Cat0,
    Oracle,
    Speed,
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub mode: CheckMode,
    pub trials: Option<usize>,
    pub seed: u64,
    pub include_cone: bool,
    pub pairs: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

impl CheckMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckMode::Bounds => "bounds",
            CheckMode::Cat0 => "cat0",
            CheckMode::Oracle => "oracle",
            CheckMode::Speed => "speed",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            CheckMode::Bounds => 10_000,
            CheckMode::Cat0 | CheckMode::Speed => 1_000,
            CheckMode::Oracle => 50,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub mode: CheckMode,
    pub pass: bool,
    pub summary: String,
    pub report: serde_json::Value,
}

fn as_value<T: Serialize>(report: &T) -> Result<serde_json::Value> {
    serde_json::to_value(report).map_err(|e| CliError::input(format!("cannot serialize report: {e}")))
}

pub fn check_report(opts: &CheckOptions) -> Result<CheckReport> {
    let trials = opts.trials.unwrap_or(opts.mode.default_trials());
    let (pass, summary, report) = match opts.mode {
        CheckMode::Bounds => {
            let r = bounds_sweep(trials, opts.seed)?;
            let summary = format!(
                "{} pairs, {} violations, min slacks {:e} / {:e}",
                r.trials, r.violations, r.min_lower_slack, r.min_upper_slack
            );
            (r.pass, summary, as_value(&r)?)
        }
        CheckMode::Cat0 => {
            let tol = opts.tolerance.unwrap_or(1e-9);
            let r = cat0_sweep(trials, opts.seed, opts.include_cone, tol)?;
            let summary = format!("{} triangles, max violation {:e} (tolerance {tol:e})", r.trials, r.max_violation);
            (r.pass, summary, as_value(&r)?)
        }
        CheckMode::Oracle => {
            let corpus = match &opts.pairs {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                    serde_json::from_str::<Vec<CorpusPair>>(&text)
                        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
                }
                None => oracle_corpus(trials, opts.seed),
            };
            let r = oracle_sweep(&corpus, &OracleConfig::default())?;
            let summary = format!(
                "{} pairs, max relative error {:e}, max undercut {:e}",
                r.pairs, r.max_relative_error, r.max_undercut
            );
            (r.pass, summary, as_value(&r)?)
        }
        CheckMode::Speed => {
            let r = geodesic_sweep(trials, opts.seed, 65)?;
            let summary = format!(
                "{} pairs, speed deviation {:e}, length error {:e} (riemannian) / {:e} (cone)",
                r.trials, r.max_speed_deviation, r.max_length_error_riemannian, r.max_length_error_cone
            );
            (r.pass, summary, as_value(&r)?)
        }
    };
    Ok(CheckReport {
        mode: opts.mode,
        pass,
        summary,
        report,
    })
}

pub fn check(opts: &CheckOptions, sink: &Sink) -> Result<()> {
    let report = check_report(opts)?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    let human = format!("{verdict} {}: {}\n", report.mode.as_str(), report.summary);
    sink.emit(&human, || to_json(&report), || Err(CliError::input("check reports are JSON only")))?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!("check {} failed: {}", report.mode.as_str(), report.summary)))
    }
}
