//! End-to-end acceptance run: one line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use metgeo::verification::cat0::TriangleShape;
use metgeo::verification::{
    bounds_sweep, cat0_sweep, continuity_sweep, exp_log_sweep, field_cat0_sweep, field_coherence_sweep,
    geodesic_sweep, oracle_corpus, oracle_sweep, threshold_sweep, volume_law_sweep, OracleConfig,
};

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(name: &str, budget: Option<Duration>, check: impl FnOnce() -> metgeo::Result<Outcome>) -> bool {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let ok = pass && in_time;
    let budget_note = budget.map_or(String::new(), |b| format!(", budget {}s", b.as_secs()));
    println!(
        "{} {name}: {detail} [{:.1}s{budget_note}]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() -> ExitCode {
    let cfg = OracleConfig::default();
    let results = [
        run("closed form vs oracle", Some(Duration::from_secs(300)), || {
            let r = oracle_sweep(&oracle_corpus(50, SEED), &cfg)?;
            let riemannian = r.entries.iter().filter(|e| !e.case.touches_cone()).count();
            Ok(Outcome {
                pass: r.pass,
                detail: format!(
                    "{} pairs ({riemannian} riemannian), max |rel err| {:.3e} (<= 3e-2), max undercut {:.3e} (<= 1e-3)",
                    r.pairs, r.max_relative_error, r.max_undercut
                ),
            })
        }),
        run("geodesic contract", Some(Duration::from_secs(60)), || {
            let r = geodesic_sweep(1000, SEED, 65)?;
            Ok(Outcome {
                pass: r.pass,
                detail: format!(
                    "{}+{} pairs, endpoint {:.1e} (<= 1e-9), speed {:.1e} (< 1e-4), length riemannian {:.1e} (<= 1e-6), cone {:.1e} (<= 1e-3)",
                    r.riemannian_pairs,
                    r.cone_pairs,
                    r.max_endpoint_error,
                    r.max_speed_deviation,
                    r.max_length_error_riemannian,
                    r.max_length_error_cone
                ),
            })
        }),
        run("exp/log round trip", None, || {
            let r = exp_log_sweep(1000, SEED)?;
            Ok(Outcome {
                pass: r.pass,
                detail: format!(
                    "round trip {:.1e} (<= 1e-8), norm vs distance {:.1e} (<= 1e-10)",
                    r.max_round_trip_error, r.max_norm_mismatch
                ),
            })
        }),
        run("volume law", None, || {
            let r = volume_law_sweep(100, SEED, 64)?;
            Ok(Outcome {
                pass: r.pass,
                detail: format!("max rel err {:.1e} (< 1e-10)", r.max_relative_error),
            })
        }),
        run("distance bounds", None, || {
            let r = bounds_sweep(10_000, SEED)?;
            Ok(Outcome {
                pass: r.pass,
                detail: format!(
                    "{} violations, min slacks {:.1e}/{:.1e} (>= -1e-10), conformal gap {:.1e}, cone gap {:.1e} (<= 1e-12)",
                    r.violations, r.min_lower_slack, r.min_upper_slack, r.max_conformal_gap, r.max_cone_gap
                ),
            })
        }),
        run("threshold continuity", None, || {
            let r = threshold_sweep(1000, SEED, 1e-8)?;
            Ok(Outcome {
                pass: r.pass && r.classification_ok,
                detail: format!(
                    "max gap {:.1e} (< 1e-6), sides classified correctly: {}",
                    r.max_gap, r.classification_ok
                ),
            })
        }),
        run("CAT(0) sweeps", Some(Duration::from_secs(300)), || {
            let fiber = cat0_sweep(1200, SEED, true, 1e-9)?;
            let field = field_cat0_sweep(120, SEED, 16, 1e-9)?;
            let cone_shapes = TriangleShape::ALL
                .into_iter()
                .filter(|s| s.touches_cone())
                .filter(|s| fiber.shape_counts.get(s.as_str()).copied().unwrap_or(0) > 0)
                .count();
            Ok(Outcome {
                pass: fiber.pass && field.pass && cone_shapes == 5,
                detail: format!(
                    "{} fiber triangles, {cone_shapes}/5 cone shapes, max violation {:.1e}; {} field triangles, planar {:.1e}, per-sample {:.1e} (<= 1e-9)",
                    fiber.trials, fiber.max_violation, field.trials, field.max_planar_slack, field.max_per_sample_slack
                ),
            })
        }),
        run("field distance coherence", None, || {
            let r = field_coherence_sweep(SEED, 16, 100, 100, 4, &cfg)?;
            Ok(Outcome {
                pass: r.pass,
                detail: format!(
                    "geodesic length err {:.1e} (<= 1e-3), inequality slack {:.1e} (>= -1e-9), oracle undercut {:.1e} (<= 2e-2)",
                    r.max_length_error, r.min_inequality_slack, r.max_oracle_undercut
                ),
            })
        }),
        run("endpoint continuity", None, || {
            let r = continuity_sweep(200, SEED)?;
            let rows: Vec<String> = r
                .rows
                .iter()
                .map(|row| format!("{:?}@{:.0e}: {:.1e}", row.regime, row.perturbation, row.max_deviation))
                .collect();
            Ok(Outcome {
                pass: r.pass,
                detail: rows.join(", "),
            })
        }),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
