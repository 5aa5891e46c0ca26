use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{BenchmarkRecord, ReferenceConfig, ReferenceTrajectory, ARTIFACT_VERSION};
use crate::problems::GridRule;
use crate::schemes::{NewtonConfig, SignMode};

pub const CSV_HEADER: [&str; 9] = ["model", "scheme", "n", "t0", "t1", "h", "component_index", "abs_error", "diverged"];

/// Stored with every run: the grids are uniform in time (or log time), not
/// the point sets an adaptive solver would produce.
pub const GRID_NOTE: &str = "grids are uniform (linear rule) or geometric (logarithmic rule) with the requested \
number of points; they approximate, but do not reproduce, adaptively chosen time points";

/// 17 significant digits, enough to round-trip any double.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per (pair, component), in record order.
pub fn write_csv<W: Write>(records: &[BenchmarkRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        for (i, e) in r.errors.iter().enumerate() {
            w.write_record([
                r.model.clone(),
                r.scheme.clone(),
                r.n.to_string(),
                fmt_f64(r.t0),
                fmt_f64(r.t1),
                fmt_f64(r.h),
                i.to_string(),
                fmt_f64(*e),
                r.diverged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reference states as `t,y0,y1,...`, one row per grid point.
pub fn write_reference_csv<W: Write>(reference: &ReferenceTrajectory, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = reference.states.first().map_or(0, |s| s.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("y{i}")));
    w.write_record(&header)?;
    for (t, y) in reference.grid.points().iter().zip(&reference.states) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(y.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON has no infinities; non-finite values are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
mod json_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string().to_lowercase())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Per-scheme digest of a pairwise run, using the max-norm error of each
/// pair (diverged pairs count as `+inf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub pairs: usize,
    pub diverged: usize,
    #[serde(with = "json_f64")]
    pub max_error: f64,
    #[serde(with = "json_f64")]
    pub median_error: f64,
}

pub fn summarize(records: &[BenchmarkRecord]) -> Option<SchemeSummary> {
    let first = records.first()?;
    let mut errs: Vec<f64> = records.iter().map(|r| r.max_error).collect();
    errs.sort_by(f64::total_cmp);
    let k = errs.len();
    let median = if k % 2 == 1 {
        errs[k / 2]
    } else {
        0.5 * (errs[k / 2 - 1] + errs[k / 2])
    };
    Some(SchemeSummary {
        scheme: first.scheme.clone(),
        pairs: k,
        diverged: records.iter().filter(|r| r.diverged).count(),
        max_error: errs[k - 1],
        median_error: median,
    })
}

/// JSON sidecar describing how a CSV was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub artifact_version: String,
    pub model: String,
    pub n: usize,
    pub grid_rule: GridRule,
    pub grid_note: String,
    pub schemes: Vec<String>,
    pub etd_rdp_sign_mode: SignMode,
    pub newton: NewtonConfig,
    pub reference: ReferenceConfig,
    pub reference_verification_delta: f64,
    pub reference_max_substeps: usize,
    pub reference_refined_intervals: usize,
    pub error_definition: String,
    pub summaries: Vec<SchemeSummary>,
}

impl RunMetadata {
    pub fn new(
        reference: &ReferenceTrajectory,
        reference_config: &ReferenceConfig,
        newton: NewtonConfig,
        sign_mode: SignMode,
        summaries: Vec<SchemeSummary>,
    ) -> Self {
        RunMetadata {
            artifact_version: ARTIFACT_VERSION.to_string(),
            model: reference.grid.model().to_string(),
            n: reference.n(),
            grid_rule: reference.grid.rule(),
            grid_note: GRID_NOTE.to_string(),
            schemes: summaries.iter().map(|s| s.scheme.clone()).collect(),
            etd_rdp_sign_mode: sign_mode,
            newton,
            reference: *reference_config,
            reference_verification_delta: reference.verification_delta,
            reference_max_substeps: reference.max_substeps_used,
            reference_refined_intervals: reference.refined_intervals,
            error_definition: "abs_error is |scheme step - reference| per component, each step starting from the \
reference state; failed or non-finite steps are diverged=true with abs_error=inf"
                .to_string(),
            summaries,
        }
    }
}
