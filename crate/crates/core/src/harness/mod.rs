//! Named experiments, their CSV tables, and pass/fail checks.

mod check;
mod config;
mod run;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::operators::LaplacianValue;

pub use check::{check_outcome, Check, TABLE1_REFERENCE, TABLE1_REFERENCE_LIMIT, TABLE2_REFERENCE};
pub use config::{
    parse_list, Experiment, ExperimentConfig, Overrides, COUNTEREXAMPLE_T, INTERIOR_T,
    MC_SAMPLE_SIZES, TABLE1_T, TABLE2_T,
};
pub use run::{
    run_counterexample, run_curvature_profile, run_experiment, run_interior_baseline,
    run_mc_convergence, run_table1, run_table2, CurvatureSummary, Diagnostics, ExperimentOutcome,
    InteriorDiscrete, McSummary, CONE_VALUE,
};

/// One line of an experiment table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub t: f64,
    pub computed: f64,
    /// `√t · computed`.
    pub scaled: f64,
    pub predicted: f64,
    /// `|computed − predicted|` or `|scaled − predicted|`, depending on the
    /// experiment.
    pub abs_error: f64,
    /// `abs_error / |predicted|`, absent when `predicted = 0`.
    pub rel_error: Option<f64>,
    /// Whether the underlying quadrature met its tolerance.
    pub converged: bool,
}

impl ResultRow {
    fn new(
        t: f64,
        computed: f64,
        scaled: f64,
        predicted: f64,
        compared: f64,
        converged: bool,
    ) -> Self {
        let abs_error = (compared - predicted).abs();
        ResultRow {
            t,
            computed,
            scaled,
            predicted,
            abs_error,
            rel_error: (predicted != 0.0).then(|| abs_error / predicted.abs()),
            converged,
        }
    }

    /// Row comparing `L_t` itself with the prediction.
    pub fn against_value(v: &LaplacianValue, predicted: f64) -> Self {
        ResultRow::new(v.t, v.value, v.scaled, predicted, v.value, v.converged)
    }

    /// Row comparing `√t · L_t` with the prediction.
    pub fn against_scaled(v: &LaplacianValue, predicted: f64) -> Self {
        ResultRow::new(v.t, v.value, v.scaled, predicted, v.scaled, v.converged)
    }
}

pub const CSV_HEADER: &str = "t,computed,scaled,predicted,abs_error,rel_error";

/// Fixed six decimals; never prints `-0.000000`.
fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// The CSV text for `rows`. The bandwidth is printed in shortest round-trip
/// scientific form, everything else with six decimals.
pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let rel = r.rel_error.map(fixed6).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:e},{},{},{},{},{}",
            r.t,
            fixed6(r.computed),
            fixed6(r.scaled),
            fixed6(r.predicted),
            fixed6(r.abs_error),
            rel
        );
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    fs::write(path, format_csv(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
