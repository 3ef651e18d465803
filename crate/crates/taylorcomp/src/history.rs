//! Per-iteration run records and their serialized forms.
//!
//! The CSV contract is fixed: header
//! `k,f,step_norm,M,model_gap,crit_measure,recovery_error,time_ms`, one row
//! per visited iterate, empty fields where a column does not apply, floats in
//! shortest round-trip decimal. Wall-clock columns are emitted only when
//! timing output is explicitly enabled, so that two runs with the same seed
//! and configuration produce byte-identical CSVs; the JSON summary always
//! carries the measured total.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    FTol,
    StepTol,
    CritTol,
    MaxIterations,
    /// The subproblem step failed the model descent test at floating-point
    /// resolution; the iterate is kept and the run stops.
    SubproblemStall,
}

impl TerminationReason {
    /// Exit-code mapping: thresholds → 0, iteration cap → 2.
    pub fn exit_code(self) -> i32 {
        match self {
            TerminationReason::MaxIterations => 2,
            _ => 0,
        }
    }
}

/// State of one visited iterate plus the step that left it (zero step on the
/// terminal record).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// The iterate itself; kept in memory for diagnostics, not serialized to CSV.
    pub x: Vec<f64>,
    pub f: f64,
    pub step_norm: f64,
    pub m_used: f64,
    pub model_value: Option<f64>,
    pub model_gap: Option<f64>,
    pub crit_measure: Option<f64>,
    pub recovery_error: Option<f64>,
    pub time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub iterations: usize,
    pub final_f: f64,
    pub final_step_norm: f64,
    pub final_crit_measure: Option<f64>,
    pub final_recovery_error: Option<f64>,
    pub termination: TerminationReason,
    pub total_time_ms: f64,
    /// Observational KL-rate series: log10(f(x_k) − f_best) per iterate,
    /// absent where the gap underflows. Never asserted against.
    pub kl_log10_gap: Vec<Option<f64>>,
    /// Named scalar diagnostics (σ_min, predicted budgets, KKT residuals, …).
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    /// Echo of the configuration that produced the run, when run via the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_echo: Option<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct RunHistory {
    records: Vec<IterationRecord>,
    summary: Option<RunSummary>,
    /// Emit wall-clock columns in the CSV (defeats byte determinism).
    pub emit_times: bool,
}

impl Default for RunHistory {
    fn default() -> Self {
        Self::new()
    }
}

impl RunHistory {
    pub fn new() -> Self {
        Self { records: Vec::new(), summary: None, emit_times: false }
    }

    pub fn push(&mut self, record: IterationRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.k > last.k, "records must be strictly increasing in k");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn summary(&self) -> &RunSummary {
        self.summary.as_ref().expect("run not finished")
    }

    pub fn summary_mut(&mut self) -> &mut RunSummary {
        self.summary.as_mut().expect("run not finished")
    }

    /// Close the run: derive the summary from the records.
    pub fn finish(&mut self, termination: TerminationReason) {
        assert!(!self.records.is_empty(), "a finished run has at least one record");
        let last = self.records.last().expect("nonempty");
        let f_best = self.records.iter().map(|r| r.f).fold(f64::INFINITY, f64::min);
        let kl = self
            .records
            .iter()
            .map(|r| {
                let gap = r.f - f_best;
                if gap > 0.0 {
                    Some(gap.log10())
                } else {
                    None
                }
            })
            .collect();
        let total: f64 = self.records.iter().filter_map(|r| r.time_ms).sum();
        self.summary = Some(RunSummary {
            iterations: last.k,
            final_f: last.f,
            final_step_norm: last.step_norm,
            final_crit_measure: last.crit_measure,
            final_recovery_error: last.recovery_error,
            termination,
            total_time_ms: total,
            kl_log10_gap: kl,
            diagnostics: BTreeMap::new(),
            config_echo: None,
        });
    }

    pub const CSV_HEADER: &'static str = "k,f,step_norm,M,model_gap,crit_measure,recovery_error,time_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            let time = if self.emit_times { fmt_opt(r.time_ms) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k,
                r.f,
                r.step_norm,
                r.m_used,
                fmt_opt(r.model_gap),
                fmt_opt(r.crit_measure),
                fmt_opt(r.recovery_error),
                time
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self.summary()).expect("summary serializes")
    }

    /// Write `<prefix>.csv` and `<prefix>.json`.
    pub fn write(&self, prefix: &Path) -> io::Result<(std::path::PathBuf, std::path::PathBuf)> {
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("json");
        if let Some(parent) = csv_path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(&csv_path, self.to_csv())
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", csv_path.display())))?;
        fs::write(&json_path, self.summary_json())
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", json_path.display())))?;
        Ok((csv_path, json_path))
    }
}

/// Parse a JSON summary back (round-trip checks, downstream tooling).
pub fn parse_summary(json: &str) -> Result<RunSummary, serde_json::Error> {
    serde_json::from_str(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize, f: f64) -> IterationRecord {
        IterationRecord {
            k,
            x: vec![0.0],
            f,
            step_norm: 0.1,
            m_used: 2.0,
            model_value: Some(f),
            model_gap: Some(1e-9),
            crit_measure: None,
            recovery_error: None,
            time_ms: Some(3.25),
        }
    }

    #[test]
    fn single_record_run_has_header_plus_one_row() {
        let mut h = RunHistory::new();
        h.push(record(0, 1.0));
        h.finish(TerminationReason::FTol);
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], RunHistory::CSV_HEADER);
        assert!(lines[1].starts_with("0,1,0.1,2,"));
        // times suppressed by default
        assert!(lines[1].ends_with(','));
    }

    #[test]
    fn summary_roundtrip_and_consistency() {
        let mut h = RunHistory::new();
        h.push(record(0, 2.0));
        h.push(record(1, 1.0));
        h.finish(TerminationReason::StepTol);
        let s = h.summary().clone();
        assert_eq!(s.final_f, 1.0);
        assert_eq!(s.iterations, 1);
        let parsed = parse_summary(&h.summary_json()).unwrap();
        assert_eq!(parsed, s);
    }

    #[test]
    fn kl_series_marks_floor_point() {
        let mut h = RunHistory::new();
        h.push(record(0, 2.0));
        h.push(record(1, 1.0));
        h.finish(TerminationReason::MaxIterations);
        let kl = &h.summary().kl_log10_gap;
        assert_eq!(kl.len(), 2);
        assert!((kl[0].unwrap() - 0.0).abs() < 1e-12); // log10(2 − 1)
        assert!(kl[1].is_none()); // best point has no positive gap
    }

    #[test]
    #[should_panic(expected = "strictly increasing")]
    fn rejects_nonmonotone_indices() {
        let mut h = RunHistory::new();
        h.push(record(1, 1.0));
        h.push(record(1, 0.5));
    }
}
