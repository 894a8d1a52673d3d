//! Reports computed from a trace alone, so that auditing a saved trace
//! reproduces the report of the run that wrote it.

use std::fmt::Write as _;

use crate::trace::{fmt_num, Check, Trace};

/// Relative slack on bound ratios: PASS iff every `observed/bound ≤ 1 + BOUND_SLACK`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// No row carries both an observation and a bound.
    NotApplicable,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::NotApplicable => "N/A",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    /// What `value` measures.
    pub measure: &'static str,
    pub value: Option<f64>,
    /// First row (1-based) at which the check fails.
    pub first_failure: Option<usize>,
    pub status: Status,
}

fn ratio(observed: f64, bound: f64) -> f64 {
    if observed == 0.0 {
        0.0
    } else if bound == 0.0 {
        f64::INFINITY
    } else {
        observed / bound
    }
}

fn evaluate(trace: &Trace, check: &Check) -> CheckOutcome {
    let col = |name: &str| trace.values(name).expect("trace parsing validates check columns");
    let name = check.name().to_string();
    let (measure, value, first_failure) = match check {
        Check::Bound { observed, bound, .. } => {
            let (o, b) = (col(observed), col(bound));
            let ratios: Vec<(usize, f64)> = o
                .iter()
                .zip(&b)
                .enumerate()
                .filter_map(|(i, (o, b))| Some((i + 1, ratio((*o)?, (*b)?))))
                .collect();
            let max = ratios.iter().map(|r| r.1).fold(None, |a: Option<f64>, r| Some(a.map_or(r, |a| a.max(r))));
            let fail = ratios.iter().find(|r| !(r.1 <= 1.0 + BOUND_SLACK)).map(|r| r.0);
            ("max observed/bound", max, fail)
        }
        Check::AtMost { column, limit, .. } => {
            let v = col(column);
            let max = v.iter().flatten().copied().fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))));
            let fail = v.iter().position(|x| matches!(x, Some(x) if !(*x <= *limit))).map(|i| i + 1);
            ("max", max, fail)
        }
        Check::Above { column, limit, .. } => {
            let v = col(column);
            let min = v.iter().flatten().copied().fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.min(x))));
            let fail = v.iter().position(|x| matches!(x, Some(x) if !(*x > *limit))).map(|i| i + 1);
            ("min", min, fail)
        }
        Check::FinalAbsAtMost { column, limit, .. } => {
            let v = col(column);
            let last = v.iter().rposition(|x| x.is_some());
            let fail = last.filter(|&i| !(v[i].expect("some").abs() <= *limit)).map(|i| i + 1);
            ("final |value|", last.map(|i| v[i].expect("some")), fail)
        }
    };
    let status = match (value, first_failure) {
        (None, _) => Status::NotApplicable,
        (_, Some(_)) => Status::Fail,
        _ => Status::Pass,
    };
    CheckOutcome { name, measure, value, first_failure, status }
}

/// Evaluates every check of the trace: bound families report their largest
/// observed/bound ratio.
pub fn emit_bound_table(trace: &Trace) -> Vec<CheckOutcome> {
    trace.checks.iter().map(|c| evaluate(trace, c)).collect()
}

/// Summary of one run, computed from its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub meta: Vec<(String, String)>,
    pub iterations: usize,
    pub outcomes: Vec<CheckOutcome>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn from_trace(trace: &Trace) -> Self {
        Self { meta: trace.meta.clone(), iterations: trace.rows.len(), outcomes: emit_bound_table(trace), notes: trace.notes.clone() }
    }

    /// FAIL if any check fails, otherwise PASS.
    pub fn status(&self) -> Status {
        if self.outcomes.iter().any(|o| o.status == Status::Fail) {
            Status::Fail
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "spingarn run report");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "{k}: {v}");
        }
        let _ = writeln!(out, "iterations: {}", self.iterations);
        let _ = writeln!(out, "checks (bound families PASS iff observed/bound <= 1 + {BOUND_SLACK:e} on every row):");
        let width = self.outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
        for o in &self.outcomes {
            let value = o.value.map_or_else(|| "-".to_string(), fmt_num);
            let _ = write!(out, "  {:width$}  {:<18}  {:>24}  {}", o.name, o.measure, value, o.status.as_str());
            if let Some(r) = o.first_failure {
                let _ = write!(out, " (first failure at row {r})");
            }
            out.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let _ = writeln!(out, "status: {}", self.status().as_str());
        out
    }
}
