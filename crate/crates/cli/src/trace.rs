//! Trace files: CSV with `#` header lines carrying run metadata, a
//! description of every column and the checks the report evaluates.
//!
//! ```text
//! # spingarn-trace 1
//! # meta solver: hpe
//! # column norm_v: ‖v_k‖
//! # check pointwise_v: bound audit_norm_v bound_pointwise_v
//! k,norm_v,...
//! 1,2.5000000000000000e-1,...
//! ```

use std::fmt::Write as _;

use crate::CliError;

pub const TRACE_MAGIC: &str = "# spingarn-trace 1";

/// Formats with 17 significant digits, which round-trips every `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub description: String,
    /// Printed without a fractional part.
    pub integer: bool,
}

/// A pass/fail rule evaluated over the rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    /// `observed ≤ bound` on every row, reported as the largest ratio.
    Bound { name: String, observed: String, bound: String },
    /// `max column ≤ limit`.
    AtMost { name: String, column: String, limit: f64 },
    /// `min column > limit`.
    Above { name: String, column: String, limit: f64 },
    /// `|last value| ≤ limit`.
    FinalAbsAtMost { name: String, column: String, limit: f64 },
}

impl Check {
    pub fn name(&self) -> &str {
        match self {
            Self::Bound { name, .. } | Self::AtMost { name, .. } | Self::Above { name, .. } | Self::FinalAbsAtMost { name, .. } => {
                name
            }
        }
    }

    fn encode(&self) -> String {
        match self {
            Self::Bound { name, observed, bound } => format!("{name}: bound {observed} {bound}"),
            Self::AtMost { name, column, limit } => format!("{name}: at_most {column} {}", fmt_num(*limit)),
            Self::Above { name, column, limit } => format!("{name}: above {column} {}", fmt_num(*limit)),
            Self::FinalAbsAtMost { name, column, limit } => format!("{name}: final_abs_at_most {column} {}", fmt_num(*limit)),
        }
    }

    fn decode(text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Trace(format!("malformed check line: {text}"));
        let (name, rest) = text.split_once(": ").ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let name = name.to_string();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(match parts.as_slice() {
            ["bound", o, b] => Self::Bound { name, observed: o.to_string(), bound: b.to_string() },
            ["at_most", c, l] => Self::AtMost { name, column: c.to_string(), limit: num(l)? },
            ["above", c, l] => Self::Above { name, column: c.to_string(), limit: num(l)? },
            ["final_abs_at_most", c, l] => Self::FinalAbsAtMost { name, column: c.to_string(), limit: num(l)? },
            _ => return Err(bad()),
        })
    }
}

/// In-memory trace. Missing values (for instance bounds when no solution
/// is known) are `None` and written as empty cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn meta_num(&mut self, key: &str, value: f64) {
        self.meta(key, fmt_num(value));
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&mut self, name: &str, description: &str) {
        self.columns.push(Column { name: name.into(), description: description.into(), integer: false });
    }

    pub fn int_column(&mut self, name: &str, description: &str) {
        self.columns.push(Column { name: name.into(), description: description.into(), integer: true });
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, text: &str) {
        self.notes.push(text.into());
    }

    pub fn push_row(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of one column.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_MAGIC);
        out.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# meta {k}: {v}");
        }
        for c in &self.columns {
            let kind = if c.integer { "int " } else { "" };
            let _ = writeln!(out, "# column {kind}{}: {}", c.name, c.description);
        }
        for c in &self.checks {
            let _ = writeln!(out, "# check {}", c.encode());
        }
        for n in &self.notes {
            let _ = writeln!(out, "# note {n}");
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).expect("in-memory write");
        for row in &self.rows {
            let cells = row.iter().zip(&self.columns).map(|(v, c)| match v {
                None => String::new(),
                Some(x) if c.integer => format!("{}", *x as i64),
                Some(x) => fmt_num(*x),
            });
            w.write_record(cells).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("utf-8 cells"));
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        if lines.next() != Some(TRACE_MAGIC) {
            return Err(CliError::Trace("missing trace header line".into()));
        }
        let mut t = Trace::new();
        let mut body = String::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("# ") {
                let bad = || CliError::Trace(format!("malformed header line: {line}"));
                if let Some(m) = rest.strip_prefix("meta ") {
                    let (k, v) = m.split_once(": ").ok_or_else(bad)?;
                    t.meta(k, v);
                } else if let Some(c) = rest.strip_prefix("column ") {
                    let (c, integer) = match c.strip_prefix("int ") {
                        Some(c) => (c, true),
                        None => (c, false),
                    };
                    let (name, description) = c.split_once(": ").ok_or_else(bad)?;
                    t.columns.push(Column { name: name.into(), description: description.into(), integer });
                } else if let Some(c) = rest.strip_prefix("check ") {
                    t.checks.push(Check::decode(c)?);
                } else if let Some(n) = rest.strip_prefix("note ") {
                    t.notes.push(n.into());
                } else {
                    return Err(bad());
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = r.headers().map_err(|e| CliError::Trace(e.to_string()))?.clone();
        let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
        if header.iter().collect::<Vec<_>>() != names {
            return Err(CliError::Trace("CSV header does not match the column descriptions".into()));
        }
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::Trace(e.to_string()))?;
            let row = rec
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| CliError::Trace(format!("bad number {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            t.rows.push(row);
        }
        for c in &t.checks {
            let cols: Vec<&str> = match c {
                Check::Bound { observed, bound, .. } => vec![observed, bound],
                Check::AtMost { column, .. } | Check::Above { column, .. } | Check::FinalAbsAtMost { column, .. } => vec![column],
            };
            if let Some(missing) = cols.iter().find(|n| t.column_index(n).is_none()) {
                return Err(CliError::Trace(format!("check {} refers to unknown column {missing}", c.name())));
            }
        }
        Ok(t)
    }
}
