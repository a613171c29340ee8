//! CSV rows shared by the command-line runner and the acceptance suite.
//!
//! Floats are written with 17 significant digits so that a value read back
//! is bit-identical to the one written.

use std::io::Write;

use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = ["experiment", "field", "i0", "grid", "value", "err_proxy", "extra"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub field: String,
    pub i0: f64,
    pub grid: String,
    pub value: f64,
    pub err_proxy: f64,
    pub extra: Vec<(String, String)>,
}

impl Row {
    pub fn new(experiment: impl Into<String>, field: impl Into<String>, i0: f64, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            field: field.into(),
            i0,
            grid: String::new(),
            value,
            err_proxy: 0.0,
            extra: Vec::new(),
        }
    }

    pub fn grid(mut self, grid: impl ToString) -> Self {
        self.grid = grid.to_string();
        self
    }

    pub fn err_proxy(mut self, e: f64) -> Self {
        self.err_proxy = e;
        self
    }

    pub fn extra(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    pub fn extra_float(self, key: impl Into<String>, value: f64) -> Self {
        self.extra(key, format_float(value))
    }

    fn record(&self) -> [String; 7] {
        let extra = self
            .extra
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        [
            self.experiment.clone(),
            self.field.clone(),
            format_float(self.i0),
            self.grid.clone(),
            format_float(self.value),
            format_float(self.err_proxy),
            extra,
        ]
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

pub fn to_csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("rows are UTF-8")
}
