//! Aligned text tables and their JSON-lines twins.

use serde_json::{Map, Value};

use crate::Format;

pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, values: Vec<Value>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    /// Table mode pads columns; JSON-lines mode prints one object per row
    /// with the column names as keys.
    pub fn print(&self, format: Format) {
        if format == Format::JsonLines {
            for row in &self.rows {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.clone()))
                    .collect();
                println!("{}", Value::Object(obj));
            }
            return;
        }
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| cells.iter().map(|r| r[i].len()).chain([self.columns[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |values: Vec<&str>| {
            let padded: Vec<String> = values.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            println!("{}", padded.join("  ").trim_end());
        };
        line(self.columns.clone());
        for r in &cells {
            line(r.iter().map(String::as_str).collect());
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON number rounded to `digits` decimals, for display columns.
pub fn num(x: f64, digits: i32) -> Value {
    let p = 10f64.powi(digits);
    serde_json::json!((x * p).round() / p)
}

/// Relative errors keep their magnitude: three significant digits.
pub fn sci(x: f64) -> Value {
    Value::String(format!("{x:.2e}"))
}

/// `# key: value` lines in text modes, one object in JSON-lines mode.
pub fn preamble(format: Format, entries: &[(&str, Value)]) {
    if format == Format::JsonLines {
        let obj: Map<String, Value> = entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        println!("{}", Value::Object(obj));
    } else {
        for (k, v) in entries {
            println!("# {k}: {}", cell(v));
        }
    }
}
