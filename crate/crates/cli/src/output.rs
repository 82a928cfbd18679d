use std::io::Write;

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Rows under fixed column names. In CSV, array cells are joined with `;`.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

/// Writes the settings line and then the table.
pub fn write_table(out: &mut dyn Write, format: Format, header: &Map<String, Value>, table: &Table) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let mut first = Map::new();
            first.insert("config".into(), Value::Object(header.clone()));
            writeln!(out, "{}", Value::Object(first))?;
            for row in &table.rows {
                let obj: Map<String, Value> =
                    table.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.clone())).collect();
                writeln!(out, "{}", Value::Object(obj))?;
            }
        }
        Format::Csv => {
            let settings: Vec<String> = header.iter().map(|(k, v)| format!("{k}={}", cell(v))).collect();
            writeln!(out, "# {}", settings.join(" "))?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&table.columns).map_err(csv_io)?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell)).map_err(csv_io)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
