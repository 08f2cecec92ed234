use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::config::Format;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Wall-clock measurements. Kept apart from the outputs so that payloads are
/// reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_seconds: f64,
    /// Per-cell times of a sweep, in cell order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cell_wall_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub schema_version: String,
    /// UTC, RFC 3339.
    pub timestamp: String,
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub software_version: String,
    pub timing: Timing,
}

impl ReportRecord {
    pub fn new(command: &str, inputs: Value, outputs: Value, timing: Timing) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            command: command.to_string(),
            inputs,
            outputs,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            timing,
        }
    }

    pub fn to_json_line(&self) -> String {
        to_json_string(self)
    }

    /// The record without `timestamp` and `timing`, serialized exactly as it
    /// is written. Two runs with the same arguments give identical payloads.
    pub fn payload(&self) -> String {
        let mut v = serde_json::to_value(self).expect("record serializes");
        let obj = v.as_object_mut().expect("record is an object");
        obj.shift_remove("timestamp");
        obj.shift_remove("timing");
        to_json_string(&v)
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with floats at 17 significant digits. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_into(&key, x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), to_json_string(other))),
    }
}

/// The tabular projection of a record's outputs: the `rows` array when there
/// is one, otherwise the outputs as a single row. Nested objects become
/// dotted column names and arrays are kept as JSON text. Columns appear in
/// first-seen order; missing cells are empty.
pub fn table(outputs: &Value) -> (Vec<String>, Vec<Vec<String>>) {
    let rows: Vec<&Value> = match outputs.get("rows").and_then(Value::as_array) {
        Some(rows) => rows.iter().collect(),
        None => vec![outputs],
    };
    let flat: Vec<Vec<(String, String)>> = rows
        .iter()
        .map(|r| {
            let mut cells = Vec::new();
            flatten_into("", r, &mut cells);
            cells
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for cells in &flat {
        for (k, _) in cells {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let body = flat
        .into_iter()
        .map(|cells| {
            let m: HashMap<String, String> = cells.into_iter().collect();
            header
                .iter()
                .map(|h| m.get(h).cloned().unwrap_or_default())
                .collect()
        })
        .collect();
    (header, body)
}

fn write_csv<W: Write>(record: &ReportRecord, w: W) -> CliResult<()> {
    let (header, body) = table(&record.outputs);
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(&header)?;
    for row in body {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// JSON lines are appended to `path`; CSV replaces it. `None` writes to stdout.
pub fn write_report(record: &ReportRecord, path: Option<&Path>, format: Format) -> CliResult<()> {
    match (format, path) {
        (Format::Json, Some(p)) => {
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            writeln!(f, "{}", record.to_json_line())?;
        }
        (Format::Json, None) => {
            let mut out = io::stdout().lock();
            writeln!(out, "{}", record.to_json_line())?;
        }
        (Format::Csv, Some(p)) => write_csv(record, File::create(p)?)?,
        (Format::Csv, None) => write_csv(record, io::stdout().lock())?,
    }
    Ok(())
}

/// Reads every record of a JSON-lines file.
pub fn read_reports(path: &Path) -> CliResult<Vec<ReportRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| {
            serde_json::from_str(&l?)
                .map_err(|e| CliError::Internal(format!("malformed report line: {e}")))
        })
        .collect()
}
