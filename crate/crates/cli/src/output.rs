//! Rendering of command results in the selected output format.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Flattens nested objects into dotted keys. Arrays of scalars are joined with
/// spaces; arrays holding objects are left out.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
            if let Some(parts) = parts {
                out.push((prefix.to_string(), parts.join(" ")));
            }
        }
        other => out.push((prefix.to_string(), scalar(other).unwrap_or_default())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render(value: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut cells = Vec::new();
            flatten("", value, &mut cells);
            let header: Vec<String> = cells.iter().map(|(k, _)| csv_field(k)).collect();
            let row: Vec<String> = cells.iter().map(|(_, v)| csv_field(v)).collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
        Format::Table => {
            let mut cells = Vec::new();
            flatten("", value, &mut cells);
            let width = cells.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            cells
                .iter()
                .map(|(k, v)| format!("{k:<width$}  {v}\n"))
                .collect()
        }
    }
}

pub fn write_text(text: &str, output: Option<&Path>) -> std::io::Result<()> {
    match output {
        Some(path) if path.as_os_str() != "-" => fs::write(path, text),
        _ => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
