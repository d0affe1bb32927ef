//! CSV and JSON serialization of run results.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::runner::{ResultRow, Summary};

fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// RFC-4180 CSV with the fixed header
/// `experiment,level,path,t,value,stderr,wall_ms`.
pub fn csv_bytes(rows: &[ResultRow]) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["experiment", "level", "path", "t", "value", "stderr", "wall_ms"])
        .expect("in-memory write");
    for row in rows {
        writer
            .write_record([
                row.experiment.as_str(),
                &row.level.to_string(),
                &row.path,
                &format_f64(row.t),
                &format_f64(row.value),
                &row.stderr.map(format_f64).unwrap_or_default(),
                &row.wall_ms.to_string(),
            ])
            .expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn summary_bytes(summary: &Summary) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(summary).expect("serializable summary");
    bytes.push(b'\n');
    bytes
}

/// The JSON summary lands next to the CSV with the extension swapped.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_outputs(
    csv_path: &Path,
    rows: &[ResultRow],
    summary: &Summary,
) -> std::io::Result<()> {
    let mut csv_file = std::fs::File::create(csv_path)?;
    csv_file.write_all(&csv_bytes(rows))?;
    let mut json_file = std::fs::File::create(summary_path(csv_path))?;
    json_file.write_all(&summary_bytes(summary))?;
    Ok(())
}

/// Parse rows back from CSV (the `order` subcommand).
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format!("bad CSV: {e}"))?;
        if record.len() != 7 {
            return Err(format!("expected 7 columns, found {}", record.len()));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, String> {
            s.parse()
                .map_err(|_| format!("bad {what} value `{s}` in CSV"))
        };
        rows.push(ResultRow {
            experiment: record[0].to_string(),
            level: record[1]
                .parse()
                .map_err(|_| format!("bad level `{}`", &record[1]))?,
            path: record[2].to_string(),
            t: parse_f(&record[3], "t")?,
            value: parse_f(&record[4], "value")?,
            stderr: if record[5].is_empty() {
                None
            } else {
                Some(parse_f(&record[5], "stderr")?)
            },
            wall_ms: record[6]
                .parse()
                .map_err(|_| format!("bad wall_ms `{}`", &record[6]))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(level: usize, path: &str, t: f64, value: f64) -> ResultRow {
        ResultRow {
            experiment: "demo".into(),
            level,
            path: path.into(),
            t,
            value,
            stderr: None,
            wall_ms: 0,
        }
    }

    #[test]
    fn csv_round_trips() {
        let rows = vec![row(0, "0", 1.0, 0.125), row(0, "mean", 1.0, -3.5e-7)];
        let bytes = csv_bytes(&rows);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("experiment,level,path,t,value,stderr,wall_ms\n"));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn summary_serializes_with_fixed_field_order() {
        let s = Summary {
            experiment: "demo".into(),
            pass: true,
            max_residual: 2e-5,
            order_estimate: None,
            seed: 42,
        };
        let text = String::from_utf8(summary_bytes(&s)).unwrap();
        let exp_pos = text.find("experiment").unwrap();
        let pass_pos = text.find("pass").unwrap();
        let seed_pos = text.find("seed").unwrap();
        assert!(exp_pos < pass_pos && pass_pos < seed_pos);
    }
}
