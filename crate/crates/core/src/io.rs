//! CSV ingestion and export.
//!
//! Point files hold one row per point with `d` float columns and an optional
//! final `label` column (which requires a header row). Distance-matrix files
//! hold one row per client and a header whose columns are all named `dist_<j>`.
//! Parsing is locale-independent; `.` is the only decimal separator.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::instance::Point;

pub const MATRIX_COLUMN_PREFIX: &str = "dist_";
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Points {
        points: Vec<Point>,
        labels: Option<Vec<usize>>,
    },
    /// Client × facility distances.
    Matrix { rows: Vec<Vec<f64>> },
}

impl Table {
    pub fn len(&self) -> usize {
        match self {
            Table::Points { points, .. } => points.len(),
            Table::Matrix { rows } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_table_path(path: impl AsRef<Path>) -> Result<Table> {
    read_table(File::open(path)?)
}

pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::invalid("CSV input is empty")),
    };

    let first_is_numeric = first.iter().all(|f| f.parse::<f64>().is_ok());
    let (header, mut rows_raw) = if first_is_numeric {
        (None, vec![first])
    } else {
        (Some(first), Vec::new())
    };
    for r in records {
        rows_raw.push(r.map_err(csv_error)?);
    }

    let is_matrix = header
        .as_ref()
        .is_some_and(|h| h.iter().all(|c| c.starts_with(MATRIX_COLUMN_PREFIX)));
    let has_label = header
        .as_ref()
        .is_some_and(|h| h.iter().next_back() == Some(LABEL_COLUMN));
    let width = header
        .as_ref()
        .map(|h| h.len())
        .unwrap_or_else(|| rows_raw[0].len());
    let n_float = if has_label { width - 1 } else { width };
    if n_float == 0 {
        return Err(Error::invalid("CSV input has no coordinate columns"));
    }

    let mut values = Vec::with_capacity(rows_raw.len());
    let mut labels = Vec::new();
    for rec in &rows_raw {
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(n_float);
        for (j, field) in rec.iter().take(n_float).enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("invalid number {field:?}"),
            })?;
            row.push(v);
        }
        if has_label {
            let field = &rec[width - 1];
            let l: usize = field.parse().map_err(|_| Error::Parse {
                line,
                column: width,
                message: format!("invalid label {field:?}"),
            })?;
            labels.push(l);
        }
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::invalid("CSV input has no data rows"));
    }

    Ok(if is_matrix {
        Table::Matrix { rows: values }
    } else {
        Table::Points {
            points: values,
            labels: has_label.then_some(labels),
        }
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

pub fn write_points_csv<W: Write>(w: W, points: &[Point], labels: Option<&[usize]>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let d = points.first().map_or(0, |p| p.len());
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push(LABEL_COLUMN.to_string());
    }
    wtr.write_record(&header).map_err(csv_write_error)?;
    for (i, p) in points.iter().enumerate() {
        let mut rec: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        wtr.write_record(&rec).map_err(csv_write_error)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix_csv<W: Write>(w: W, rows: &[Vec<f64>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let m = rows.first().map_or(0, |r| r.len());
    let header: Vec<String> = (0..m).map(|j| format!("{MATRIX_COLUMN_PREFIX}{j}")).collect();
    wtr.write_record(&header).map_err(csv_write_error)?;
    for r in rows {
        wtr.write_record(r.iter().map(|v| v.to_string()))
            .map_err(csv_write_error)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("CSV write failed: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headerless_points() {
        let t = read_table("1.5,2\n-3,4e-1\n".as_bytes()).unwrap();
        assert_eq!(
            t,
            Table::Points {
                points: vec![vec![1.5, 2.0], vec![-3.0, 0.4]],
                labels: None
            }
        );
    }

    #[test]
    fn labelled_points() {
        let t = read_table("x0,x1,label\n0,0,1\n1,1,0\n".as_bytes()).unwrap();
        match t {
            Table::Points { points, labels } => {
                assert_eq!(points.len(), 2);
                assert_eq!(labels, Some(vec![1, 0]));
            }
            _ => panic!("expected points"),
        }
    }

    #[test]
    fn matrix_header() {
        let t = read_table("dist_0,dist_1\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(
            t,
            Table::Matrix {
                rows: vec![vec![1.0, 2.0], vec![3.0, 4.0]]
            }
        );
    }

    #[test]
    fn parse_error_names_line_and_column() {
        let err = read_table("x0,x1\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comma_decimal_is_rejected() {
        assert!(read_table("x0;x1\n1,5;2\n".as_bytes()).is_err());
    }

    #[test]
    fn ragged_row_is_reported() {
        let err = read_table("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn write_then_read_points() {
        let pts = vec![vec![0.1, 1.0 / 3.0], vec![-2.5, 1e-17]];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &pts, Some(&[0, 1])).unwrap();
        let t = read_table(buf.as_slice()).unwrap();
        assert_eq!(
            t,
            Table::Points {
                points: pts,
                labels: Some(vec![0, 1])
            }
        );
    }
}
