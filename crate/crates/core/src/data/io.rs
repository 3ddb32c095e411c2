//! CSV feature files.
//!
//! One sample per row, comma-separated, `.` as the decimal mark. A header
//! row is optional and detected from its content. Row and column numbers in
//! parse errors are 1-based file positions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{FeatureMatrix, LabelEncoding};
use crate::error::{Error, Result};

/// Which column carries the class label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    /// Column named in the header row.
    Name(String),
    /// Zero-based column position.
    Index(usize),
    Last,
}

impl LabelColumn {
    /// Parses a command-line value: a bare integer is a position, `last`
    /// means the final column, anything else is a header name.
    pub fn parse(value: &str) -> Self {
        if value == "last" {
            LabelColumn::Last
        } else if let Ok(i) = value.parse::<usize>() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(value.to_owned())
        }
    }
}

/// A parsed CSV file before label encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub header: Option<Vec<String>>,
    pub values: DMatrix<f64>,
    pub label_tokens: Option<Vec<String>>,
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Reads a feature file without encoding labels.
pub fn read_table(path: impl AsRef<Path>, label_column: Option<&LabelColumn>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
                row: i + 1,
                column: *len as usize,
                message: format!("expected {expected_len} columns, found {len}"),
            },
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Parse {
                row: i + 1,
                column: 0,
                message: e.to_string(),
            },
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::data(format!("{}: empty feature file", path.display())));
    };
    let width = first.len();

    let (has_header, label_idx) = match label_column {
        Some(LabelColumn::Name(name)) => {
            let idx = first.iter().position(|c| c == name).ok_or_else(|| {
                Error::data(format!(
                    "{}: label column {name:?} not found in header row",
                    path.display()
                ))
            })?;
            (true, Some(idx))
        }
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(Error::data(format!(
                    "{}: label column {i} out of range for {width} columns",
                    path.display()
                )));
            }
            let header = first.iter().enumerate().any(|(j, c)| j != *i && !is_numeric(c));
            (header, Some(*i))
        }
        Some(LabelColumn::Last) => {
            let header = first.iter().take(width - 1).any(|c| !is_numeric(c));
            (header, Some(width - 1))
        }
        None => (first.iter().any(|c| !is_numeric(c)), None),
    };

    let header = has_header.then(|| first.iter().map(str::to_owned).collect::<Vec<_>>());
    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    let feature_cols: Vec<usize> = (0..width).filter(|&j| Some(j) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::data(format!("{}: no feature columns", path.display())));
    }

    let row_offset = if has_header { 2 } else { 1 };
    let mut data = Vec::with_capacity(body.len() * feature_cols.len());
    let mut tokens = label_idx.map(|_| Vec::with_capacity(body.len()));
    for (r, rec) in body.iter().enumerate() {
        for &j in &feature_cols {
            let cell = &rec[j];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + row_offset,
                column: j + 1,
                message: format!("non-numeric feature value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + row_offset,
                    column: j + 1,
                    message: format!("non-finite feature value {cell:?}"),
                });
            }
            data.push(v);
        }
        if let (Some(tokens), Some(li)) = (tokens.as_mut(), label_idx) {
            tokens.push(rec[li].to_owned());
        }
    }
    Ok(RawTable {
        header,
        values: DMatrix::from_row_slice(body.len(), feature_cols.len(), &data),
        label_tokens: tokens,
    })
}

/// Reads a feature file, encoding labels with a file-local lexicographic
/// encoding when a label column is given.
pub fn load_features(
    path: impl AsRef<Path>,
    label_column: Option<&LabelColumn>,
) -> Result<(FeatureMatrix, Option<LabelEncoding>)> {
    let table = read_table(path, label_column)?;
    match table.label_tokens {
        Some(tokens) => {
            let enc = LabelEncoding::from_tokens(&tokens);
            let labels = enc.encode(&tokens)?;
            Ok((FeatureMatrix::labeled(table.values, labels)?, Some(enc)))
        }
        None => Ok((FeatureMatrix::unlabeled(table.values)?, None)),
    }
}

/// Writes a headered CSV (`f1..fD[,label]`). Floats use the shortest
/// representation that parses back to the same value.
pub fn write_features(
    path: impl AsRef<Path>,
    features: &FeatureMatrix,
    encoding: Option<&LabelEncoding>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let d = features.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("f{j}")).collect();
    if features.labels().is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for i in 0..features.len() {
        let mut cells: Vec<String> = features.values().row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = features.labels() {
            let token = match encoding {
                Some(enc) => enc
                    .token(labels[i])
                    .ok_or_else(|| Error::data(format!("class index {} outside encoding", labels[i])))?
                    .to_owned(),
                None => labels[i].to_string(),
            };
            cells.push(token);
        }
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes a bare numeric matrix, one row per line, no header.
pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
