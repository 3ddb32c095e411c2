//! On-disk model bundles.
//!
//! A bundle is a directory holding `model.json` (kernel, label encoding,
//! input map flags and a matrix table) and `matrices.bin`, the matrices as
//! little-endian `f64` in column-major order at the offsets the table lists.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::LabelEncoding;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::srm::{FittedModel, InputMap};

pub const MODEL_FILE: &str = "model.json";
pub const MATRIX_FILE: &str = "matrices.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct MatrixEntry {
    name: String,
    rows: usize,
    cols: usize,
    /// Byte offset into the matrix file.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    kernel: KernelSpec,
    encoding: LabelEncoding,
    mu_final: f64,
    normalize_rows: bool,
    matrices: Vec<MatrixEntry>,
}

fn push_matrix(buf: &mut Vec<u8>, table: &mut Vec<MatrixEntry>, name: &str, m: &DMatrix<f64>) {
    table.push(MatrixEntry {
        name: name.to_string(),
        rows: m.nrows(),
        cols: m.ncols(),
        offset: buf.len(),
    });
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_matrix(bytes: &[u8], table: &[MatrixEntry], name: &str, path: &Path) -> Result<Option<DMatrix<f64>>> {
    let Some(entry) = table.iter().find(|e| e.name == name) else {
        return Ok(None);
    };
    let len = entry.rows * entry.cols * 8;
    let chunk = bytes
        .get(entry.offset..entry.offset + len)
        .ok_or_else(|| Error::data(format!("{}: matrix {name:?} runs past end of file", path.display())))?;
    let values: Vec<f64> = chunk
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Some(DMatrix::from_vec(entry.rows, entry.cols, values)))
}

/// Writes `model` into directory `dir`, creating it if needed.
pub fn save_model(model: &FittedModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut buf = Vec::new();
    let mut table = Vec::new();
    push_matrix(&mut buf, &mut table, "beta", &model.beta);
    push_matrix(&mut buf, &mut table, "train_features", &model.train_features);
    if let Some(p) = &model.input_map.projection {
        push_matrix(&mut buf, &mut table, "projection", p);
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        kernel: model.kernel,
        encoding: model.encoding.clone(),
        mu_final: model.mu_final,
        normalize_rows: model.input_map.normalize_rows,
        matrices: table,
    };
    let json_path = dir.join(MODEL_FILE);
    fs::write(&json_path, serde_json::to_string_pretty(&header)?).map_err(|e| Error::io(&json_path, e))?;
    let bin_path = dir.join(MATRIX_FILE);
    fs::write(&bin_path, buf).map_err(|e| Error::io(&bin_path, e))
}

/// Reads a bundle written by [`save_model`].
pub fn load_model(dir: impl AsRef<Path>) -> Result<FittedModel> {
    let dir = dir.as_ref();
    let json_path = dir.join(MODEL_FILE);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: Header = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{}: {e}", json_path.display())))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported format version {}",
            json_path.display(),
            header.format_version
        )));
    }
    let bin_path = dir.join(MATRIX_FILE);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let required = |name: &str| -> Result<DMatrix<f64>> {
        read_matrix(&bytes, &header.matrices, name, &bin_path)?
            .ok_or_else(|| Error::data(format!("{}: missing matrix {name:?}", json_path.display())))
    };
    let beta = required("beta")?;
    let train_features = required("train_features")?;
    let projection = read_matrix(&bytes, &header.matrices, "projection", &bin_path)?;
    if beta.nrows() != train_features.nrows() || beta.ncols() != header.encoding.len() {
        return Err(Error::data(format!("{}: inconsistent matrix shapes", json_path.display())));
    }
    if let Some(p) = &projection {
        if p.nrows() != train_features.ncols() {
            return Err(Error::data(format!("{}: projection does not match features", json_path.display())));
        }
    }
    header.kernel.validate()?;
    Ok(FittedModel {
        beta,
        train_features,
        kernel: header.kernel,
        encoding: header.encoding,
        mu_final: header.mu_final,
        input_map: InputMap {
            normalize_rows: header.normalize_rows,
            projection,
        },
    })
}
