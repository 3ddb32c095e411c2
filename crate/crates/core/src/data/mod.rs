//! Feature matrices, label encodings and domain pairs.
//!
//! Every sample is a row. Labels, when present, are dense class indices in
//! `0..C`; the original tokens live in a [`LabelEncoding`] that orders them
//! lexicographically so that the index assignment does not depend on the
//! order in which samples appear in a file.

mod io;
mod synth;

pub use io::{load_features, read_table, write_features, LabelColumn, RawTable, write_matrix};
pub use synth::{make_shift_dataset, ShiftKind, ShiftSpec};

use std::collections::BTreeSet;

use nalgebra::{DMatrix, RowDVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N x D` sample matrix with optional per-row class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::data(format!(
                "feature matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            let (row, col) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::data(format!("non-finite value at row {row}, column {col}")));
        }
        if let Some(labels) = &labels {
            if labels.len() != values.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "labels",
                    expected: values.nrows(),
                    actual: labels.len(),
                });
            }
        }
        Ok(Self { values, labels })
    }

    pub fn unlabeled(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values, None)
    }

    pub fn labeled(values: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::new(values, Some(labels))
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: Option<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != d) {
            return Err(Error::DimensionMismatch {
                context: "row length",
                expected: d,
                actual: rows[bad].as_ref().len(),
            });
        }
        let values = DMatrix::from_fn(n, d, |i, j| rows[i].as_ref()[j]);
        Self::new(values, labels)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.values.row(i).into_owned()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Option<Vec<usize>>) {
        (self.values, self.labels)
    }

    pub fn with_labels(self, labels: Option<Vec<usize>>) -> Result<Self> {
        Self::new(self.values, labels)
    }

    pub fn without_labels(&self) -> Self {
        Self {
            values: self.values.clone(),
            labels: None,
        }
    }

    /// Replaces the values, keeping labels. Used by feature transforms.
    pub fn map_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "mapped rows",
                expected: self.len(),
                actual: values.nrows(),
            });
        }
        Self::new(values, self.labels.clone())
    }

    /// Rows at the given indices, in the given order (duplicates allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let values = self.values.select_rows(indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self { values, labels }
    }

    /// Indices of rows carrying class `c`.
    pub fn class_indices(&self, c: usize) -> Vec<usize> {
        match &self.labels {
            Some(l) => l
                .iter()
                .enumerate()
                .filter_map(|(i, &y)| (y == c).then_some(i))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Scales each row to unit Euclidean norm. Zero rows are left untouched.
    pub fn l2_normalized(&self) -> Self {
        let mut values = self.values.clone();
        for mut row in values.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        Self {
            values,
            labels: self.labels.clone(),
        }
    }

    /// Vertical concatenation `[self; other]`. Labels are dropped.
    pub fn stack_values(&self, other: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "stacked feature dimension",
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let (n, m, d) = (self.len(), other.len(), self.dim());
        let mut out = DMatrix::zeros(n + m, d);
        out.rows_mut(0, n).copy_from(&self.values);
        out.rows_mut(n, m).copy_from(&other.values);
        Ok(out)
    }
}

/// Bijection between original label tokens and class indices `0..C`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    classes: Vec<String>,
}

impl LabelEncoding {
    /// Sorted, de-duplicated tokens.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = tokens.into_iter().map(|t| t.as_ref().to_owned()).collect();
        Self {
            classes: set.into_iter().collect(),
        }
    }

    /// Tokens `0..C` zero-padded to equal width, so that the lexicographic
    /// order is the numeric one and id `c` maps to the token for `c`.
    pub fn numbered(class_count: usize) -> Self {
        let width = class_count.saturating_sub(1).to_string().len();
        Self::from_tokens((0..class_count).map(|c| format!("{c:0width$}")))
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(token)).ok()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.classes.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| Error::data(format!("unknown label token {:?}", t.as_ref())))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&i| {
                self.token(i)
                    .map(str::to_owned)
                    .ok_or_else(|| Error::data(format!("class index {i} outside encoding")))
            })
            .collect()
    }
}

/// A labeled source domain and a target domain over the same feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPair {
    source: FeatureMatrix,
    target: FeatureMatrix,
    class_count: usize,
}

impl DomainPair {
    pub fn new(source: FeatureMatrix, target: FeatureMatrix, class_count: usize) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                context: "source/target feature dimension",
                expected: source.dim(),
                actual: target.dim(),
            });
        }
        let Some(source_labels) = source.labels() else {
            return Err(Error::data("source domain must be labeled"));
        };
        if class_count == 0 {
            return Err(Error::data("class count must be positive"));
        }
        let out_of_range = source_labels
            .iter()
            .chain(target.labels().unwrap_or(&[]))
            .find(|&&y| y >= class_count);
        if let Some(y) = out_of_range {
            return Err(Error::data(format!(
                "label index {y} outside 0..{class_count}"
            )));
        }
        Ok(Self {
            source,
            target,
            class_count,
        })
    }

    /// Class count inferred as `1 + max label` over both domains.
    pub fn infer(source: FeatureMatrix, target: FeatureMatrix) -> Result<Self> {
        let max = source
            .labels()
            .unwrap_or(&[])
            .iter()
            .chain(target.labels().unwrap_or(&[]))
            .copied()
            .max()
            .ok_or_else(|| Error::data("source domain must be labeled"))?;
        Self::new(source, target, max + 1)
    }

    pub fn source(&self) -> &FeatureMatrix {
        &self.source
    }

    pub fn target(&self) -> &FeatureMatrix {
        &self.target
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn source_labels(&self) -> &[usize] {
        self.source.labels().expect("validated at construction")
    }

    pub fn target_labels(&self) -> Option<&[usize]> {
        self.target.labels()
    }

    pub fn n(&self) -> usize {
        self.source.len()
    }

    pub fn m(&self) -> usize {
        self.target.len()
    }
}

/// Replicates rows up to exactly `target_count` rows.
///
/// Every row appears `target_count / N` times in file order; the remaining
/// `target_count % N` rows are distinct rows drawn uniformly with a seeded
/// generator.
pub fn upsample(samples: &FeatureMatrix, target_count: usize, seed: u64) -> Result<FeatureMatrix> {
    let n = samples.len();
    if target_count < n {
        return Err(Error::data(format!(
            "upsample target {target_count} is smaller than the sample count {n}"
        )));
    }
    let reps = target_count / n;
    let extra = target_count % n;
    let mut indices: Vec<usize> = (0..reps).flat_map(|_| 0..n).collect();
    if extra > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, extra).into_vec();
        picked.sort_unstable();
        indices.extend(picked);
    }
    Ok(samples.select_rows(&indices))
}
