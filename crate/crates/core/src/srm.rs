//! Regularized kernel least-squares classifier in representer form.
//!
//! With `f(z) = sum_i beta_i K(z_i, z)` over all `n + m` training points
//! and one coefficient column per class, the objective
//!
//! ```text
//! |(Y - beta' K) A|_F^2 + eta tr(beta' K beta) + tr(beta' K (lambda M + rho L) K beta)
//! ```
//!
//! is minimized by `beta = ((A + lambda M + rho L) K + eta I)^-1 A Y'`.

use nalgebra::{DMatrix, DVector};

use crate::data::{DomainPair, LabelEncoding};
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec};
use crate::manifold::project;

/// One-hot source labels and the source indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    /// `C x (n + m)`; target columns are zero.
    pub y: DMatrix<f64>,
    /// Diagonal of `A`: 1 for source samples, 0 for target samples.
    pub indicator: DVector<f64>,
}

impl LabelMatrix {
    pub fn new(labels_s: &[usize], m: usize, class_count: usize) -> Result<Self> {
        let n = labels_s.len();
        let mut y = DMatrix::zeros(class_count, n + m);
        for (i, &c) in labels_s.iter().enumerate() {
            if c >= class_count {
                return Err(Error::data(format!("label {c} outside 0..{class_count}")));
            }
            y[(c, i)] = 1.0;
        }
        let indicator = DVector::from_fn(n + m, |i, _| if i < n { 1.0 } else { 0.0 });
        Ok(Self { y, indicator })
    }

    pub fn indicator_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.indicator)
    }

    /// `A Y'`, the right-hand side of the coefficient system.
    pub fn rhs(&self) -> DMatrix<f64> {
        let mut r = self.y.transpose();
        for (mut row, &a) in r.row_iter_mut().zip(self.indicator.iter()) {
            row *= a;
        }
        r
    }
}

/// Source-then-target label matrix for a domain pair.
pub fn build_labels(pair: &DomainPair) -> Result<LabelMatrix> {
    LabelMatrix::new(pair.source_labels(), pair.m(), pair.class_count())
}

/// Solves `(A K + R + eta I) beta = A Y'` where `R = (lambda M + rho L) K`
/// is supplied precomputed.
pub fn solve_with_regularizer(
    k: &DMatrix<f64>,
    labels: &LabelMatrix,
    reg_k: &DMatrix<f64>,
    eta: f64,
) -> Result<DMatrix<f64>> {
    let size = k.nrows();
    if !k.is_square() || reg_k.shape() != k.shape() || labels.indicator.len() != size {
        return Err(Error::DimensionMismatch {
            context: "coefficient system",
            expected: size,
            actual: labels.indicator.len(),
        });
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::config("eta", "must be non-negative"));
    }
    let mut op = reg_k.clone();
    for i in 0..size {
        let a = labels.indicator[i];
        if a != 0.0 {
            for j in 0..size {
                op[(i, j)] += a * k[(i, j)];
            }
        }
        op[(i, i)] += eta;
    }
    let rhs = labels.rhs();
    let beta = op
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("coefficient system is singular; use eta > 0"))?;
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("coefficient system produced non-finite values; use eta > 0"));
    }
    let scale = rhs.norm().max(f64::MIN_POSITIVE);
    let residual = (&op * &beta - &rhs).norm() / scale;
    if residual > 1e-8 {
        return Err(Error::numeric(format!(
            "coefficient system is ill-conditioned (relative residual {residual:.2e}); increase eta"
        )));
    }
    Ok(beta)
}

/// Dense closed-form coefficients `((A + lambda M + rho L) K + eta I)^-1 A Y'`.
#[allow(clippy::too_many_arguments)]
pub fn solve_beta(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    labels: &LabelMatrix,
    lambda: f64,
    rho: f64,
    eta: f64,
) -> Result<DMatrix<f64>> {
    if m.shape() != k.shape() || l.shape() != k.shape() {
        return Err(Error::DimensionMismatch {
            context: "alignment matrices",
            expected: k.nrows(),
            actual: m.nrows().max(l.nrows()),
        });
    }
    let reg_k = (m * lambda + l * rho) * k;
    solve_with_regularizer(k, labels, &reg_k, eta)
}

/// Objective value at `beta`, evaluated term by term.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    labels: &LabelMatrix,
    beta: &DMatrix<f64>,
    lambda: f64,
    rho: f64,
    eta: f64,
) -> f64 {
    let a = labels.indicator_matrix();
    let fit = ((&labels.y - beta.transpose() * k) * &a).norm_squared();
    let shrink = (beta.transpose() * k * beta).trace();
    let align = (beta.transpose() * k * (m * lambda + l * rho) * k * beta).trace();
    fit + eta * shrink + align
}

/// Index of the largest entry in each row; ties go to the lowest index.
pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "accuracy operands",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// How raw input rows are mapped into the space the model was trained in.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMap {
    /// Scale each row to unit norm first.
    pub normalize_rows: bool,
    /// `k x D` linear map applied after normalization; identity when absent.
    pub projection: Option<DMatrix<f64>>,
}

impl InputMap {
    pub fn identity() -> Self {
        Self {
            normalize_rows: false,
            projection: None,
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.projection.as_ref().map(|p| p.ncols())
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut x = x.clone();
        if self.normalize_rows {
            for mut row in x.row_iter_mut() {
                let norm = row.norm();
                if norm > 0.0 {
                    row /= norm;
                }
            }
        }
        match &self.projection {
            Some(p) => project(p, &x),
            None => Ok(x),
        }
    }
}

/// Everything needed to classify new samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    /// `(n + m) x C`.
    pub beta: DMatrix<f64>,
    /// Training points in the classifier's feature space, one per row.
    pub train_features: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub encoding: LabelEncoding,
    pub mu_final: f64,
    pub input_map: InputMap,
}

/// Scores and argmax labels for a batch of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// One row per sample, one column per class.
    pub scores: DMatrix<f64>,
}

impl FittedModel {
    pub fn class_count(&self) -> usize {
        self.beta.ncols()
    }

    /// Classifies rows that are already in the model's feature space.
    pub fn predict(&self, z: &DMatrix<f64>) -> Result<Prediction> {
        if z.ncols() != self.train_features.ncols() {
            return Err(Error::DimensionMismatch {
                context: "prediction features",
                expected: self.train_features.ncols(),
                actual: z.ncols(),
            });
        }
        let scores = gram(z, &self.train_features, &self.kernel)? * &self.beta;
        Ok(Prediction {
            labels: argmax_rows(&scores),
            scores,
        })
    }

    /// Classifies raw feature rows, applying the stored input map first.
    pub fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Prediction> {
        self.predict(&self.input_map.apply(x)?)
    }
}

/// Free-function form of [`FittedModel::predict`].
pub fn predict(model: &FittedModel, z: &DMatrix<f64>) -> Result<Prediction> {
    model.predict(z)
}
