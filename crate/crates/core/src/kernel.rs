//! Kernel functions and dense Gram matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positive semidefinite kernel on row vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-|a - b|^2 / (2 * bandwidth))`
    Rbf { bandwidth: f64 },
    /// `a . b`
    Linear,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::config("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec::Rbf { bandwidth })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { bandwidth } => Self::rbf(bandwidth).map(|_| ()),
            KernelSpec::Linear => Ok(()),
        }
    }

    /// Kernel value for two equally long slices.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { bandwidth } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * bandwidth)).exp()
            }
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// Sum of the per-column population variances.
///
/// This is the default RBF bandwidth; it enters the exponent as `2 * bw`.
pub fn default_bandwidth(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::data("bandwidth estimation needs at least two samples"));
    }
    let total: f64 = x
        .column_iter()
        .map(|col| {
            let mean = col.mean();
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
        })
        .sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::data(
            "all features are constant; set an explicit kernel bandwidth",
        ));
    }
    Ok(total)
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `N1 x N2` matrix of kernel values between the rows of `x1` and `x2`.
pub fn gram(x1: &DMatrix<f64>, x2: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    if x1.ncols() != x2.ncols() {
        return Err(Error::DimensionMismatch {
            context: "gram matrix operands",
            expected: x1.ncols(),
            actual: x2.ncols(),
        });
    }
    let a = rows_of(x1);
    let b = rows_of(x2);
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .map(|ra| b.iter().map(|rb| spec.eval(ra, rb)).collect())
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// Symmetric Gram matrix of `x` with itself.
pub fn gram_symmetric(x: &DMatrix<f64>, spec: &KernelSpec) -> DMatrix<f64> {
    let a = rows_of(x);
    let n = a.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.eval(&a[i], &a[j])).collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            k[(i, i + off)] = v;
            k[(i + off, i)] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    #[test]
    fn rbf_diagonal_is_one() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, -3.0, 0.5, 0.5]);
        let k = gram(&x, &x, &KernelSpec::rbf(0.7).unwrap()).unwrap();
        for i in 0..3 {
            assert_eq!(k[(i, i)], 1.0);
        }
    }

    #[test]
    fn linear_orthogonal_is_zero() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]);
        assert_eq!(gram(&a, &b, &KernelSpec::Linear).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn bandwidth_is_summed_population_variance() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        assert_eq!(default_bandwidth(&x).unwrap(), 1.0);
        let scaled = &x * 3.0;
        assert!((default_bandwidth(&scaled).unwrap() - 9.0).abs() < 1e-12);
        assert!(default_bandwidth(&DMatrix::from_element(4, 3, 2.5)).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(KernelSpec::rbf(0.0).is_err());
        let a = DMatrix::zeros(2, 3);
        let b = DMatrix::zeros(2, 4);
        assert!(gram(&a, &b, &KernelSpec::Linear).is_err());
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
    }

    proptest! {
        #[test]
        fn gram_is_symmetric_psd(x in matrix(6, 3), bw in 0.1f64..5.0, linear in any::<bool>()) {
            let spec = if linear { KernelSpec::Linear } else { KernelSpec::rbf(bw).unwrap() };
            let k = gram(&x, &x, &spec).unwrap();
            prop_assert!((&k - k.transpose()).abs().max() <= 1e-12);
            let min_eig = SymmetricEigen::new(k).eigenvalues.min();
            prop_assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);
            prop_assert_eq!(gram_symmetric(&x, &spec), gram(&x, &x, &spec).unwrap());
        }

        #[test]
        fn gram_transpose_consistency(a in matrix(4, 3), b in matrix(5, 3)) {
            let spec = KernelSpec::rbf(1.3).unwrap();
            let ab = gram(&a, &b, &spec).unwrap();
            let ba = gram(&b, &a, &spec).unwrap();
            prop_assert!((ab - ba.transpose()).abs().max() <= 1e-12);
        }
    }
}
