//! MMD alignment matrices and empirical MMD estimates.
//!
//! Samples are indexed source rows first (`0..n`) then target rows
//! (`n..n+m`). For a coefficient matrix `F = K beta`, `tr(F' M0 F)` is the
//! squared distance between the domain means of the learned function and
//! `tr(F' Mc F)` the same restricted to class `c`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec};

/// Combined alignment matrix `(1 - mu) M0 + mu * sum_c Mc`.
#[derive(Clone, Debug, PartialEq)]
pub struct MmdMatrix {
    pub matrix: DMatrix<f64>,
    pub mu: f64,
    pub n: usize,
    pub m: usize,
}

/// Domain-indicator vector: `1/n` on source rows, `-1/m` on target rows.
fn marginal_vector(n: usize, m: usize) -> DVector<f64> {
    DVector::from_fn(n + m, |i, _| if i < n { 1.0 / n as f64 } else { -1.0 / m as f64 })
}

/// Class indicator vector, or `None` when the class is missing from either
/// domain.
fn class_vector(labels_s: &[usize], pseudo_t: &[usize], c: usize) -> Option<DVector<f64>> {
    let (n, m) = (labels_s.len(), pseudo_t.len());
    let n_c = labels_s.iter().filter(|&&y| y == c).count();
    let m_c = pseudo_t.iter().filter(|&&y| y == c).count();
    if n_c == 0 || m_c == 0 {
        return None;
    }
    let mut e = DVector::zeros(n + m);
    for (i, _) in labels_s.iter().enumerate().filter(|(_, &y)| y == c) {
        e[i] = 1.0 / n_c as f64;
    }
    for (j, _) in pseudo_t.iter().enumerate().filter(|(_, &y)| y == c) {
        e[n + j] = -1.0 / m_c as f64;
    }
    Some(e)
}

/// `(M0)_ij`: `1/n^2` within source, `1/m^2` within target, `-1/(nm)` across.
pub fn mmd_matrix_marginal(n: usize, m: usize) -> DMatrix<f64> {
    let e = marginal_vector(n, m);
    &e * e.transpose()
}

/// `(Mc)_ij` for class `c`. All zero when either domain has no sample of
/// class `c`.
pub fn mmd_matrix_conditional(labels_s: &[usize], pseudo_t: &[usize], c: usize) -> DMatrix<f64> {
    let size = labels_s.len() + pseudo_t.len();
    match class_vector(labels_s, pseudo_t, c) {
        Some(e) => &e * e.transpose(),
        None => DMatrix::zeros(size, size),
    }
}

/// Elementwise `(1 - mu) M0 + mu * sum(Mcs)`.
pub fn combine(m0: &DMatrix<f64>, mcs: &[DMatrix<f64>], mu: f64, n: usize) -> Result<MmdMatrix> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::config("mu", format!("must lie in [0, 1], got {mu}")));
    }
    if !m0.is_square() || m0.nrows() < n {
        return Err(Error::data("M0 must be square with at least n rows"));
    }
    let mut matrix = m0 * (1.0 - mu);
    for mc in mcs {
        if mc.shape() != m0.shape() {
            return Err(Error::DimensionMismatch {
                context: "conditional MMD matrix",
                expected: m0.nrows(),
                actual: mc.nrows(),
            });
        }
        matrix += mc * mu;
    }
    Ok(MmdMatrix {
        matrix,
        mu,
        n,
        m: m0.nrows() - n,
    })
}

/// `M` kept as a weighted sum of rank-one terms `w e e'`.
///
/// Equal to [`combine`] of the dense matrices, but products with `M` cost
/// `O(C N^2)` instead of `O(N^3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MmdTerms {
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    terms: Vec<(f64, DVector<f64>)>,
}

impl MmdTerms {
    pub fn build(labels_s: &[usize], pseudo_t: &[usize], class_count: usize, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::config("mu", format!("must lie in [0, 1], got {mu}")));
        }
        let (n, m) = (labels_s.len(), pseudo_t.len());
        let mut terms = vec![(1.0 - mu, marginal_vector(n, m))];
        for c in 0..class_count {
            if let Some(e) = class_vector(labels_s, pseudo_t, c) {
                terms.push((mu, e));
            }
        }
        Ok(Self { n, m, mu, terms })
    }

    pub fn size(&self) -> usize {
        self.n + self.m
    }

    /// `|M|_F`, from the Gram matrix of the term vectors.
    pub fn frobenius_norm(&self) -> f64 {
        let mut sq = 0.0;
        for (wa, a) in &self.terms {
            for (wb, b) in &self.terms {
                sq += wa * wb * a.dot(b).powi(2);
            }
        }
        sq.max(0.0).sqrt()
    }

    /// `M` multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for (w, _) in &mut self.terms {
            *w *= factor;
        }
        self
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let size = self.size();
        let mut out = DMatrix::zeros(size, size);
        for (w, e) in &self.terms {
            out.ger(*w, e, e, 1.0);
        }
        out
    }

    /// `M * x`.
    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size(), x.ncols());
        for (w, e) in &self.terms {
            let proj = e.transpose() * x;
            out.ger(*w, e, &proj.transpose(), 1.0);
        }
        out
    }

    /// `tr(F' M F)`.
    pub fn quad_form(&self, f: &DMatrix<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(w, e)| w * (e.transpose() * f).norm_squared())
            .sum()
    }
}

/// Biased squared MMD: `mean k(s,s) + mean k(t,t) - 2 mean k(s,t)`.
pub fn mmd_biased(xs: &DMatrix<f64>, xt: &DMatrix<f64>, spec: &KernelSpec) -> Result<f64> {
    let kss = gram(xs, xs, spec)?;
    let ktt = gram(xt, xt, spec)?;
    let kst = gram(xs, xt, spec)?;
    Ok(kss.mean() + ktt.mean() - 2.0 * kst.mean())
}

/// Linear-time MMD estimate over consecutive quadruples, in row order.
///
/// Averages `k(s1,s2) + k(t1,t2) - k(s1,t2) - k(s2,t1)` over the first
/// `floor(min(n, m) / 2)` row pairs; a trailing odd row is dropped.
pub fn mmd_linear(xs: &DMatrix<f64>, xt: &DMatrix<f64>, spec: &KernelSpec) -> Result<f64> {
    if xs.nrows() < 2 || xt.nrows() < 2 {
        return Err(Error::data("linear MMD needs at least two samples per domain"));
    }
    if xs.ncols() != xt.ncols() {
        return Err(Error::DimensionMismatch {
            context: "linear MMD operands",
            expected: xs.ncols(),
            actual: xt.ncols(),
        });
    }
    let pairs = xs.nrows().min(xt.nrows()) / 2;
    let row = |x: &DMatrix<f64>, i: usize| -> Vec<f64> { x.row(i).iter().copied().collect() };
    let mut total = 0.0;
    for i in 0..pairs {
        let (s1, s2) = (row(xs, 2 * i), row(xs, 2 * i + 1));
        let (t1, t2) = (row(xt, 2 * i), row(xt, 2 * i + 1));
        total += spec.eval(&s1, &s2) + spec.eval(&t1, &t2) - spec.eval(&s1, &t2) - spec.eval(&s2, &t1);
    }
    Ok(total / pairs as f64)
}

/// [`mmd_linear`] after independently shuffling the rows of each domain.
pub fn mmd_linear_shuffled(
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    spec: &KernelSpec,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is: Vec<usize> = (0..xs.nrows()).collect();
    let mut it: Vec<usize> = (0..xt.nrows()).collect();
    is.shuffle(&mut rng);
    it.shuffle(&mut rng);
    mmd_linear(&xs.select_rows(&is), &xt.select_rows(&it), spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_small_cases() {
        let m = mmd_matrix_marginal(1, 1);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let m = mmd_matrix_marginal(2, 2);
        for i in 0..4 {
            for j in 0..4 {
                let same = (i < 2) == (j < 2);
                assert_eq!(m[(i, j)], if same { 0.25 } else { -0.25 });
            }
        }
        for (n, mm) in [(3, 7), (10, 1), (5, 5)] {
            assert!(mmd_matrix_marginal(n, mm).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_cases() {
        // source labels [0, 1], target pseudo labels [1, 0, 0]
        let mc = mmd_matrix_conditional(&[0, 1], &[1, 2, 2], 1);
        let mut expect = DMatrix::zeros(5, 5);
        expect[(1, 1)] = 1.0;
        expect[(2, 2)] = 1.0;
        expect[(1, 2)] = -1.0;
        expect[(2, 1)] = -1.0;
        assert_eq!(mc, expect);
        assert_eq!(mmd_matrix_conditional(&[0, 1], &[1, 1], 0), DMatrix::zeros(4, 4));
        let mc = mmd_matrix_conditional(&[0, 1, 0], &[0, 1, 1], 0);
        for r in [1, 4, 5] {
            assert!(mc.row(r).iter().all(|&v| v == 0.0));
        }
        assert!(mc.sum().abs() < 1e-12);
    }

    #[test]
    fn combine_endpoints() {
        let ys = [0, 1, 1];
        let yt = [1, 0];
        let m0 = mmd_matrix_marginal(3, 2);
        let mcs: Vec<_> = (0..2).map(|c| mmd_matrix_conditional(&ys, &yt, c)).collect();
        let sum_c = &mcs[0] + &mcs[1];
        assert_eq!(combine(&m0, &mcs, 0.0, 3).unwrap().matrix, m0);
        assert_eq!(combine(&m0, &mcs, 1.0, 3).unwrap().matrix, sum_c);
        let half = combine(&m0, &mcs, 0.5, 3).unwrap().matrix;
        assert!((half - (&m0 * 0.5 + &sum_c * 0.5)).abs().max() < 1e-15);
        assert!(combine(&m0, &mcs, 1.5, 3).is_err());
    }

    #[test]
    fn low_rank_terms_match_dense() {
        let ys = [0, 1, 2, 1, 0];
        let yt = [2, 2, 1, 1];
        let mu = 0.3;
        let m0 = mmd_matrix_marginal(5, 4);
        let mcs: Vec<_> = (0..3).map(|c| mmd_matrix_conditional(&ys, &yt, c)).collect();
        let dense = combine(&m0, &mcs, mu, 5).unwrap().matrix;
        let terms = MmdTerms::build(&ys, &yt, 3, mu).unwrap();
        assert!((terms.to_dense() - &dense).abs().max() < 1e-15);
        let x = DMatrix::from_fn(9, 2, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        assert!((terms.mul(&x) - &dense * &x).abs().max() < 1e-12);
        let q = (x.transpose() * &dense * &x).trace();
        assert!((terms.quad_form(&x) - q).abs() < 1e-12);
    }

    #[test]
    fn biased_zero_for_identical_sets() {
        let x = DMatrix::from_fn(5, 3, |i, j| (i as f64).sin() + j as f64);
        let v = mmd_biased(&x, &x, &KernelSpec::rbf(2.0).unwrap()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn linear_identical_pairs_cancel() {
        let x = DMatrix::from_fn(7, 2, |i, j| (i * j) as f64 * 0.3);
        assert_eq!(mmd_linear(&x, &x, &KernelSpec::rbf(1.0).unwrap()).unwrap(), 0.0);
        assert!(mmd_linear(&x.rows(0, 1).into_owned(), &x, &KernelSpec::Linear).is_err());
    }
}
