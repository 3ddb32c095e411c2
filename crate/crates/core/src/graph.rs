//! p-nearest-neighbour affinity graph and its Laplacian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Symmetric affinity `W`, Laplacian `L = D - W` and the neighbour lists
/// behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph {
    w: DMatrix<f64>,
    laplacian: DMatrix<f64>,
    degree: DVector<f64>,
    /// `(j, W_ij)` for every nonzero-pattern entry of row `i`, sorted by `j`.
    edges: Vec<Vec<(usize, f64)>>,
    p: usize,
}

impl AffinityGraph {
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn neighbors(&self) -> usize {
        self.p
    }

    pub fn edges(&self, i: usize) -> &[(usize, f64)] {
        &self.edges[i]
    }

    /// `L x` using the sparse edge lists.
    pub fn laplacian_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, edges) in self.edges.iter().enumerate() {
            for c in 0..x.ncols() {
                let mut acc = self.degree[i] * x[(i, c)];
                for &(j, w) in edges {
                    acc -= w * x[(j, c)];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// `tr(F' L F)`.
    pub fn quad_form(&self, f: &DMatrix<f64>) -> f64 {
        let lf = self.laplacian_mul(f);
        f.dot(&lf)
    }
}

/// Cosine similarity mapped to `[0, 1]` as `(1 + cos) / 2`. A zero row has
/// cosine 0 against everything.
fn similarity_matrix(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let mut unit = z.clone();
    let mut zero_rows = Vec::new();
    for (i, mut row) in unit.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        } else {
            zero_rows.push(i);
        }
    }
    if !zero_rows.is_empty() {
        log::warn!(
            "{} zero-norm rows in affinity input (first: {}); their cosine similarity is taken as 0",
            zero_rows.len(),
            zero_rows[0]
        );
    }
    let rows: Vec<Vec<f64>> = unit.row_iter().map(|r| r.iter().copied().collect()).collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let cos: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                    0.5 * (1.0 + cos.clamp(-1.0, 1.0))
                })
                .collect()
        })
        .collect();
    let mut s = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            s[(i, i + 1 + off)] = v;
            s[(i + 1 + off, i)] = v;
        }
    }
    s
}

/// Builds the graph over the rows of `z`.
///
/// Neighbours are ranked by descending similarity with ties going to the
/// lower index; `W_ij` is kept when either point is among the other's `p`
/// nearest neighbours.
pub fn affinity(z: &DMatrix<f64>, p: usize) -> Result<AffinityGraph> {
    let n = z.nrows();
    if p == 0 || p >= n {
        return Err(Error::config("p", format!("neighbour count must lie in 1..{n}, got {p}")));
    }
    let s = similarity_matrix(z);

    let neighbor_sets: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            cand.sort_by(|&a, &b| s[(i, b)].total_cmp(&s[(i, a)]).then(a.cmp(&b)));
            cand.truncate(p);
            cand
        })
        .collect();

    let mut linked = vec![vec![false; n]; n];
    for (i, set) in neighbor_sets.iter().enumerate() {
        for &j in set {
            linked[i][j] = true;
            linked[j][i] = true;
        }
    }
    let mut w = DMatrix::zeros(n, n);
    let mut edges = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if linked[i][j] {
                w[(i, j)] = s[(i, j)];
                edges[i].push((j, s[(i, j)]));
            }
        }
    }
    let degree = DVector::from_iterator(n, w.row_iter().map(|r| r.sum()));
    let laplacian = DMatrix::from_diagonal(&degree) - &w;
    Ok(AffinityGraph {
        w,
        laplacian,
        degree,
        edges,
        p,
    })
}
