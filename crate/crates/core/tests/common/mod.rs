//! Reference computations shared by the integration tests. These are
//! written independently of the library code paths they check.

#![allow(dead_code)]

use mdda::data::{make_shift_dataset, DomainPair, ShiftKind, ShiftSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthonormal basis of a random `d`-dimensional subspace of `R^D`, by
/// Gram-Schmidt on Gaussian columns.
pub fn random_basis(rng: &mut ChaCha8Rng, big_d: usize, d: usize) -> DMatrix<f64> {
    let mut q = gaussian(rng, big_d, d);
    for j in 0..d {
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).clone_owned();
            q.column_mut(j).axpy(-proj, &qk, 1.0);
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

/// `int_0^1 Phi(t) Phi(t)' dt` along the Grassmann geodesic from
/// `span(ps)` to `span(pt)`, by the trapezoidal rule.
///
/// The geodesic comes from the log map: `H = (I - Ps Ps') Pt (Ps' Pt)^-1`
/// with thin SVD `H = U S V'` gives `Phi(t) = Ps V cos(t atan S) + U sin(t atan S)`.
pub fn gfk_by_quadrature(ps: &DMatrix<f64>, pt: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let big_d = ps.nrows();
    let d = ps.ncols();
    let proj = DMatrix::identity(big_d, big_d) - ps * ps.transpose();
    let inv = (ps.transpose() * pt).try_inverse().expect("subspaces are not orthogonal");
    let h = proj * pt * inv;
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v = svd.v_t.unwrap().transpose();
    let theta: Vec<f64> = svd.singular_values.iter().map(|s| s.atan()).collect();
    let psv = ps * v;

    let phi = |t: f64| {
        let mut out = DMatrix::zeros(big_d, d);
        for i in 0..d {
            let col = psv.column(i) * (t * theta[i]).cos() + u.column(i) * (t * theta[i]).sin();
            out.set_column(i, &col);
        }
        out
    };
    let dt = 1.0 / steps as f64;
    let mut g = DMatrix::zeros(big_d, big_d);
    for k in 0..=steps {
        let f = phi(k as f64 * dt);
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        g += (&f * f.transpose()) * (w * dt);
    }
    g
}

/// Mean of `k(a_i, b_j)` over all pairs, for an RBF kernel with the given
/// bandwidth.
pub fn mean_rbf(a: &DMatrix<f64>, b: &DMatrix<f64>, bandwidth: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            let d2 = (a.row(i) - b.row(j)).norm_squared();
            total += (-d2 / (2.0 * bandwidth)).exp();
        }
    }
    total / (a.nrows() * b.nrows()) as f64
}

pub fn random_labels(rng: &mut ChaCha8Rng, len: usize, classes: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..classes)).collect()
}

/// The synthetic task behind the end-to-end checks: 2 classes, 100 samples
/// per class per domain, shift magnitude 3, in 4 dimensions.
pub const TASK_DIM: usize = 4;
pub const TASK_SUBSPACE: usize = 2;

pub fn shift_task(kind: ShiftKind, seed: u64) -> DomainPair {
    let mut spec = ShiftSpec::new(kind, 2, 100, 3.0, seed);
    spec.dim = TASK_DIM;
    make_shift_dataset(&spec).expect("valid spec")
}
