//! Grassmann-manifold features through the geodesic flow kernel.
//!
//! Each domain is summarized by its `d`-dimensional PCA subspace. Walking
//! along the geodesic `Phi(t)` between the two subspaces and integrating
//! the projections gives a `D x D` PSD matrix `G` with
//!
//! ```text
//! x_i' G x_j = integral_0^1 (Phi(t)' x_i)' (Phi(t)' x_j) dt
//! ```
//!
//! and samples are mapped to manifold features `z = sqrt(G) x`.
//!
//! With principal angles `theta_i` between the subspaces, `G` has the
//! closed form `B Omega B'` where `B = [Ps U1, Rs U2]` has orthonormal
//! columns and `Omega` couples coordinate `i` of both halves through the
//! `2 x 2` block
//!
//! ```text
//! [ l1  l2 ]    l1 = (1 + sin(2t)/(2t)) / 2
//! [ l2  l3 ]    l2 = (cos(2t) - 1)/(2t) / 2
//!               l3 = (1 - sin(2t)/(2t)) / 2
//! ```
//!
//! The square root is taken block-wise on `Omega`, which is an
//! eigendecomposition of `G` restricted to the span of `B`.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};

/// Angles below this use the `theta -> 0` limits of the block entries.
pub const SMALL_ANGLE: f64 = 1e-8;

/// A `D x d` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis after checking `B'B = I` within `1e-8`.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.ncols();
        if d == 0 || d > basis.nrows() {
            return Err(Error::data(format!(
                "subspace basis must be D x d with 1 <= d <= D, got {}x{}",
                basis.nrows(),
                d
            )));
        }
        let residual = (basis.transpose() * &basis - DMatrix::identity(d, d)).norm();
        if residual > 1e-8 {
            return Err(Error::data(format!(
                "subspace basis is not orthonormal (residual {residual:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `B B'`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Orthonormal `D x (D - d)` basis of the orthogonal complement, from a
    /// column-pivoted QR of the projector residual `I - B B'`.
    pub fn complement(&self) -> DMatrix<f64> {
        let big_d = self.ambient_dim();
        let rest = big_d - self.dim();
        let residual = DMatrix::identity(big_d, big_d) - self.projector();
        let q = residual.col_piv_qr().q();
        q.columns(0, rest).into_owned()
    }
}

fn fix_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Top-`d` principal directions of the column-centered rows of `x`.
///
/// Columns are ordered by descending variance and signed so that each
/// column's largest-magnitude entry is positive.
pub fn pca_basis(x: &DMatrix<f64>, d: usize) -> Result<Subspace> {
    let (n, big_d) = x.shape();
    let max_d = big_d.min(n.saturating_sub(1));
    if d < 1 || d > max_d {
        return Err(Error::config(
            "d",
            format!("subspace dimension {d} must lie in 1..={max_d} for {n} samples of dimension {big_d}"),
        ));
    }
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }

    let mut basis = None;
    if big_d > n {
        // Fewer samples than features: eigenvectors of the N x N Gram
        // matrix map to principal directions through X'.
        let (values, vectors) = sorted_eigen(&centered * centered.transpose());
        let scale = values[0].abs().max(f64::MIN_POSITIVE);
        if values[d - 1] > 1e-12 * scale {
            let mut b = DMatrix::zeros(big_d, d);
            for k in 0..d {
                let v = centered.transpose() * vectors.column(k);
                b.set_column(k, &(&v / v.norm()));
            }
            basis = Some(b);
        }
    }
    let mut basis = match basis {
        Some(b) => b,
        None => {
            let (_, vectors) = sorted_eigen(centered.transpose() * &centered);
            vectors.columns(0, d).into_owned()
        }
    };
    fix_signs(&mut basis);
    Subspace::new(basis)
}

/// Block entries `(l1, l2, l3)` for principal angle `theta`.
pub fn angle_weights(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        return (1.0, 0.0, 0.0);
    }
    let two = 2.0 * theta;
    let sinc = two.sin() / two;
    let s = theta.sin();
    (0.5 * (1.0 + sinc), -s * s / two, 0.5 * (1.0 - sinc))
}

fn sqrt_psd2(m: Matrix2<f64>) -> Matrix2<f64> {
    let eig = m.symmetric_eigen();
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix2::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// The geodesic flow kernel between two subspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicKernel {
    g: DMatrix<f64>,
    sqrt_g: DMatrix<f64>,
    dim: usize,
    angles: Vec<f64>,
    /// `[Ps U1, Rs U2]`, `D x 2d`.
    flow_basis: DMatrix<f64>,
    /// `Omega^(1/2)`, `2d x 2d`.
    omega_sqrt: DMatrix<f64>,
}

impl GeodesicKernel {
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn sqrt_g(&self) -> &DMatrix<f64> {
        &self.sqrt_g
    }

    /// Subspace dimension `d`.
    pub fn subspace_dim(&self) -> usize {
        self.dim
    }

    /// Ambient feature dimension `D`.
    pub fn ambient_dim(&self) -> usize {
        self.g.nrows()
    }

    /// Principal angles in `[0, pi/2]`, paired with the columns of `U1`.
    pub fn principal_angles(&self) -> &[f64] {
        &self.angles
    }

    /// A `2d x D` factor `F` with `F'F = G`.
    ///
    /// `F x` has the same inner products as `sqrt(G) x` while living in
    /// `2d` dimensions, which is what the classifier works with when `D` is
    /// large.
    pub fn compact_factor(&self) -> DMatrix<f64> {
        &self.omega_sqrt * self.flow_basis.transpose()
    }
}

/// Closed-form geodesic flow kernel from `ps` to `pt`.
///
/// Requires equal dimensions and `2d <= D`. Only the product `Rs U2`
/// enters `G`; it is computed as `-(I - Ps Ps') Pt V Sigma^-1`, which does
/// not depend on the particular complement basis.
pub fn gfk(ps: &Subspace, pt: &Subspace) -> Result<GeodesicKernel> {
    let (big_d, d) = ps.basis.shape();
    if pt.basis.shape() != (big_d, d) {
        return Err(Error::DimensionMismatch {
            context: "target subspace shape",
            expected: big_d * d,
            actual: pt.basis.nrows() * pt.basis.ncols(),
        });
    }
    if 2 * d > big_d {
        return Err(Error::config(
            "d",
            format!("geodesic flow needs 2d <= D, got d = {d}, D = {big_d}"),
        ));
    }

    let svd = (ps.basis.transpose() * &pt.basis).svd(true, true);
    let u1 = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V'").transpose();
    let ps_u1 = &ps.basis * &u1;

    // (I - Ps Ps') Pt V
    let pt_v = &pt.basis * &v;
    let residual = &pt_v - &ps.basis * (ps.basis.transpose() * &pt_v);

    let mut rs_u2 = DMatrix::zeros(big_d, d);
    let mut angles = Vec::with_capacity(d);
    for i in 0..d {
        let gamma = svd.singular_values[i].clamp(0.0, 1.0);
        let col = residual.column(i);
        let sigma = col.norm();
        let theta = sigma.atan2(gamma).clamp(0.0, std::f64::consts::FRAC_PI_2);
        if theta >= SMALL_ANGLE && sigma > 0.0 {
            rs_u2.set_column(i, &(-col / sigma));
        }
        angles.push(theta);
    }

    let mut flow_basis = DMatrix::zeros(big_d, 2 * d);
    flow_basis.columns_mut(0, d).copy_from(&ps_u1);
    flow_basis.columns_mut(d, d).copy_from(&rs_u2);

    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    let mut omega_sqrt = DMatrix::zeros(2 * d, 2 * d);
    for (i, &theta) in angles.iter().enumerate() {
        let (l1, l2, l3) = angle_weights(theta);
        omega[(i, i)] = l1;
        omega[(i, d + i)] = l2;
        omega[(d + i, i)] = l2;
        omega[(d + i, d + i)] = l3;
        let root = sqrt_psd2(Matrix2::new(l1, l2, l2, l3));
        omega_sqrt[(i, i)] = root[(0, 0)];
        omega_sqrt[(i, d + i)] = root[(0, 1)];
        omega_sqrt[(d + i, i)] = root[(1, 0)];
        omega_sqrt[(d + i, d + i)] = root[(1, 1)];
    }

    let symmetrize = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let g = symmetrize(&flow_basis * &omega * flow_basis.transpose());
    let sqrt_g = symmetrize(&flow_basis * &omega_sqrt * flow_basis.transpose());
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("geodesic flow kernel is not finite"));
    }

    Ok(GeodesicKernel {
        g,
        sqrt_g,
        dim: d,
        angles,
        flow_basis,
        omega_sqrt,
    })
}

/// Manifold features `z_i = sqrt(G) x_i` for every row of `x`.
pub fn transform(gk: &GeodesicKernel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != gk.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "manifold transform input",
            expected: gk.ambient_dim(),
            actual: x.ncols(),
        });
    }
    // sqrt(G) is symmetric, so rows map as X sqrt(G).
    Ok(x * &gk.sqrt_g)
}

/// Projects rows with an arbitrary `k x D` linear map: `z_i = P x_i`.
pub fn project(map: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != map.ncols() {
        return Err(Error::DimensionMismatch {
            context: "projection input",
            expected: map.ncols(),
            actual: x.ncols(),
        });
    }
    Ok(x * map.transpose())
}

/// A uniformly random `d`-dimensional subspace of `R^D`.
pub fn random_subspace<R: rand::Rng>(rng: &mut R, big_d: usize, d: usize) -> Subspace {
    use rand_distr::{Distribution, StandardNormal};
    let raw = DMatrix::from_fn(big_d, d, |_, _| StandardNormal.sample(rng));
    let q = raw.qr().q();
    Subspace::new(q.columns(0, d).into_owned()).expect("QR columns are orthonormal")
}
