// Builds per-domain PCA subspaces, the geodesic flow kernel between them,
// and maps samples into manifold features.

use mdda::data::{make_shift_dataset, ShiftKind, ShiftSpec};
use mdda::manifold::{gfk, pca_basis, transform};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ShiftSpec::new(ShiftKind::Mixed, 4, 30, 2.0, 3);
    spec.dim = 12;
    let pair = make_shift_dataset(&spec)?;
    let source = pair.source().l2_normalized();
    let target = pair.target().l2_normalized();

    let d = 4;
    let ps = pca_basis(source.values(), d)?;
    let pt = pca_basis(target.values(), d)?;
    let gk = gfk(&ps, &pt)?;
    let angles: Vec<String> = gk.principal_angles().iter().map(|a| format!("{a:.3}")).collect();
    println!("principal angles: [{}]", angles.join(", "));

    let g = gk.g();
    let eig = g.clone().symmetric_eigen();
    println!("G: {}x{}, trace {:.4}, min eigenvalue {:.2e}", g.nrows(), g.ncols(), g.trace(), eig.eigenvalues.min());

    let zs = transform(&gk, source.values())?;
    let zt = transform(&gk, target.values())?;
    println!("manifold features: source {}x{}, target {}x{}", zs.nrows(), zs.ncols(), zt.nrows(), zt.ncols());

    // The compact factor gives the same geometry in 2d columns.
    let f = gk.compact_factor();
    let err = (f.transpose() * &f - g).abs().max();
    println!("compact factor: {}x{}, |F'F - G| = {err:.1e}", f.nrows(), f.ncols());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
