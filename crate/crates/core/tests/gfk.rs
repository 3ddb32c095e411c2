mod common;

use common::{gfk_by_quadrature, random_basis, rng};
use mdda::manifold::{gfk, transform, Subspace};
use nalgebra::DMatrix;

#[test]
fn closed_form_matches_geodesic_quadrature() {
    let mut r = rng(11);
    for &(big_d, d) in &[(10, 3), (8, 4), (12, 2), (6, 1)] {
        for _ in 0..3 {
            let ps = random_basis(&mut r, big_d, d);
            let pt = random_basis(&mut r, big_d, d);
            let reference = gfk_by_quadrature(&ps, &pt, 4000);
            let g = gfk(&Subspace::new(ps).unwrap(), &Subspace::new(pt).unwrap()).unwrap();
            let err = (g.g() - &reference).abs().max();
            assert!(err < 1e-5, "D={big_d} d={d}: max error {err:e}");
        }
    }
}

#[test]
fn square_root_and_transform_agree() {
    let mut r = rng(5);
    let ps = Subspace::new(random_basis(&mut r, 9, 3)).unwrap();
    let pt = Subspace::new(random_basis(&mut r, 9, 3)).unwrap();
    let gk = gfk(&ps, &pt).unwrap();
    let sq = gk.sqrt_g();
    assert!((sq * sq - gk.g()).abs().max() < 1e-10);
    assert!((sq - sq.transpose()).abs().max() == 0.0);

    // Inner products of transformed rows are x' G y.
    let x = common::gaussian(&mut r, 5, 9);
    let z = transform(&gk, &x).unwrap();
    let direct = &x * gk.g() * x.transpose();
    assert!((&z * z.transpose() - direct).abs().max() < 1e-10);

    let f = gk.compact_factor();
    assert_eq!(f.shape(), (6, 9));
    assert!((f.transpose() * &f - gk.g()).abs().max() < 1e-10);
}

#[test]
fn identical_subspaces_give_the_projector() {
    let mut r = rng(8);
    let basis = random_basis(&mut r, 7, 3);
    let s = Subspace::new(basis.clone()).unwrap();
    let gk = gfk(&s, &s).unwrap();
    let projector: DMatrix<f64> = &basis * basis.transpose();
    assert!((gk.g() - projector).abs().max() < 1e-10);
    assert!(gk.principal_angles().iter().all(|&a| a.abs() < 1e-7));
}
