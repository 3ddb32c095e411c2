mod common;

use common::{gaussian, mean_rbf, random_labels, rng};
use mdda::divergence::{estimate_mu, mmd_biased, mmd_linear, mmd_matrix_marginal, MmdTerms};
use mdda::kernel::{gram_symmetric, KernelSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn trace_form_equals_block_means() {
    let mut r = rng(1);
    for (n, m) in [(5, 9), (12, 12), (30, 7)] {
        let xs = gaussian(&mut r, n, 3);
        let xt = gaussian(&mut r, m, 3).add_scalar(0.7);
        let bw = 1.5;
        let mut x = DMatrix::zeros(n + m, 3);
        x.rows_mut(0, n).copy_from(&xs);
        x.rows_mut(n, m).copy_from(&xt);
        let k = gram_symmetric(&x, &KernelSpec::rbf(bw).unwrap());
        let trace = (&k * mmd_matrix_marginal(n, m)).trace();
        let blocks = mean_rbf(&xs, &xs, bw) + mean_rbf(&xt, &xt, bw) - 2.0 * mean_rbf(&xs, &xt, bw);
        assert!((trace - blocks).abs() < 1e-10);
        let lib = mmd_biased(&xs, &xt, &KernelSpec::rbf(bw).unwrap()).unwrap();
        assert!((lib - blocks).abs() < 1e-10);
    }
}

#[test]
fn linear_estimate_tracks_biased_estimate() {
    let spec = KernelSpec::rbf(2.0).unwrap();
    let mut r = rng(4);
    let xs = gaussian(&mut r, 600, 2);
    let xt = gaussian(&mut r, 600, 2).add_scalar(1.5);
    let lin = mmd_linear(&xs, &xt, &spec).unwrap();
    let full = mmd_biased(&xs, &xt, &spec).unwrap();
    assert!((lin - full).abs() < 0.3 * full, "{lin} vs {full}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structured_matrix_invariants(seed in 0u64..1000, n in 2usize..15, m in 2usize..15, mu in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let ys = random_labels(&mut r, n, 3);
        let yt = random_labels(&mut r, m, 3);
        let terms = MmdTerms::build(&ys, &yt, 3, mu).unwrap();
        let dense = terms.to_dense();
        prop_assert!((&dense - dense.transpose()).abs().max() < 1e-15);
        // Each term's vector sums to zero, so every row of M does too.
        for row in dense.row_iter() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
        let f = gaussian(&mut r, n + m, 2);
        prop_assert!((terms.mul(&f) - &dense * &f).abs().max() < 1e-12);
        let quad = (f.transpose() * &dense * &f).trace();
        prop_assert!((terms.quad_form(&f) - quad).abs() < 1e-12);
        prop_assert!(quad >= -1e-12);
        prop_assert!((terms.frobenius_norm() - dense.norm()).abs() < 1e-12);
    }

    #[test]
    fn estimated_mu_is_a_weight(seed in 0u64..1000, offset in 0.0f64..3.0) {
        let mut r = rng(seed);
        let zs = gaussian(&mut r, 30, 3);
        let zt = gaussian(&mut r, 24, 3).add_scalar(offset);
        let ys = random_labels(&mut r, 30, 2);
        let yt = random_labels(&mut r, 24, 2);
        let e = estimate_mu(&zs, &ys, &zt, &yt, 2, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.mu));
        prop_assert!(e.d_conditional.len() == 2);
        let again = estimate_mu(&zs, &ys, &zt, &yt, 2, seed).unwrap();
        prop_assert_eq!(e, again);
    }
}
