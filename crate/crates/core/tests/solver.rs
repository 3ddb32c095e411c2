mod common;

use common::{gaussian, random_labels, rng, shift_task, TASK_SUBSPACE};
use mdda::data::ShiftKind;
use mdda::divergence::{combine, mmd_matrix_conditional, mmd_matrix_marginal, MmdTerms, MuEstimate, MuEstimator, MuStrategy};
use mdda::graph::affinity;
use mdda::kernel::{gram_symmetric, KernelSpec};
use mdda::mdda::{fit, fit_with_estimator, nearest_neighbor_labels, prepare, MddaConfig};
use mdda::srm::{argmax_rows, objective, solve_beta, solve_with_regularizer, LabelMatrix};
use mdda::Result;
use nalgebra::DMatrix;
use proptest::prelude::*;

struct Instance {
    k: DMatrix<f64>,
    m: DMatrix<f64>,
    l: DMatrix<f64>,
    labels: LabelMatrix,
}

fn instance(seed: u64, n: usize, m: usize, classes: usize, mu: f64) -> Instance {
    let mut r = rng(seed);
    let x = gaussian(&mut r, n + m, 4);
    let ys = random_labels(&mut r, n, classes);
    let yt = random_labels(&mut r, m, classes);
    let k = gram_symmetric(&x, &KernelSpec::rbf(4.0).unwrap());
    let mmd = MmdTerms::build(&ys, &yt, classes, mu).unwrap().to_dense();
    let l = affinity(&x, 5).unwrap().laplacian().clone();
    let labels = LabelMatrix::new(&ys, m, classes).unwrap();
    Instance { k, m: mmd, l, labels }
}

#[test]
fn larger_eta_never_grows_the_norm() {
    for seed in 0..4 {
        let inst = instance(seed, 30, 20, 3, 0.4);
        let mut last = f64::INFINITY;
        for eta in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0] {
            let beta = solve_beta(&inst.k, &inst.m, &inst.l, &inst.labels, 4.5, 1.0, eta).unwrap();
            let norm = (beta.transpose() * &inst.k * &beta).trace();
            assert!(norm <= last * (1.0 + 1e-9), "seed {seed} eta {eta}: {norm} > {last}");
            last = norm;
        }
    }
}

#[test]
fn mu_weighting_is_linear_through_the_solve() {
    let mut r = rng(3);
    let (n, m, c) = (25, 15, 3);
    let x = gaussian(&mut r, n + m, 3);
    let ys = random_labels(&mut r, n, c);
    let yt = random_labels(&mut r, m, c);
    let k = gram_symmetric(&x, &KernelSpec::rbf(2.0).unwrap());
    let l = affinity(&x, 4).unwrap().laplacian().clone();
    let labels = LabelMatrix::new(&ys, m, c).unwrap();

    let m0 = mmd_matrix_marginal(n, m);
    let mcs: Vec<_> = (0..c).map(|cls| mmd_matrix_conditional(&ys, &yt, cls)).collect();
    let combined = combine(&m0, &mcs, 0.5, n).unwrap().matrix;
    let averaged = (&m0 + mcs.iter().fold(DMatrix::zeros(n + m, n + m), |a, b| a + b)) * 0.5;
    let structured = MmdTerms::build(&ys, &yt, c, 0.5).unwrap().to_dense();
    assert!((&combined - &averaged).abs().max() < 1e-15);
    assert!((&structured - &averaged).abs().max() < 1e-15);

    let a = solve_beta(&k, &combined, &l, &labels, 4.5, 1.0, 0.1).unwrap();
    let b = solve_beta(&k, &averaged, &l, &labels, 4.5, 1.0, 0.1).unwrap();
    assert!((a - b).abs().max() < 1e-8);
}

#[test]
fn interpolates_source_labels() {
    let pair = shift_task(ShiftKind::Marginal, 4);
    let x = pair.source().values();
    let k = gram_symmetric(x, &KernelSpec::rbf(1.0).unwrap());
    let labels = LabelMatrix::new(pair.source_labels(), 0, 2).unwrap();
    let zero = DMatrix::zeros(x.nrows(), x.nrows());
    let beta = solve_beta(&k, &zero, &zero, &labels, 0.0, 0.0, 1e-6).unwrap();
    let pred = argmax_rows(&(&k * beta));
    let hits = pred.iter().zip(pair.source_labels()).filter(|(a, b)| a == b).count();
    assert!(hits as f64 >= 0.95 * x.nrows() as f64, "{hits}");
}

fn spd_system(seed: u64, size: usize) -> (DMatrix<f64>, DMatrix<f64>, LabelMatrix) {
    let mut r = rng(seed);
    let b = gaussian(&mut r, size, size);
    let k = &b * b.transpose() / size as f64 + DMatrix::identity(size, size) * 0.1;
    let p = gaussian(&mut r, size, size) * 0.01;
    let reg = (&p * p.transpose()) * &k;
    let n = size / 2;
    let labels = LabelMatrix::new(&random_labels(&mut r, n, 2), size - n, 2).unwrap();
    (k, reg, labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_within_bound(seed in 0u64..10_000, size in 4usize..40, eta in 0.01f64..2.0) {
        let (k, reg, labels) = spd_system(seed, size);
        let beta = solve_with_regularizer(&k, &labels, &reg, eta).unwrap();
        let mut op = reg.clone();
        for i in 0..size {
            for j in 0..size {
                op[(i, j)] += labels.indicator[i] * k[(i, j)];
            }
            op[(i, i)] += eta;
        }
        let rhs = labels.rhs();
        let residual = (&op * &beta - &rhs).norm() / rhs.norm();
        prop_assert!(residual < 1e-8);
    }
}

#[test]
fn objective_is_stationary_at_the_solution() {
    let inst = instance(21, 20, 12, 2, 0.7);
    let beta = solve_beta(&inst.k, &inst.m, &inst.l, &inst.labels, 4.5, 1.0, 0.1).unwrap();
    let j0 = objective(&inst.k, &inst.m, &inst.l, &inst.labels, &beta, 4.5, 1.0, 0.1);
    let mut r = rng(2);
    for _ in 0..20 {
        let mut dir = gaussian(&mut r, beta.nrows(), beta.ncols());
        dir /= dir.norm();
        let j = objective(&inst.k, &inst.m, &inst.l, &inst.labels, &(&beta + dir * 1e-3), 4.5, 1.0, 0.1);
        assert!(j >= j0 - 1e-12, "{j} < {j0}");
    }
}

fn small_config() -> MddaConfig {
    let mut cfg = MddaConfig::new(TASK_SUBSPACE);
    cfg.iterations = 3;
    cfg
}

#[test]
fn single_iteration_matches_manual_composition() {
    let pair = shift_task(ShiftKind::Conditional, 2);
    let mut cfg = small_config();
    cfg.iterations = 1;
    cfg.mu = MuStrategy::Fixed { value: 0.3 };
    let (model, _) = fit(&pair, &cfg).unwrap();

    let prepared = prepare(&pair, &cfg).unwrap();
    let zs = prepared.source_features();
    let zt = prepared.target_features();
    let pseudo = nearest_neighbor_labels(&zs, pair.source_labels(), &zt);
    let k = gram_symmetric(&prepared.features, &prepared.kernel);
    let graph = affinity(&prepared.features, cfg.p).unwrap();
    let mmd = MmdTerms::build(pair.source_labels(), &pseudo, 2, 0.3).unwrap();
    let mmd = mmd.clone().scaled(1.0 / mmd.frobenius_norm());
    let reg = mmd.mul(&k) * cfg.lambda + graph.laplacian_mul(&k) * cfg.rho;
    let labels = LabelMatrix::new(pair.source_labels(), pair.m(), 2).unwrap();
    let beta = solve_with_regularizer(&k, &labels, &reg, cfg.eta).unwrap();
    assert_eq!(model.beta, beta);
}

#[test]
fn equal_weight_special_case_matches_dense_solve() {
    let pair = shift_task(ShiftKind::Mixed, 6);
    let mut cfg = small_config();
    cfg.iterations = 1;
    cfg.manifold = false;
    cfg.rho = 0.0;
    cfg.normalize_mmd = false;
    cfg.mu = MuStrategy::Fixed { value: 0.5 };
    let (model, _) = fit(&pair, &cfg).unwrap();

    let prepared = prepare(&pair, &cfg).unwrap();
    let (n, m) = (pair.n(), pair.m());
    let m0 = mmd_matrix_marginal(n, m);
    let mcs: Vec<_> = (0..2)
        .map(|c| mmd_matrix_conditional(pair.source_labels(), &prepared.initial_pseudo, c))
        .collect();
    let joint = (&m0 + &mcs[0] + &mcs[1]) * 0.5;
    let zero = DMatrix::zeros(n + m, n + m);
    let labels = LabelMatrix::new(pair.source_labels(), m, 2).unwrap();
    let beta = solve_beta(&prepared.gram, &joint, &zero, &labels, cfg.lambda, 0.0, cfg.eta).unwrap();
    assert!((model.beta - beta).abs().max() < 1e-8);
}

#[test]
fn fits_are_deterministic() {
    let pair = shift_task(ShiftKind::Marginal, 9);
    let cfg = small_config();
    let (m1, r1) = fit(&pair, &cfg).unwrap();
    let (m2, r2) = fit(&pair, &cfg).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(r1, r2);
}

struct Constant(f64);

impl MuEstimator for Constant {
    fn estimate(
        &self,
        _: &DMatrix<f64>,
        _: &[usize],
        _: &DMatrix<f64>,
        _: &[usize],
        class_count: usize,
        _: u64,
    ) -> Result<MuEstimate> {
        Ok(MuEstimate {
            mu: self.0,
            d_marginal: 0.0,
            d_conditional: vec![0.0; class_count],
            rounds: 0,
            skipped_classes: Vec::new(),
        })
    }
}

#[test]
fn stubbed_estimate_equals_fixed_strategy() {
    let pair = shift_task(ShiftKind::Conditional, 5);
    let mut fixed = small_config();
    fixed.mu = MuStrategy::Fixed { value: 0.35 };
    let (a, _) = fit(&pair, &fixed).unwrap();
    let mut est = small_config();
    est.mu = MuStrategy::Estimate;
    let (b, report) = fit_with_estimator(&pair, &est, &Constant(0.35)).unwrap();
    assert_eq!(a, b);
    assert!(report.iterations().iter().all(|r| r.mu == 0.35));
}

#[test]
fn grid_strategy_runs_eleven_times() {
    let pair = shift_task(ShiftKind::Marginal, 1);
    let mut cfg = small_config();
    cfg.iterations = 2;
    cfg.mu = MuStrategy::GridAverage;
    let report = mdda::evaluate(&pair, &cfg).unwrap();
    assert_eq!(report.runs.len(), 11);
    for (i, run) in report.runs.iter().enumerate() {
        assert_eq!(run.fixed_mu, Some(i as f64 / 10.0));
        assert_eq!(run.iterations.len(), 2);
    }
    for w in report.runs.windows(2) {
        assert_ne!(w[0].iterations, w[1].iterations);
    }
}

#[test]
fn null_shift_stays_close_to_source_only() {
    let mut baseline_cfg = small_config();
    baseline_cfg.lambda = 0.0;
    baseline_cfg.rho = 0.0;
    baseline_cfg.manifold = false;
    baseline_cfg.iterations = 1;
    baseline_cfg.mu = MuStrategy::Fixed { value: 0.5 };
    let cfg = MddaConfig::new(TASK_SUBSPACE);
    let (mut adapted, mut plain) = (0.0, 0.0);
    for seed in 0..5 {
        let mut spec = mdda::data::ShiftSpec::new(ShiftKind::Marginal, 2, 100, 0.0, seed);
        spec.dim = common::TASK_DIM;
        let pair = mdda::data::make_shift_dataset(&spec).unwrap();
        adapted += mdda::evaluate(&pair, &cfg).unwrap().final_accuracy().unwrap();
        plain += mdda::evaluate(&pair, &baseline_cfg).unwrap().final_accuracy().unwrap();
    }
    assert!((adapted - plain).abs() / 5.0 <= 0.03, "{adapted} vs {plain}");
}
