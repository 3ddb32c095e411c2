// Quadratic and linear-time MMD estimates, and the trace form behind the
// alignment matrix.

use mdda::divergence::{mmd_biased, mmd_linear, mmd_matrix_marginal};
use mdda::kernel::{gram_symmetric, KernelSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sample(rng: &mut ChaCha8Rng, rows: usize, mean: f64) -> DMatrix<f64> {
    let normal = Normal::new(mean, 1.0).expect("valid normal");
    DMatrix::from_fn(rows, 3, |_, _| normal.sample(rng))
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kernel = KernelSpec::rbf(3.0)?;
    let a = sample(&mut rng, 400, 0.0);
    let b = sample(&mut rng, 400, 0.0);
    let c = sample(&mut rng, 400, 1.0);

    println!("same distribution:    biased {:.4}  linear {:+.4}", mmd_biased(&a, &b, &kernel)?, mmd_linear(&a, &b, &kernel)?);
    println!("shifted distribution: biased {:.4}  linear {:+.4}", mmd_biased(&a, &c, &kernel)?, mmd_linear(&a, &c, &kernel)?);

    let (n, m) = (50, 30);
    let mut x = DMatrix::zeros(n + m, 3);
    x.rows_mut(0, n).copy_from(&a.rows(0, n));
    x.rows_mut(n, m).copy_from(&c.rows(0, m));
    let k = gram_symmetric(&x, &kernel);
    let trace = (&k * mmd_matrix_marginal(n, m)).trace();
    let direct = mmd_biased(&a.rows(0, n).into_owned(), &c.rows(0, m).into_owned(), &kernel)?;
    println!("tr(K M0) = {trace:.6}, block means = {direct:.6}");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
