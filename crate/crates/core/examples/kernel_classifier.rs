// Solves for the classifier coefficients directly, with and without the
// alignment and graph terms, and compares the objective values.

use mdda::data::{make_shift_dataset, ShiftKind, ShiftSpec};
use mdda::divergence::MmdTerms;
use mdda::graph::affinity;
use mdda::kernel::{default_bandwidth, gram_symmetric, KernelSpec};
use mdda::srm::{accuracy, argmax_rows, objective, solve_beta, LabelMatrix};
use nalgebra::DMatrix;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ShiftSpec::new(ShiftKind::Marginal, 2, 40, 3.0, 5);
    spec.dim = 4;
    let pair = make_shift_dataset(&spec)?;
    let (n, m) = (pair.n(), pair.m());
    let x = pair.source().stack_values(pair.target())?;
    let kernel = KernelSpec::rbf(default_bandwidth(&x)?)?;
    let k = gram_symmetric(&x, &kernel);
    let labels = LabelMatrix::new(pair.source_labels(), m, 2)?;
    let truth = pair.target_labels().expect("labelled");

    // Class terms use the true target labels here; the adaptation loop
    // uses pseudo-labels instead.
    let mmd = MmdTerms::build(pair.source_labels(), truth, 2, 0.5)?;
    let mmd = mmd.clone().scaled(1.0 / mmd.frobenius_norm()).to_dense();
    let l = affinity(&x, 10)?.laplacian().clone();
    let zero = DMatrix::zeros(n + m, n + m);

    for (name, lambda, rho) in [("source only", 0.0, 0.0), ("aligned", 4.5, 0.0), ("aligned + graph", 4.5, 1.0)] {
        let (mm, ll) = if lambda > 0.0 { (&mmd, &l) } else { (&zero, &zero) };
        let beta = solve_beta(&k, mm, ll, &labels, lambda, rho, 0.1)?;
        let scores = k.rows(n, m) * &beta;
        let acc = accuracy(&argmax_rows(&scores), truth)?;
        let obj = objective(&k, mm, ll, &labels, &beta, lambda, rho, 0.1);
        println!("{name:>16}: target accuracy {acc:.3}, objective {obj:.3}");
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
