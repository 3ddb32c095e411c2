// Estimates the adaptive factor on a marginal and a conditional shift,
// using the true target labels to isolate the estimator.

use mdda::data::{make_shift_dataset, ShiftKind, ShiftSpec};
use mdda::divergence::estimate_mu;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for kind in [ShiftKind::Marginal, ShiftKind::Conditional] {
        let mut spec = ShiftSpec::new(kind, 2, 100, 3.0, 1);
        spec.dim = 4;
        let pair = make_shift_dataset(&spec)?;
        let truth = pair.target_labels().expect("labelled").to_vec();
        let est = estimate_mu(
            pair.source().values(),
            pair.source_labels(),
            pair.target().values(),
            &truth,
            pair.class_count(),
            7,
        )?;
        let dc: Vec<String> = est.d_conditional.iter().map(|d| format!("{d:.3}")).collect();
        println!("{kind:?}: d_M = {:.3}, d_c = [{}], mu = {:.3}", est.d_marginal, dc.join(", "), est.mu);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
