// Compares the estimated adaptive factor with a fixed grid over [0, 1] on
// one marginal and one conditional task.

use mdda::data::{make_shift_dataset, ShiftKind, ShiftSpec};
use mdda::divergence::MuStrategy;
use mdda::mdda::MddaConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for kind in [ShiftKind::Marginal, ShiftKind::Conditional] {
        let mut spec = ShiftSpec::new(kind, 2, 60, 3.0, 4);
        spec.dim = 4;
        let pair = make_shift_dataset(&spec)?;

        let mut cfg = MddaConfig::new(2);
        cfg.iterations = 5;
        let estimated = mdda::evaluate(&pair, &cfg)?;

        cfg.mu = MuStrategy::GridAverage;
        let grid = mdda::evaluate(&pair, &cfg)?;
        println!("{kind:?}");
        for run in &grid.runs {
            let rec = run.final_record();
            println!("  mu {:.1}: accuracy {:.3}", rec.mu, rec.accuracy.unwrap_or(f64::NAN));
        }
        println!(
            "  estimated mu {:.3}: accuracy {:.3}",
            estimated.mu_final(),
            estimated.final_accuracy().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
