// Full adaptation loop: fit on a labelled source and unlabelled target,
// save the model bundle, reload it and classify the target.

use mdda::data::{make_shift_dataset, ShiftKind, ShiftSpec};
use mdda::mdda::MddaConfig;
use mdda::model_io::{load_model, save_model};
use mdda::srm::accuracy;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ShiftSpec::new(ShiftKind::Marginal, 2, 100, 3.0, 2);
    spec.dim = 4;
    let pair = make_shift_dataset(&spec)?;
    let truth = pair.target_labels().expect("labelled").to_vec();

    let cfg = MddaConfig::new(2);
    let (model, report) = mdda::fit(&pair, &cfg)?;
    for r in report.iterations() {
        println!("iter {:2}: mu {:.3}  churn {:.3}  objective {:.4}", r.iter, r.mu, r.pseudo_label_churn, r.objective);
    }

    let dir = std::env::temp_dir().join("mdda-adapt-and-predict");
    save_model(&model, &dir)?;
    let loaded = load_model(&dir)?;
    let prediction = loaded.predict_raw(pair.target().values())?;
    println!("target accuracy {:.3}", accuracy(&prediction.labels, &truth)?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
