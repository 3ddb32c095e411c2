macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            #![allow(dead_code)]
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(synthetic_shift, "synthetic_shift.rs");
example!(geodesic_flow, "geodesic_flow.rs");
example!(mmd_estimates, "mmd_estimates.rs");
example!(adaptive_factor, "adaptive_factor.rs");
example!(kernel_classifier, "kernel_classifier.rs");
example!(adapt_and_predict, "adapt_and_predict.rs");
example!(mu_grid, "mu_grid.rs");

#[test]
fn synthetic_shift_runs() {
    synthetic_shift::run_example().expect("synthetic_shift");
}

#[test]
fn geodesic_flow_runs() {
    geodesic_flow::run_example().expect("geodesic_flow");
}

#[test]
fn mmd_estimates_runs() {
    mmd_estimates::run_example().expect("mmd_estimates");
}

#[test]
fn adaptive_factor_runs() {
    adaptive_factor::run_example().expect("adaptive_factor");
}

#[test]
fn kernel_classifier_runs() {
    kernel_classifier::run_example().expect("kernel_classifier");
}

#[test]
fn adapt_and_predict_runs() {
    adapt_and_predict::run_example().expect("adapt_and_predict");
}

#[test]
fn mu_grid_runs() {
    mu_grid::run_example().expect("mu_grid");
}
