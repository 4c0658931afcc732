use aetlab::boundary::Family;
use aetlab::driver::{run_experiment, ExperimentConfig};
use aetlab::phantoms::PhantomId;
fn main() {
    // sigma2 full view at paper-like resolution
    let cfg = ExperimentConfig {
        phantom: PhantomId::Sigma2,
        family: Family::Adapted,
        gamma_index: 8,
        data_h: 0.0067,
        recon_h: 0.0084,
        ..Default::default()
    };
    let r = run_experiment(&cfg).unwrap();
    println!("sigma2 adapted G8 paper-res: {:.4}% (paper 0.03)", r.rel_l2_error_pct);
}
