use aetlab::boundary::Family;
use aetlab::driver::{run_experiment, ExperimentConfig};
use aetlab::phantoms::PhantomId;
fn main() {
    for gamma in [8usize, 7, 6, 5, 4, 3, 2, 1] {
        let cfg = ExperimentConfig {
            phantom: PhantomId::Sigma1,
            family: Family::Adapted,
            gamma_index: gamma,
            clamp_percentile: None,
            ..Default::default()
        };
        match run_experiment(&cfg) {
            Ok(r) => println!("sigma1 adapted G{gamma} noclamp: err {:.3}% repairs {}", r.rel_l2_error_pct, r.trace_repairs),
            Err(e) => println!("G{gamma}: ERROR {e}"),
        }
    }
}
