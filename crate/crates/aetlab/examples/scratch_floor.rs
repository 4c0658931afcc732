use aetlab::boundary::Family;
use aetlab::driver::{run_experiment, ExperimentConfig};
use aetlab::phantoms::PhantomId;
fn main() {
    for floor in [1e-6f64, 1e-10, 1e-14] {
        for gamma in [7usize, 6, 5, 1] {
            let cfg = ExperimentConfig {
                phantom: PhantomId::Sigma1,
                family: Family::Adapted,
                gamma_index: gamma,
                floor_l: floor,
                ..Default::default()
            };
            match run_experiment(&cfg) {
                Ok(r) => println!("G{gamma} floor={floor:.0e}: err {:8.3}%  minfloor {:.2e}", r.rel_l2_error_pct, r.min_floored_eigenvalue),
                Err(e) => println!("G{gamma} floor={floor:.0e}: ERROR {e}"),
            }
        }
    }
}
