use aetlab::boundary::Family;
use aetlab::driver::{run_experiment, ExperimentConfig};
use aetlab::phantoms::PhantomId;
fn main() {
    for (dh, rh) in [(0.0067, 0.0084), (0.006, 0.0075), (0.0067, 0.0095)] {
        for floor in [1e-6f64, 1e-14] {
            for gamma in [8usize, 7, 6, 5, 1] {
                let cfg = ExperimentConfig {
                    phantom: PhantomId::Sigma1,
                    family: Family::Adapted,
                    gamma_index: gamma,
                    data_h: dh,
                    recon_h: rh,
                    floor_l: floor,
                    ..Default::default()
                };
                match run_experiment(&cfg) {
                    Ok(r) => println!("dh={dh} rh={rh} floor={floor:.0e} G{gamma}: {:8.3}%", r.rel_l2_error_pct),
                    Err(e) => println!("dh={dh} rh={rh} floor={floor:.0e} G{gamma}: ERROR {e}"),
                }
            }
        }
    }
}
