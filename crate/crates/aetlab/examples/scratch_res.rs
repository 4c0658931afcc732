use aetlab::boundary::Family;
use aetlab::driver::{run_experiment, ExperimentConfig};
use aetlab::phantoms::PhantomId;
fn main() {
    // (data_h, recon_h): desk default vs near paper resolution
    for (dh, rh) in [(0.0125, 0.016), (0.009, 0.0115), (0.0067, 0.0084)] {
        for gamma in [7usize, 6, 5, 1] {
            let cfg = ExperimentConfig {
                phantom: PhantomId::Sigma1,
                family: Family::Adapted,
                gamma_index: gamma,
                data_h: dh,
                recon_h: rh,
                ..Default::default()
            };
            match run_experiment(&cfg) {
                Ok(r) => println!(
                    "G{gamma} dh={dh} rh={rh}: err {:8.3}%  ({} data, {} recon nodes, {:.0} ms)",
                    r.rel_l2_error_pct, r.data_nodes, r.recon_nodes, r.wall_ms
                ),
                Err(e) => println!("G{gamma} dh={dh}: ERROR {e}"),
            }
        }
    }
}
