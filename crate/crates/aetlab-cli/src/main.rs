//! CLI driver: simulate, reconstruct, sweep, noise-study, check-bc, export.
//!
//! Exit codes: 0 success, 2 admissibility failure, 3 solver failure,
//! 1 other errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use aetlab::boundary::{
    adapted_pair, check_admissibility, custom_pair_from_csv, cutoff_pair, AdmissibilityReport,
    Family,
};
use aetlab::driver::{
    export_figures, parse_config_text, run_experiment_full, sweep, ExperimentConfig, RunReport,
};
use aetlab::field::{write_csv, write_scalar_vtk};
use aetlab::forward::{jacobian_diagnostics, power_density, solve_neumann, NeumannProblem};
use aetlab::mesh::{build_disk_mesh, select_arc};
use aetlab::phantoms::Phantom;

#[derive(Parser)]
#[command(
    name = "aetlab",
    about = "Limited-view acousto-electric tomography laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the experiment-shaped subcommands. Every flag overrides
/// the config file (when given), which overrides built-in defaults.
#[derive(Args, Clone)]
struct ExperimentFlags {
    /// Config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phantom: identity | sigma1 | sigma2.
    #[arg(long)]
    phantom: Option<String>,
    /// Boundary family: adapted | cutoff.
    #[arg(long)]
    family: Option<String>,
    /// Arc index i in 1..=8 (Gamma_i spans i*pi/4).
    #[arg(long)]
    gamma: Option<usize>,
    /// Noise level in percent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Eigenvalue floor.
    #[arg(long)]
    floor: Option<f64>,
    /// Data (forward) mesh spacing.
    #[arg(long = "data-h")]
    data_h: Option<f64>,
    /// Reconstruction mesh spacing.
    #[arg(long = "recon-h")]
    recon_h: Option<f64>,
    /// Normalize noise by the Euclidean nodal norm instead of the L2 norm.
    #[arg(long)]
    vector_norm_noise: bool,
    /// Percentile clamp for |F| ("off" to disable).
    #[arg(long)]
    clamp: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentFlags {
    fn build(&self) -> aetlab::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            cfg.apply(&parse_config_text(&text)?)?;
        }
        let mut kv = BTreeMap::new();
        if let Some(v) = &self.phantom {
            kv.insert("phantom".into(), v.clone());
        }
        if let Some(v) = &self.family {
            kv.insert("family".into(), v.clone());
        }
        if let Some(v) = self.gamma {
            kv.insert("gamma".into(), v.to_string());
        }
        if let Some(v) = self.alpha {
            kv.insert("alpha".into(), v.to_string());
        }
        if let Some(v) = self.seed {
            kv.insert("seed".into(), v.to_string());
        }
        if let Some(v) = self.floor {
            kv.insert("floor".into(), v.to_string());
        }
        if let Some(v) = self.data_h {
            kv.insert("data_h".into(), v.to_string());
        }
        if let Some(v) = self.recon_h {
            kv.insert("recon_h".into(), v.to_string());
        }
        if self.vector_norm_noise {
            kv.insert("vector_norm_noise".into(), "true".into());
        }
        if let Some(v) = &self.clamp {
            kv.insert("clamp".into(), v.clone());
        }
        if let Some(v) = &self.out {
            kv.insert("out".into(), v.display().to_string());
        }
        cfg.apply(&kv)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Forward simulation only: solve the two Neumann problems on the data
    /// mesh and export power densities and Jacobian diagnostics.
    Simulate(ExperimentFlags),
    /// Full pipeline: forward data, perturbation, two-step reconstruction,
    /// report row and artifacts.
    Reconstruct(ExperimentFlags),
    /// Tables 1-2 layout: all 8 arcs for both families at one noise level.
    Sweep {
        #[command(flatten)]
        flags: ExperimentFlags,
        /// Worker threads.
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
    /// Tables 3-4 layout: Gamma_5 and Gamma_4, both families,
    /// alpha in {1, 5, 10}.
    NoiseStudy {
        #[command(flatten)]
        flags: ExperimentFlags,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
    /// Print the admissibility report of a boundary pair as CSV.
    CheckBc {
        /// Boundary family: adapted | cutoff.
        #[arg(long, default_value = "adapted")]
        family: String,
        /// Arc index i in 1..=8.
        #[arg(long, default_value_t = 8)]
        gamma: usize,
        /// Custom pair as CSV rows t,f1,f2 (overrides family/gamma).
        #[arg(long)]
        pair_csv: Option<PathBuf>,
    },
    /// Re-export the figure files from a completed run directory.
    Export {
        /// Run directory containing config.txt.
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> aetlab::Result<()> {
    match cli.command {
        Command::Simulate(flags) => simulate(&flags.build()?),
        Command::Reconstruct(flags) => {
            let cfg = flags.build()?;
            let (report, _) = run_experiment_full(&cfg)?;
            println!("{}", RunReport::CSV_HEADER);
            println!("{}", report.csv_row());
            eprintln!("{}", report.summary_line());
            Ok(())
        }
        Command::Sweep { flags, threads } => {
            let base = flags.build()?;
            let mut configs = Vec::new();
            for family in [Family::Adapted, Family::Cutoff] {
                for gamma in (1..=8).rev() {
                    let mut cfg = base.clone();
                    cfg.family = family;
                    cfg.gamma_index = gamma;
                    cfg.out_dir = base
                        .out_dir
                        .as_ref()
                        .map(|d| d.join(cfg.tag()));
                    configs.push(cfg);
                }
            }
            run_table(&configs, threads, base.out_dir.as_deref(), "sweep.csv")
        }
        Command::NoiseStudy { flags, threads } => {
            let base = flags.build()?;
            let mut configs = Vec::new();
            for gamma in [5usize, 4] {
                for family in [Family::Adapted, Family::Cutoff] {
                    for alpha in [1.0, 5.0, 10.0] {
                        let mut cfg = base.clone();
                        cfg.family = family;
                        cfg.gamma_index = gamma;
                        cfg.alpha = alpha;
                        cfg.out_dir = base
                            .out_dir
                            .as_ref()
                            .map(|d| d.join(cfg.tag()));
                        configs.push(cfg);
                    }
                }
            }
            run_table(&configs, threads, base.out_dir.as_deref(), "noise_study.csv")
        }
        Command::CheckBc {
            family,
            gamma,
            pair_csv,
        } => {
            let pair = match pair_csv {
                Some(path) => custom_pair_from_csv(&std::fs::read_to_string(path)?)?,
                None => match Family::parse(&family) {
                    Some(Family::Adapted) => adapted_pair(gamma)?,
                    Some(Family::Cutoff) => cutoff_pair(gamma)?,
                    _ => {
                        return Err(aetlab::Error::BadConfig(format!(
                            "family must be adapted|cutoff, got {family:?}"
                        )))
                    }
                },
            };
            let report = check_admissibility(&pair);
            println!("{}", AdmissibilityReport::CSV_HEADER);
            println!("{}", report.csv_row());
            if !report.admissible {
                return Err(aetlab::Error::NotAdmissible(report.csv_row()));
            }
            Ok(())
        }
        Command::Export { run } => {
            let text = std::fs::read_to_string(run.join("config.txt"))?;
            let mut cfg = ExperimentConfig::default();
            cfg.apply(&parse_config_text(&text)?)?;
            cfg.out_dir = None;
            let (_, artifacts) = run_experiment_full(&cfg)?;
            export_figures(&run, &artifacts)?;
            eprintln!("figures written to {}", run.display());
            Ok(())
        }
    }
}

fn run_table(
    configs: &[ExperimentConfig],
    threads: usize,
    out_dir: Option<&std::path::Path>,
    file: &str,
) -> aetlab::Result<()> {
    let rows = sweep(configs, threads);
    let mut table = String::from(RunReport::CSV_HEADER);
    table.push('\n');
    for row in &rows {
        table.push_str(&row.csv_row());
        table.push('\n');
        eprintln!("{}", row.summary_line());
    }
    print!("{table}");
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(file), table)?;
    }
    Ok(())
}

/// Forward-only pipeline: data-mesh solves plus power-density export.
fn simulate(cfg: &ExperimentConfig) -> aetlab::Result<()> {
    let pair = match cfg.family {
        Family::Adapted => adapted_pair(cfg.gamma_index)?,
        Family::Cutoff => cutoff_pair(cfg.gamma_index)?,
        Family::Custom => {
            return Err(aetlab::Error::BadConfig(
                "simulate takes adapted|cutoff".into(),
            ))
        }
    };
    let admissibility = check_admissibility(&pair);
    if !admissibility.admissible {
        return Err(aetlab::Error::NotAdmissible(admissibility.csv_row()));
    }
    let phantom = Phantom::new(cfg.phantom);
    let mesh = build_disk_mesh(cfg.data_h)?;
    let sigma = phantom.sample_to_mesh(&mesh);
    let arc = select_arc(&mesh, pair.ell())?;
    let f1 = |t: f64| pair.f1(t);
    let f2 = |t: f64| pair.f2(t);
    let (u1, s1) = solve_neumann(&NeumannProblem {
        mesh: &mesh,
        sigma: &sigma,
        arc: &arc,
        flux: &f1,
        lambda: phantom.lambda_bound(),
    })?;
    let (u2, s2) = solve_neumann(&NeumannProblem {
        mesh: &mesh,
        sigma: &sigma,
        arc: &arc,
        flux: &f2,
        lambda: phantom.lambda_bound(),
    })?;
    let h = power_density(&sigma, &u1, &u2);
    let diag = jacobian_diagnostics(&sigma, &u1, &u2);
    eprintln!(
        "forward solves: {} and {} iterations; cell identity max rel err {:.3e}",
        s1.iterations, s2.iterations, diag.cell_identity_max_rel_err
    );
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), cfg.echo())?;
        std::fs::write(
            dir.join("admissibility.csv"),
            format!(
                "{}\n{}\n",
                AdmissibilityReport::CSV_HEADER,
                admissibility.csv_row()
            ),
        )?;
        mesh.write_vtk(&dir.join("data_mesh.vtk"), "data mesh")?;
        write_csv(
            &dir.join("h_data.csv"),
            &mesh,
            "node,x,y,h11,h12,h22",
            &[&h.h11, &h.h12, &h.h22],
        )?;
        write_scalar_vtk(
            &dir.join("h_data.vtk"),
            &mesh,
            "power densities",
            &[
                ("h11", &h.h11),
                ("h12", &h.h12),
                ("h22", &h.h22),
                ("det_h", diag.det_h.values()),
            ],
        )?;
        write_scalar_vtk(
            &dir.join("u.vtk"),
            &mesh,
            "potentials",
            &[("u1", u1.values()), ("u2", u2.values())],
        )?;
        eprintln!("artifacts written to {}", dir.display());
    }
    Ok(())
}
