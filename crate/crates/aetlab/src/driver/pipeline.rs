//! The end-to-end experiment pipeline and sweep runner.

use std::sync::Arc;
use std::time::Instant;

use crate::boundary::{adapted_pair, check_admissibility, cutoff_pair, BoundaryPair, Family};
use crate::driver::export::{write_artifacts, RunArtifacts};
use crate::driver::{ExperimentConfig, RunReport};
use crate::field::{interpolate_with, NodalScalarField, PointLocator, PowerDensityField};
use crate::forward::{
    jacobian_diagnostics, power_density, solve_neumann, NeumannProblem,
};
use crate::mesh::{build_disk_mesh, select_arc};
use crate::perturb::{add_noise, eigen_floor, NoiseSpec};
use crate::phantoms::Phantom;
use crate::recon::{
    boundary_theta, clamp_magnitude_percentile, sigma_rhs, solve_sigma, solve_theta, theta_rhs,
    transfer_matrix,
};
use crate::{Error, Result};

fn family_pair(family: Family, i: usize) -> Result<BoundaryPair> {
    match family {
        Family::Adapted => adapted_pair(i),
        Family::Cutoff => cutoff_pair(i),
        Family::Custom => Err(Error::BadConfig(
            "custom pairs are for check-bc only; experiments take adapted|cutoff".into(),
        )),
    }
}

/// Run one experiment: admissibility check, forward solves on the data mesh,
/// interpolation, perturbation, flooring, two-step reconstruction, metrics,
/// and (when configured) artifact files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_full(cfg).map(|(report, _)| report)
}

/// Like [`run_experiment`] but also returns the field artifacts.
pub fn run_experiment_full(cfg: &ExperimentConfig) -> Result<(RunReport, RunArtifacts)> {
    cfg.validate()?;
    let started = Instant::now();

    let pair = family_pair(cfg.family, cfg.gamma_index)?;
    let admissibility = check_admissibility(&pair);
    if !admissibility.admissible {
        return Err(Error::NotAdmissible(format!(
            "{} Gamma_{}: {}",
            cfg.family.name(),
            cfg.gamma_index,
            admissibility.csv_row()
        )));
    }

    let phantom = Phantom::new(cfg.phantom);
    let mesh_data = build_disk_mesh(cfg.data_h)?;
    let mesh_recon = build_disk_mesh(cfg.recon_h)?;
    let sigma_data = phantom.sample_to_mesh(&mesh_data);
    let arc = select_arc(&mesh_data, pair.ell())?;

    let lambda = phantom.lambda_bound();
    let f1 = |t: f64| pair.f1(t);
    let f2 = |t: f64| pair.f2(t);
    let (u1, stats1) = solve_neumann(&NeumannProblem {
        mesh: &mesh_data,
        sigma: &sigma_data,
        arc: &arc,
        flux: &f1,
        lambda,
    })?;
    let (u2, stats2) = solve_neumann(&NeumannProblem {
        mesh: &mesh_data,
        sigma: &sigma_data,
        arc: &arc,
        flux: &f2,
        lambda,
    })?;

    let h_data = power_density(&sigma_data, &u1, &u2);
    let diagnostics = jacobian_diagnostics(&sigma_data, &u1, &u2);

    // |det J| statistics on the data mesh
    let mut abs_detj: Vec<f64> = diagnostics.det_j.values().iter().map(|v| v.abs()).collect();
    abs_detj.sort_by(f64::total_cmp);
    let min_abs_det_j = abs_detj[0];
    let median_abs_det_j = abs_detj[abs_detj.len() / 2];
    let p01_uncontrolled = if arc.is_full_boundary() {
        f64::NAN
    } else {
        let mut vals: Vec<f64> = uncontrolled_boundary_cells(&mesh_data, pair.ell())
            .into_iter()
            .map(|c| diagnostics.det_j.values()[c].abs())
            .collect();
        vals.sort_by(f64::total_cmp);
        if vals.is_empty() {
            f64::NAN
        } else {
            vals[((vals.len() - 1) as f64 * 0.01).round() as usize]
        }
    };

    // transfer the power density to the reconstruction mesh
    let locator_data = PointLocator::new(mesh_data.clone());
    let interp = |v: &[f64]| -> Result<Vec<f64>> {
        Ok(interpolate_with(
            &locator_data,
            &NodalScalarField::new(mesh_data.clone(), v.to_vec()),
            &mesh_recon,
        )?
        .values()
        .to_vec())
    };
    let h_interp = PowerDensityField::new(
        mesh_recon.clone(),
        interp(&h_data.h11)?,
        interp(&h_data.h12)?,
        interp(&h_data.h22)?,
    );

    let noise = NoiseSpec {
        alpha: cfg.alpha,
        seed: cfg.seed,
        floor_l: cfg.floor_l,
        vector_norm: cfg.vector_norm_noise,
    };
    let h_noisy = add_noise(&h_interp, &noise);
    let h_floored = eigen_floor(&h_noisy, cfg.floor_l)?;
    let min_floored_eigenvalue = h_floored.min_eigenvalue();

    // two-step reconstruction
    let td = transfer_matrix(&h_floored)?;
    let mut f_rhs = theta_rhs(&td);
    let clamped_cells = match cfg.clamp_percentile {
        Some(p) => clamp_magnitude_percentile(&mut f_rhs, p),
        None => 0,
    };
    let traces = boundary_theta(&u1, &sigma_data, &mesh_recon)?;
    let (theta, theta_stats) = solve_theta(&f_rhs, &traces)?;
    let g_rhs = sigma_rhs(&td, &theta);
    let (sigma_rec, sigma_stats) = solve_sigma(&g_rhs, &traces)?;

    let sigma_true = phantom.sample_to_mesh(&mesh_recon);
    let rel_l2_error_pct = crate::field::relative_l2_error(&sigma_rec, &sigma_true)?;

    let mut report = RunReport {
        phantom: cfg.phantom.name().to_string(),
        family: cfg.family.name().to_string(),
        gamma_index: cfg.gamma_index,
        ell: pair.ell(),
        alpha: cfg.alpha,
        seed: cfg.seed,
        floor_l: cfg.floor_l,
        data_h: cfg.data_h,
        recon_h: cfg.recon_h,
        data_nodes: mesh_data.node_count(),
        recon_nodes: mesh_recon.node_count(),
        admissible: true,
        winding_index: f64::NAN,
        rel_l2_error_pct,
        min_abs_det_j,
        median_abs_det_j,
        p01_abs_det_j_uncontrolled: p01_uncontrolled,
        max_cell_identity_rel_err: diagnostics.cell_identity_max_rel_err,
        neumann_iterations: [stats1.iterations, stats2.iterations],
        theta_iterations: theta_stats.iterations,
        sigma_iterations: sigma_stats.iterations,
        trace_repairs: traces.repaired,
        clamped_cells,
        min_floored_eigenvalue,
        wall_ms: started.elapsed().as_secs_f64() * 1000.0,
        error: None,
    };
    report.set_admissibility(&admissibility);

    let artifacts = RunArtifacts {
        mesh_recon,
        h_floored,
        det_h_recon: td.d.map(|d| d * d),
        theta_rec: theta,
        sigma_rec,
        sigma_true,
        det_j_data: diagnostics.det_j,
        admissibility,
    };
    if let Some(dir) = &cfg.out_dir {
        write_artifacts(dir, cfg, &report, &artifacts)?;
    }
    Ok((report, artifacts))
}

/// Cells of the data mesh with a boundary edge beyond the arc endpoint.
pub fn uncontrolled_boundary_cells(
    mesh: &Arc<crate::mesh::TriangleMesh>,
    ell: f64,
) -> Vec<usize> {
    use std::collections::HashMap;
    // boundary edges by sorted node pair -> parameter midpoint
    let loop_nodes = mesh.boundary_loop();
    let ts = mesh.boundary_t();
    let n = loop_nodes.len();
    let mut edge_mid: HashMap<(usize, usize), f64> = HashMap::new();
    for k in 0..n {
        let a = loop_nodes[k];
        let b = loop_nodes[(k + 1) % n];
        let t0 = ts[k];
        let t1 = if k + 1 == n { std::f64::consts::TAU } else { ts[k + 1] };
        edge_mid.insert((a.min(b), a.max(b)), 0.5 * (t0 + t1));
    }
    let mut cells = Vec::new();
    for i in 0..mesh.triangle_count() {
        let t = mesh.triangle(i);
        for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = (e.0.min(e.1), e.0.max(e.1));
            if let Some(&mid) = edge_mid.get(&key) {
                if mid > ell {
                    cells.push(i);
                    break;
                }
            }
        }
    }
    cells
}

/// Run a list of experiments in a small work pool. Row order matches the
/// input; failures become rows with the error flag set and the sweep
/// continues.
pub fn sweep(configs: &[ExperimentConfig], threads: usize) -> Vec<RunReport> {
    let threads = threads.max(1).min(configs.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut rows: Vec<Option<RunReport>> = vec![None; configs.len()];
    let slots: Vec<std::sync::Mutex<Option<RunReport>>> =
        (0..configs.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= configs.len() {
                    break;
                }
                let report = match run_experiment(&configs[k]) {
                    Ok(r) => r,
                    Err(e) => RunReport::failed(&configs[k], e.to_string()),
                };
                *slots[k].lock().unwrap() = Some(report);
            });
        }
    });
    for (k, slot) in slots.into_iter().enumerate() {
        rows[k] = slot.into_inner().unwrap();
    }
    rows.into_iter().map(Option::unwrap).collect()
}
