//! Run artifacts and file export: VTK point data, CSV dumps, and the
//! logarithmic figure views.

use std::path::Path;
use std::sync::Arc;

use crate::boundary::AdmissibilityReport;
use crate::driver::{ExperimentConfig, RunReport};
use crate::field::{
    log_sym, write_csv, write_scalar_vtk, CellScalarField, NodalScalarField, PowerDensityField,
};
use crate::mesh::TriangleMesh;
use crate::Result;

/// Log-view scale shared by all exported figures.
pub const LOG_SYM_C: f64 = 1e-3;

/// Reconstruction-side fields of a completed run.
pub struct RunArtifacts {
    pub mesh_recon: Arc<TriangleMesh>,
    /// Floored power density actually used for the reconstruction.
    pub h_floored: PowerDensityField,
    /// det H on the reconstruction mesh (post flooring).
    pub det_h_recon: NodalScalarField,
    pub theta_rec: NodalScalarField,
    pub sigma_rec: NodalScalarField,
    pub sigma_true: NodalScalarField,
    /// det J per cell on the data mesh.
    pub det_j_data: CellScalarField,
    pub admissibility: AdmissibilityReport,
}

fn log_floor(x: f64) -> f64 {
    x.max(1e-16).ln()
}

/// Write the six figure files: log(H11), log_sym(H12), log(H22), log(det H),
/// sigma_rec, sigma_true, all as VTK point data on the reconstruction mesh.
pub fn export_figures(dir: &Path, artifacts: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mesh = &artifacts.mesh_recon;
    let h = &artifacts.h_floored;
    let log_h11: Vec<f64> = h.h11.iter().map(|&v| log_floor(v)).collect();
    let logsym_h12: Vec<f64> = h.h12.iter().map(|&v| log_sym(v, LOG_SYM_C)).collect();
    let log_h22: Vec<f64> = h.h22.iter().map(|&v| log_floor(v)).collect();
    let log_det_h: Vec<f64> = artifacts
        .det_h_recon
        .values()
        .iter()
        .map(|&v| log_floor(v))
        .collect();
    write_scalar_vtk(&dir.join("log_h11.vtk"), mesh, "log(H11)", &[("log_h11", &log_h11)])?;
    write_scalar_vtk(
        &dir.join("logsym_h12.vtk"),
        mesh,
        "log_sym(H12)",
        &[("logsym_h12", &logsym_h12)],
    )?;
    write_scalar_vtk(&dir.join("log_h22.vtk"), mesh, "log(H22)", &[("log_h22", &log_h22)])?;
    write_scalar_vtk(
        &dir.join("log_deth.vtk"),
        mesh,
        "log(det H)",
        &[("log_deth", &log_det_h)],
    )?;
    write_scalar_vtk(
        &dir.join("sigma_rec.vtk"),
        mesh,
        "reconstructed conductivity",
        &[("sigma_rec", artifacts.sigma_rec.values())],
    )?;
    write_scalar_vtk(
        &dir.join("sigma_true.vtk"),
        mesh,
        "true conductivity",
        &[("sigma_true", artifacts.sigma_true.values())],
    )?;
    Ok(())
}

/// Write the full artifact set of a run directory.
pub fn write_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &RunReport,
    artifacts: &RunArtifacts,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.echo())?;
    std::fs::write(
        dir.join("report.csv"),
        format!("{}\n{}\n", RunReport::CSV_HEADER, report.csv_row()),
    )?;
    std::fs::write(
        dir.join("admissibility.csv"),
        format!(
            "{}\n{}\n",
            AdmissibilityReport::CSV_HEADER,
            artifacts.admissibility.csv_row()
        ),
    )?;
    let mesh = &artifacts.mesh_recon;
    mesh.write_vtk(&dir.join("recon_mesh.vtk"), "reconstruction mesh")?;
    let h = &artifacts.h_floored;
    write_csv(
        &dir.join("h_floored.csv"),
        mesh,
        "node,x,y,h11,h12,h22",
        &[&h.h11, &h.h12, &h.h22],
    )?;
    write_csv(
        &dir.join("sigma_rec.csv"),
        mesh,
        "node,x,y,sigma_rec",
        &[artifacts.sigma_rec.values()],
    )?;
    write_csv(
        &dir.join("sigma_true.csv"),
        mesh,
        "node,x,y,sigma_true",
        &[artifacts.sigma_true.values()],
    )?;
    write_scalar_vtk(
        &dir.join("theta_rec.vtk"),
        mesh,
        "reconstructed gradient angle",
        &[("theta_rec", artifacts.theta_rec.values())],
    )?;
    write_scalar_vtk(
        &dir.join("det_h.vtk"),
        mesh,
        "det H",
        &[("det_h", artifacts.det_h_recon.values())],
    )?;
    export_figures(dir, artifacts)
}
