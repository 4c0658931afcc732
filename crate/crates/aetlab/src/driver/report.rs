//! Per-experiment report rows and the versioned CSV schema.

use crate::boundary::AdmissibilityReport;
use crate::driver::ExperimentConfig;

/// Numeric record of one experiment.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub phantom: String,
    pub family: String,
    pub gamma_index: usize,
    pub ell: f64,
    pub alpha: f64,
    pub seed: u64,
    pub floor_l: f64,
    pub data_h: f64,
    pub recon_h: f64,
    pub data_nodes: usize,
    pub recon_nodes: usize,
    pub admissible: bool,
    pub winding_index: f64,
    /// Relative L2 error of the reconstructed conductivity, percent.
    pub rel_l2_error_pct: f64,
    pub min_abs_det_j: f64,
    pub median_abs_det_j: f64,
    /// 1st percentile of |det J| over cells touching the uncontrolled
    /// boundary (NaN for full view).
    pub p01_abs_det_j_uncontrolled: f64,
    pub max_cell_identity_rel_err: f64,
    pub neumann_iterations: [usize; 2],
    pub theta_iterations: usize,
    pub sigma_iterations: usize,
    pub trace_repairs: usize,
    pub clamped_cells: usize,
    pub min_floored_eigenvalue: f64,
    pub wall_ms: f64,
    /// Failure note for sweep rows that did not complete.
    pub error: Option<String>,
}

impl RunReport {
    pub const CSV_HEADER: &'static str = "# aetlab run-report v1\nphantom,family,gamma,ell,alpha,seed,floor,data_h,recon_h,data_nodes,recon_nodes,admissible,winding_index,rel_l2_error_pct,min_abs_detj,median_abs_detj,p01_abs_detj_uncontrolled,max_cell_identity_rel_err,neumann_its_u1,neumann_its_u2,theta_its,sigma_its,trace_repairs,clamped_cells,min_floored_eigenvalue,wall_ms,error";

    pub fn failed(cfg: &ExperimentConfig, error: String) -> Self {
        RunReport {
            phantom: cfg.phantom.name().to_string(),
            family: cfg.family.name().to_string(),
            gamma_index: cfg.gamma_index,
            ell: cfg.gamma_index as f64 * std::f64::consts::PI / 4.0,
            alpha: cfg.alpha,
            seed: cfg.seed,
            floor_l: cfg.floor_l,
            data_h: cfg.data_h,
            recon_h: cfg.recon_h,
            data_nodes: 0,
            recon_nodes: 0,
            admissible: false,
            winding_index: f64::NAN,
            rel_l2_error_pct: f64::NAN,
            min_abs_det_j: f64::NAN,
            median_abs_det_j: f64::NAN,
            p01_abs_det_j_uncontrolled: f64::NAN,
            max_cell_identity_rel_err: f64::NAN,
            neumann_iterations: [0, 0],
            theta_iterations: 0,
            sigma_iterations: 0,
            trace_repairs: 0,
            clamped_cells: 0,
            min_floored_eigenvalue: f64::NAN,
            wall_ms: 0.0,
            error: Some(error),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.15},{},{},{:e},{},{},{},{},{},{:.9},{:.6},{:.6e},{:.6e},{:.6e},{:.3e},{},{},{},{},{},{},{:.6e},{:.3},{}",
            self.phantom,
            self.family,
            self.gamma_index,
            self.ell,
            self.alpha,
            self.seed,
            self.floor_l,
            self.data_h,
            self.recon_h,
            self.data_nodes,
            self.recon_nodes,
            self.admissible,
            self.winding_index,
            self.rel_l2_error_pct,
            self.min_abs_det_j,
            self.median_abs_det_j,
            self.p01_abs_det_j_uncontrolled,
            self.max_cell_identity_rel_err,
            self.neumann_iterations[0],
            self.neumann_iterations[1],
            self.theta_iterations,
            self.sigma_iterations,
            self.trace_repairs,
            self.clamped_cells,
            self.min_floored_eigenvalue,
            self.wall_ms,
            self.error.as_deref().unwrap_or("")
        )
    }

    pub fn summary_line(&self) -> String {
        match &self.error {
            Some(e) => format!(
                "{} {} Gamma_{} alpha={}: FAILED ({e})",
                self.phantom, self.family, self.gamma_index, self.alpha
            ),
            None => format!(
                "{} {} Gamma_{} alpha={}: rel L2 error {:.3}% ({} ms)",
                self.phantom,
                self.family,
                self.gamma_index,
                self.alpha,
                self.rel_l2_error_pct,
                self.wall_ms as u64
            ),
        }
    }

    pub(crate) fn set_admissibility(&mut self, rep: &AdmissibilityReport) {
        self.admissible = rep.admissible;
        self.winding_index = rep.index;
    }
}
