//! Numerical laboratory for limited-view acousto-electric tomography on the
//! unit disk.
//!
//! The pipeline: choose a pair of Neumann boundary functions supported on a
//! boundary arc, certify it with a generalized winding number, solve the
//! conductivity equation for two potentials on a fine mesh, form the power
//! density matrix `H_ij = sigma * grad(u_i) . grad(u_j)`, optionally perturb
//! it with multiplicative Gaussian noise and floor its eigenvalues, then
//! recover the conductivity on a coarser mesh in two Poisson solves: first
//! the rotation angle of the normalized gradient frame, then `log(sigma)`.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`mesh`] — deterministic concentric-ring triangulations of the disk
//! * [`field`] — P1 field containers, calculus, interpolation, solvers
//! * [`boundary`] — boundary-function families and admissibility checks
//! * [`phantoms`] — ground-truth conductivities
//! * [`forward`] — Neumann solves and power densities
//! * [`perturb`] — noise model and eigenvalue flooring
//! * [`recon`] — the two-step reconstruction
//! * [`driver`] — experiment orchestration, reports, file export

pub mod boundary;
pub mod driver;
pub mod field;
pub mod forward;
mod linalg;
pub mod mesh;
pub mod perturb;
pub mod phantoms;
pub mod recon;

use thiserror::Error;

/// Errors surfaced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh spacing {0} outside (0, 0.5)")]
    BadMeshSpacing(f64),
    #[error("arc length {0} outside (0, 2*pi]")]
    BadArcLength(f64),
    #[error("triangle {index} degenerate (area {area:.3e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("fields live on different meshes")]
    MeshMismatch,
    #[error("point ({x:.6}, {y:.6}) farther than 2h from every triangle")]
    PointLocation { x: f64, y: f64 },
    #[error("{stage}: no convergence after {iterations} iterations (rel. residual {residual:.3e})")]
    SolverDivergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("relative L2 error undefined: reference field has zero norm")]
    ZeroNormTruth,
    #[error("boundary family index {0} outside 1..=8")]
    GammaIndexOutOfRange(usize),
    #[error("curve passes within {min_norm:.3e} of the origin; argument undefined")]
    CurveThroughZero { min_norm: f64 },
    #[error("conductivity minimum {min:.6} below ellipticity bound {lambda}")]
    SigmaBelowLambda { min: f64, lambda: f64 },
    #[error("incompatible Neumann data: |integral of f over the arc| = {integral:.3e} exceeds {tol:.1e}")]
    IncompatibleFlux { integral: f64, tol: f64 },
    #[error("power density not positive definite at node {node} (h11 {h11:.3e}, det {det:.3e}); eigenvalue flooring was skipped")]
    NotFloored { node: usize, h11: f64, det: f64 },
    #[error("boundary pair rejected: {0}")]
    NotAdmissible(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for admissibility failures, 3 for
    /// solver failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotAdmissible(_) | Error::CurveThroughZero { .. } => 2,
            Error::SolverDivergence { .. } | Error::IncompatibleFlux { .. } => 3,
            _ => 1,
        }
    }
}
