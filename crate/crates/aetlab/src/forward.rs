//! Forward problem: the limited-view Neumann conductivity equation and the
//! power densities it induces.
//!
//! The flux load samples the boundary function at each edge's parameter
//! midpoint and distributes it with exact hat-function chord weights. On the
//! polygonal mesh this makes coordinate fluxes exactly consistent with the
//! discrete normal of the boundary (the chord normal is the midpoint
//! direction), so `sigma = 1` with `f = cos t` reproduces the nodal field
//! `x1` to solver precision instead of an O(h^2) rescaling.

use std::sync::Arc;

use crate::field::{
    cell_gradient, stiffness_csr, CellScalarField, NodalScalarField,
    PowerDensityField, SolveStats,
};
use crate::linalg::solve_cg;
pub use crate::linalg::CsrMatrix;
use crate::mesh::{BoundaryArc, TriangleMesh};
use crate::{Error, Result};

/// Compatibility tolerance on the arc integral of the flux density.
pub const COMPATIBILITY_TOL: f64 = 1e-6;

/// One Neumann problem: `-div(sigma grad u) = 0`, `sigma grad(u).nu = f` on
/// the arc and `0` on the rest of the boundary.
pub struct NeumannProblem<'a> {
    pub mesh: &'a Arc<TriangleMesh>,
    pub sigma: &'a NodalScalarField,
    pub arc: &'a BoundaryArc,
    pub flux: &'a (dyn Fn(f64) -> f64 + Sync),
    /// Ellipticity bound: `sigma >= lambda` is enforced.
    pub lambda: f64,
}

/// Per-cell conductivity: average of the triangle's three nodal values.
pub fn cell_sigma(sigma: &NodalScalarField) -> Vec<f64> {
    let mesh = sigma.mesh();
    let v = sigma.values();
    (0..mesh.triangle_count())
        .map(|i| {
            let t = mesh.triangle(i);
            (v[t[0]] + v[t[1]] + v[t[2]]) / 3.0
        })
        .collect()
}

/// Stiffness matrix of `-div(sigma grad u)`; symmetric with the constants in
/// its kernel (zero row sums).
pub fn assemble_stiffness(
    mesh: &Arc<TriangleMesh>,
    sigma: &NodalScalarField,
    lambda: f64,
) -> Result<CsrMatrix> {
    let min = sigma.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min >= lambda) {
        return Err(Error::SigmaBelowLambda { min, lambda });
    }
    let coeff = cell_sigma(sigma);
    Ok(stiffness_csr(mesh, |i| coeff[i]))
}

/// Assemble the flux load: entry per boundary node of `int_Gamma f phi dS`,
/// zero on interior nodes. The integrand is truncated at `t = ell` on the
/// edge containing the arc endpoint.
pub fn neumann_load(mesh: &TriangleMesh, arc: &BoundaryArc, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.node_count()];
    for e in arc.edges() {
        let frac = e.covered_fraction();
        if frac <= 0.0 {
            continue;
        }
        let t_mid = 0.5 * (e.t[0] + e.t_cut);
        let fm = f(t_mid);
        // exact hat-function integrals over the covered chord fraction
        let w0 = e.chord * (frac - 0.5 * frac * frac);
        let w1 = e.chord * 0.5 * frac * frac;
        load[e.nodes[0]] += fm * w0;
        load[e.nodes[1]] += fm * w1;
    }
    load
}

/// Arc integral of the flux density by composite 4-point Gauss-Legendre in
/// the boundary parameter (the compatibility functional of the data).
pub fn flux_integral(arc: &BoundaryArc, f: &dyn Fn(f64) -> f64) -> f64 {
    const X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.347_854_845_137_453_85,
        0.652_145_154_862_546_2,
        0.652_145_154_862_546_2,
        0.347_854_845_137_453_85,
    ];
    let mut acc = 0.0;
    for e in arc.edges() {
        let (a, b) = (e.t[0], e.t_cut);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for k in 0..4 {
            acc += W[k] * half * f(mid + half * X[k]);
        }
    }
    acc
}

/// Solve the singular Neumann system on the mean-zero complement.
///
/// Incompatible data (arc integral of `f` above [`COMPATIBILITY_TOL`]) is
/// rejected; the constant mode is deflated every CG iteration and the
/// solution is shifted to zero nodal mean afterwards.
pub fn solve_neumann(problem: &NeumannProblem) -> Result<(NodalScalarField, SolveStats)> {
    let integral = flux_integral(problem.arc, problem.flux);
    if integral.abs() > COMPATIBILITY_TOL {
        return Err(Error::IncompatibleFlux {
            integral,
            tol: COMPATIBILITY_TOL,
        });
    }
    let a = assemble_stiffness(problem.mesh, problem.sigma, problem.lambda)?;
    let load = neumann_load(problem.mesh, problem.arc, problem.flux);
    let (mut x, stats) = solve_cg(&a, &load, true, "neumann solve")?;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in &mut x {
        *v -= mean;
    }
    Ok((NodalScalarField::new(problem.mesh.clone(), x), stats))
}

/// Power densities `H_ij = sigma grad(u_i).grad(u_j)` per cell, recovered to
/// nodes by area-weighted averaging.
pub fn power_density(
    sigma: &NodalScalarField,
    u1: &NodalScalarField,
    u2: &NodalScalarField,
) -> PowerDensityField {
    let mesh = u1.mesh().clone();
    let (c11, c12, c22) = cell_power_density(sigma, u1, u2);
    let to_nodes = |cell_vals: Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; mesh.node_count()];
        for i in 0..mesh.triangle_count() {
            let a = mesh.area(i);
            for &n in &mesh.triangle(i) {
                acc[n] += a * cell_vals[i];
            }
        }
        for (n, v) in acc.iter_mut().enumerate() {
            *v /= mesh.patch_area(n);
        }
        acc
    };
    PowerDensityField::new(mesh.clone(), to_nodes(c11), to_nodes(c12), to_nodes(c22))
}

/// Cellwise power-density entries before nodal recovery.
pub fn cell_power_density(
    sigma: &NodalScalarField,
    u1: &NodalScalarField,
    u2: &NodalScalarField,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mesh = u1.mesh();
    let s = cell_sigma(sigma);
    let g1 = cell_gradient(u1);
    let g2 = cell_gradient(u2);
    let n = mesh.triangle_count();
    let mut c11 = Vec::with_capacity(n);
    let mut c12 = Vec::with_capacity(n);
    let mut c22 = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (g1.values()[i], g2.values()[i]);
        c11.push(s[i] * (a[0] * a[0] + a[1] * a[1]));
        c12.push(s[i] * (a[0] * b[0] + a[1] * b[1]));
        c22.push(s[i] * (b[0] * b[0] + b[1] * b[1]));
    }
    (c11, c12, c22)
}

/// Jacobian diagnostics of a solution pair.
#[derive(Debug, Clone)]
pub struct JacobianDiagnostics {
    /// det[grad u1, grad u2] per cell.
    pub det_j: CellScalarField,
    /// det H per node, from the recovered power densities.
    pub det_h: NodalScalarField,
    /// Largest relative violation of the cellwise identity
    /// det H = sigma^2 det(J)^2 before recovery.
    pub cell_identity_max_rel_err: f64,
}

pub fn jacobian_diagnostics(
    sigma: &NodalScalarField,
    u1: &NodalScalarField,
    u2: &NodalScalarField,
) -> JacobianDiagnostics {
    let mesh = u1.mesh().clone();
    let s = cell_sigma(sigma);
    let g1 = cell_gradient(u1);
    let g2 = cell_gradient(u2);
    let det_j: Vec<f64> = (0..mesh.triangle_count())
        .map(|i| {
            let (a, b) = (g1.values()[i], g2.values()[i]);
            a[0] * b[1] - a[1] * b[0]
        })
        .collect();

    let (c11, c12, c22) = cell_power_density(sigma, u1, u2);
    let mut max_rel = 0.0f64;
    for i in 0..mesh.triangle_count() {
        let det_h_cell = c11[i] * c22[i] - c12[i] * c12[i];
        let expected = s[i] * s[i] * det_j[i] * det_j[i];
        let scale = det_h_cell.abs().max(expected.abs()).max(1e-300);
        max_rel = max_rel.max((det_h_cell - expected).abs() / scale);
    }

    let h = power_density(sigma, u1, u2);
    JacobianDiagnostics {
        det_j: CellScalarField::new(mesh, det_j),
        det_h: h.det(),
        cell_identity_max_rel_err: max_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk_mesh, paper_arc, select_arc, tri_geometry};
    use std::f64::consts::TAU;

    fn ones(mesh: &Arc<TriangleMesh>) -> NodalScalarField {
        NodalScalarField::from_fn(mesh.clone(), |_, _| 1.0)
    }

    #[test]
    fn local_stiffness_of_unit_right_triangle() {
        // sigma = 1: K = 1/2 * [[2,-1,-1],[-1,1,0],[-1,0,1]]
        let (area, g) = tri_geometry([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                let k = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                assert!((k - expect[a][b]).abs() < 1e-14, "K[{a}][{b}] = {k}");
            }
        }
    }

    #[test]
    fn stiffness_kernel_and_linearity() {
        let mesh = build_disk_mesh(0.15).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |x, y| 1.0 + 0.5 * (x + y).cos());
        let a = assemble_stiffness(&mesh, &sigma, 0.5).unwrap();
        for r in 0..a.n {
            assert!(a.row_sum(r).abs() < 1e-12, "row {r} sum {}", a.row_sum(r));
        }
        let doubled = sigma.map(|v| 2.0 * v);
        let a2 = assemble_stiffness(&mesh, &doubled, 0.5).unwrap();
        for k in 0..a.vals.len() {
            assert!((2.0 * a.vals[k] - a2.vals[k]).abs() < 1e-12);
        }
        let low = sigma.map(|v| 0.1 * v);
        assert!(matches!(
            assemble_stiffness(&mesh, &low, 0.5),
            Err(Error::SigmaBelowLambda { .. })
        ));
    }

    #[test]
    fn zero_flux_gives_zero_load() {
        let mesh = build_disk_mesh(0.2).unwrap();
        let arc = select_arc(&mesh, TAU).unwrap();
        let load = neumann_load(&mesh, &arc, &|_| 0.0);
        assert!(load.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_flux_load_sums_to_perimeter() {
        let mesh = build_disk_mesh(0.02).unwrap();
        let arc = select_arc(&mesh, TAU).unwrap();
        let load = neumann_load(&mesh, &arc, &|_| 1.0);
        let total: f64 = load.iter().sum();
        assert!((total - TAU).abs() < 1e-3, "total {total}");
        // interior nodes carry nothing
        for (i, &v) in load.iter().enumerate() {
            if !mesh.is_boundary_node(i) {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn full_view_coordinate_load_is_compatible() {
        let mesh = build_disk_mesh(0.05).unwrap();
        let arc = select_arc(&mesh, TAU).unwrap();
        let load = neumann_load(&mesh, &arc, &|t| t.cos());
        let total: f64 = load.iter().sum();
        assert!(total.abs() < 1e-8, "sum {total}");
    }

    #[test]
    fn truncated_edge_load_matches_quadrature() {
        // ell strictly inside an edge: total load equals the f-integral
        // against the partial chord, checked against dense quadrature
        let mesh = build_disk_mesh(0.3).unwrap();
        let ell = 1.0;
        let arc = select_arc(&mesh, ell).unwrap();
        let f = |t: f64| (2.0 * t).cos();
        let load = neumann_load(&mesh, &arc, &f);
        let total: f64 = load.iter().sum();
        // oracle: per-edge midpoint of f times covered chord length
        let mut expect = 0.0;
        for e in arc.edges() {
            let frac = e.covered_fraction();
            expect += f(0.5 * (e.t[0] + e.t_cut)) * e.chord * frac;
        }
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn incompatible_flux_is_rejected() {
        let mesh = build_disk_mesh(0.15).unwrap();
        let arc = select_arc(&mesh, TAU).unwrap();
        let sigma = ones(&mesh);
        let problem = NeumannProblem {
            mesh: &mesh,
            sigma: &sigma,
            arc: &arc,
            flux: &|_| 1.0,
            lambda: 0.5,
        };
        assert!(matches!(
            solve_neumann(&problem),
            Err(Error::IncompatibleFlux { .. })
        ));
    }

    #[test]
    fn coordinate_fluxes_reproduce_coordinates() {
        let mesh = build_disk_mesh(0.05).unwrap();
        let arc = select_arc(&mesh, TAU).unwrap();
        let sigma = ones(&mesh);
        let (u1, stats) = solve_neumann(&NeumannProblem {
            mesh: &mesh,
            sigma: &sigma,
            arc: &arc,
            flux: &|t| t.cos(),
            lambda: 0.5,
        })
        .unwrap();
        assert!(stats.rel_residual <= 1e-10);
        let max_err = mesh
            .nodes()
            .iter()
            .zip(u1.values())
            .map(|(p, v)| (v - p[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-8, "max |u1 - x1| = {max_err:.3e}");

        let (u2, _) = solve_neumann(&NeumannProblem {
            mesh: &mesh,
            sigma: &sigma,
            arc: &arc,
            flux: &|t| t.sin(),
            lambda: 0.5,
        })
        .unwrap();
        let max_err = mesh
            .nodes()
            .iter()
            .zip(u2.values())
            .map(|(p, v)| (v - p[1]).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-8, "max |u2 - x2| = {max_err:.3e}");
    }

    #[test]
    fn constant_sigma_scales_solution() {
        // sigma = 2 with the same flux halves the potential
        let mesh = build_disk_mesh(0.08).unwrap();
        let arc = select_arc(&mesh, TAU).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |_, _| 2.0);
        let (u, _) = solve_neumann(&NeumannProblem {
            mesh: &mesh,
            sigma: &sigma,
            arc: &arc,
            flux: &|t| t.cos(),
            lambda: 0.5,
        })
        .unwrap();
        let max_err = mesh
            .nodes()
            .iter()
            .zip(u.values())
            .map(|(p, v)| (v - 0.5 * p[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-8, "max |u - x1/2| = {max_err:.3e}");
    }

    #[test]
    fn superposition_of_fluxes() {
        let mesh = build_disk_mesh(0.1).unwrap();
        let arc = paper_arc(&mesh, 6).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |x, y| 1.0 + 0.3 * x * y);
        let f1 = |t: f64| (4.0 / 3.0 * t).cos();
        let f2 = |t: f64| (4.0 / 3.0 * t).sin();
        let solve = |f: &(dyn Fn(f64) -> f64 + Sync)| {
            solve_neumann(&NeumannProblem {
                mesh: &mesh,
                sigma: &sigma,
                arc: &arc,
                flux: f,
                lambda: 0.5,
            })
            .unwrap()
            .0
        };
        let (a, b) = (2.0, -0.7);
        let u1 = solve(&f1);
        let u2 = solve(&f2);
        let combo = solve(&move |t| a * f1(t) + b * f2(t));
        let max_err = combo
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - (a * u1.values()[i] + b * u2.values()[i])).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-7, "superposition error {max_err:.3e}");
    }

    #[test]
    fn energy_identity() {
        let mesh = build_disk_mesh(0.1).unwrap();
        let arc = paper_arc(&mesh, 4).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |x, _| 1.0 + 0.4 * x * x);
        let flux = |t: f64| (2.0 * t).cos();
        let (u, _) = solve_neumann(&NeumannProblem {
            mesh: &mesh,
            sigma: &sigma,
            arc: &arc,
            flux: &flux,
            lambda: 0.5,
        })
        .unwrap();
        let a = assemble_stiffness(&mesh, &sigma, 0.5).unwrap();
        let mut au = vec![0.0; mesh.node_count()];
        a.mul_vec(u.values(), &mut au);
        let energy: f64 = u.values().iter().zip(&au).map(|(x, y)| x * y).sum();
        let load = neumann_load(&mesh, &arc, &flux);
        let work: f64 = load.iter().zip(u.values()).map(|(l, x)| l * x).sum();
        assert!(
            (energy - work).abs() <= 1e-8 * energy.abs().max(work.abs()),
            "energy {energy} vs work {work}"
        );
    }

    #[test]
    fn power_density_of_identity_data() {
        let mesh = build_disk_mesh(0.15).unwrap();
        let sigma = ones(&mesh);
        let u1 = NodalScalarField::from_fn(mesh.clone(), |x, _| x);
        let u2 = NodalScalarField::from_fn(mesh.clone(), |_, y| y);
        let h = power_density(&sigma, &u1, &u2);
        for i in 0..h.node_count() {
            assert!((h.h11[i] - 1.0).abs() < 1e-12);
            assert!(h.h12[i].abs() < 1e-12);
            assert!((h.h22[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_density_rank_one_and_psd() {
        let mesh = build_disk_mesh(0.15).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |x, y| 1.0 + x * x + y * y);
        let u = NodalScalarField::from_fn(mesh.clone(), |x, y| x + 0.5 * y * y);
        let h = power_density(&sigma, &u, &u);
        for i in 0..h.node_count() {
            assert!((h.h12[i] - h.h11[i]).abs() < 1e-12);
            assert!((h.h22[i] - h.h11[i]).abs() < 1e-12);
        }
        // Cauchy-Schwarz for a generic pair
        let v = NodalScalarField::from_fn(mesh.clone(), |x, y| y - 0.3 * x * x);
        let h = power_density(&sigma, &u, &v);
        for i in 0..h.node_count() {
            let det = h.h11[i] * h.h22[i] - h.h12[i] * h.h12[i];
            assert!(det >= -1e-10, "node {i}: det {det}");
        }
    }

    #[test]
    fn jacobian_identity_and_antisymmetry() {
        let mesh = build_disk_mesh(0.12).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |x, y| 1.2 + 0.3 * (x - y));
        let u1 = NodalScalarField::from_fn(mesh.clone(), |x, y| x + 0.2 * x * y);
        let u2 = NodalScalarField::from_fn(mesh.clone(), |x, y| y - 0.1 * x * x);
        let d = jacobian_diagnostics(&sigma, &u1, &u2);
        assert!(
            d.cell_identity_max_rel_err < 1e-10,
            "identity violation {:.3e}",
            d.cell_identity_max_rel_err
        );
        let swapped = jacobian_diagnostics(&sigma, &u2, &u1);
        for i in 0..mesh.triangle_count() {
            assert!((d.det_j.values()[i] + swapped.det_j.values()[i]).abs() < 1e-12);
        }
        for i in 0..mesh.node_count() {
            assert!((d.det_h.values()[i] - swapped.det_h.values()[i]).abs() < 1e-12);
        }

        // trivial case
        let sigma = ones(&mesh);
        let x = NodalScalarField::from_fn(mesh.clone(), |x, _| x);
        let y = NodalScalarField::from_fn(mesh.clone(), |_, y| y);
        let d = jacobian_diagnostics(&sigma, &x, &y);
        assert!(d.det_j.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(d.det_h.values().iter().all(|v| (v - 1.0).abs() < 1e-11));
    }
}
