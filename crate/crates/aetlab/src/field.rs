//! Finite-element field containers and calculus on disk meshes.
//!
//! Everything here is lowest-order: P1 nodal scalars, per-cell constant
//! vectors, area-weighted recovery back to nodes, barycentric cross-mesh
//! interpolation, weak divergence loads, and a Dirichlet Poisson solver.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::linalg::{solve_cg, CsrMatrix};
pub use crate::linalg::SolveStats;
use crate::mesh::TriangleMesh;
use crate::{Error, Result};

/// One real value per mesh node.
#[derive(Debug, Clone)]
pub struct NodalScalarField {
    mesh: Arc<TriangleMesh>,
    values: Vec<f64>,
}

/// One 2-vector per mesh node.
#[derive(Debug, Clone)]
pub struct NodalVectorField {
    mesh: Arc<TriangleMesh>,
    values: Vec<[f64; 2]>,
}

/// One constant 2-vector per triangle.
#[derive(Debug, Clone)]
pub struct CellVectorField {
    mesh: Arc<TriangleMesh>,
    values: Vec<[f64; 2]>,
}

/// One real value per triangle.
#[derive(Debug, Clone)]
pub struct CellScalarField {
    mesh: Arc<TriangleMesh>,
    values: Vec<f64>,
}

/// Symmetric 2x2 power-density matrix per node, stored as three entries.
#[derive(Debug, Clone)]
pub struct PowerDensityField {
    mesh: Arc<TriangleMesh>,
    pub h11: Vec<f64>,
    pub h12: Vec<f64>,
    pub h22: Vec<f64>,
}

macro_rules! field_common {
    ($ty:ident, $val:ty, $count:ident) => {
        impl $ty {
            pub fn new(mesh: Arc<TriangleMesh>, values: Vec<$val>) -> Self {
                assert_eq!(values.len(), mesh.$count(), "value count mismatch");
                let f = Self { mesh, values };
                f.assert_finite();
                f
            }

            pub fn zeros(mesh: Arc<TriangleMesh>) -> Self {
                let n = mesh.$count();
                Self {
                    mesh,
                    values: vec![Default::default(); n],
                }
            }

            pub fn mesh(&self) -> &Arc<TriangleMesh> {
                &self.mesh
            }

            pub fn values(&self) -> &[$val] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [$val] {
                &mut self.values
            }
        }
    };
}

field_common!(NodalScalarField, f64, node_count);
field_common!(NodalVectorField, [f64; 2], node_count);
field_common!(CellVectorField, [f64; 2], triangle_count);
field_common!(CellScalarField, f64, triangle_count);

impl NodalScalarField {
    fn assert_finite(&self) {
        assert!(
            self.values.iter().all(|v| v.is_finite()),
            "non-finite nodal value"
        );
    }

    pub fn from_fn(mesh: Arc<TriangleMesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|p| f(p[0], p[1])).collect();
        Self::new(mesh, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.mesh.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

impl NodalVectorField {
    fn assert_finite(&self) {
        assert!(
            self.values.iter().all(|v| v[0].is_finite() && v[1].is_finite()),
            "non-finite nodal vector"
        );
    }
}

impl CellVectorField {
    fn assert_finite(&self) {
        assert!(
            self.values.iter().all(|v| v[0].is_finite() && v[1].is_finite()),
            "non-finite cell vector"
        );
    }

    /// Cell L2 norm: sqrt(sum of area * |v|^2).
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.mesh.area(i) * (v[0] * v[0] + v[1] * v[1]))
            .sum::<f64>()
            .sqrt()
    }
}

impl CellScalarField {
    fn assert_finite(&self) {
        assert!(self.values.iter().all(|v| v.is_finite()), "non-finite cell value");
    }
}

impl PowerDensityField {
    /// Negative diagonal entries (round-off, or sliver extrapolation during
    /// cross-mesh transfer) are clamped to zero; anything large relative to
    /// the field scale is a caller bug.
    pub fn new(mesh: Arc<TriangleMesh>, h11: Vec<f64>, h12: Vec<f64>, h22: Vec<f64>) -> Self {
        let n = mesh.node_count();
        assert!(h11.len() == n && h12.len() == n && h22.len() == n);
        let scale = h11
            .iter()
            .chain(&h22)
            .fold(1e-30f64, |m, &v| m.max(v.abs()));
        let clamp = move |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|x| {
                    debug_assert!(
                        x > -1e-3 * scale,
                        "diagonal power density {x} too negative for scale {scale}"
                    );
                    x.max(0.0)
                })
                .collect()
        };
        let f = Self {
            mesh,
            h11: clamp(h11),
            h12,
            h22: clamp(h22),
        };
        assert!(
            f.h11.iter().chain(&f.h12).chain(&f.h22).all(|v| v.is_finite()),
            "non-finite power density"
        );
        f
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn node_count(&self) -> usize {
        self.h11.len()
    }

    /// det H per node.
    pub fn det(&self) -> NodalScalarField {
        let values = (0..self.node_count())
            .map(|i| self.h11[i] * self.h22[i] - self.h12[i] * self.h12[i])
            .collect();
        NodalScalarField::new(self.mesh.clone(), values)
    }

    /// Smaller eigenvalue of the nodal 2x2 matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.node_count())
            .map(|i| {
                let mean = 0.5 * (self.h11[i] + self.h22[i]);
                let rad = (0.25 * (self.h11[i] - self.h22[i]).powi(2)
                    + self.h12[i] * self.h12[i])
                    .sqrt();
                mean - rad
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-triangle constant gradient of a P1 nodal field.
pub fn cell_gradient(f: &NodalScalarField) -> CellVectorField {
    let mesh = f.mesh().clone();
    let vals = f.values();
    let values = (0..mesh.triangle_count())
        .map(|i| {
            let (_, g) = mesh.cell_geometry(i);
            let t = mesh.triangle(i);
            let mut v = [0.0, 0.0];
            for k in 0..3 {
                v[0] += vals[t[k]] * g[k][0];
                v[1] += vals[t[k]] * g[k][1];
            }
            v
        })
        .collect();
    CellVectorField::new(mesh, values)
}

/// Area-weighted average of adjacent cell values at each node.
pub fn recover_to_nodes(g: &CellVectorField) -> NodalVectorField {
    let mesh = g.mesh().clone();
    let mut acc = vec![[0.0, 0.0]; mesh.node_count()];
    for i in 0..mesh.triangle_count() {
        let a = mesh.area(i);
        let v = g.values()[i];
        for &node in &mesh.triangle(i) {
            acc[node][0] += a * v[0];
            acc[node][1] += a * v[1];
        }
    }
    for (node, v) in acc.iter_mut().enumerate() {
        let w = mesh.patch_area(node);
        v[0] /= w;
        v[1] /= w;
    }
    NodalVectorField::new(mesh, acc)
}

// ---------------------------------------------------------------------------
// Point location and interpolation
// ---------------------------------------------------------------------------

/// Uniform background-grid point locator for one mesh.
pub struct PointLocator {
    mesh: Arc<TriangleMesh>,
    cell: f64,
    dims: usize,
    buckets: Vec<Vec<u32>>,
}

impl PointLocator {
    pub fn new(mesh: Arc<TriangleMesh>) -> Self {
        let h = mesh.spacing();
        let cell = (2.0 * h).max(1e-3);
        let dims = ((2.0 / cell).ceil() as usize).max(1);
        let cell = 2.0 / dims as f64;
        let mut buckets = vec![Vec::new(); dims * dims];
        let clampi = |v: f64| -> usize { (v.max(0.0) as usize).min(dims - 1) };
        for i in 0..mesh.triangle_count() {
            let t = mesh.triangle(i);
            let xs = t.map(|v| mesh.node(v)[0]);
            let ys = t.map(|v| mesh.node(v)[1]);
            let (x0, x1) = (xs.iter().cloned().fold(f64::MAX, f64::min), xs.iter().cloned().fold(f64::MIN, f64::max));
            let (y0, y1) = (ys.iter().cloned().fold(f64::MAX, f64::min), ys.iter().cloned().fold(f64::MIN, f64::max));
            let (ix0, ix1) = (clampi((x0 + 1.0) / cell), clampi((x1 + 1.0) / cell));
            let (iy0, iy1) = (clampi((y0 + 1.0) / cell), clampi((y1 + 1.0) / cell));
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    buckets[iy * dims + ix].push(i as u32);
                }
            }
        }
        PointLocator {
            mesh,
            cell,
            dims,
            buckets,
        }
    }

    fn barycentric(&self, tri: usize, x: f64, y: f64) -> [f64; 3] {
        let t = self.mesh.triangle(tri);
        let (p0, p1, p2) = (self.mesh.node(t[0]), self.mesh.node(t[1]), self.mesh.node(t[2]));
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((x - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (y - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (y - p0[1]) - (x - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Containing triangle and barycentric coordinates; points in the
    /// boundary sliver snap to the nearest triangle. Errors past 2h.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, [f64; 3])> {
        let dims = self.dims;
        let ix = (((x + 1.0) / self.cell).floor() as i64).clamp(0, dims as i64 - 1) as usize;
        let iy = (((y + 1.0) / self.cell).floor() as i64).clamp(0, dims as i64 - 1) as usize;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        let max_ring = ((2.0 * self.mesh.spacing() / self.cell).ceil() as i64) + 1;
        for ring in 0..=max_ring {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue; // ring shell only
                    }
                    let (bx, by) = (ix as i64 + dx, iy as i64 + dy);
                    if bx < 0 || by < 0 || bx >= dims as i64 || by >= dims as i64 {
                        continue;
                    }
                    for &tri in &self.buckets[by as usize * dims + bx as usize] {
                        let l = self.barycentric(tri as usize, x, y);
                        let min_l = l[0].min(l[1]).min(l[2]);
                        if min_l >= -1e-12 {
                            return Ok((tri as usize, l));
                        }
                        if best.map_or(true, |(_, _, b)| min_l > b) {
                            best = Some((tri as usize, l, min_l));
                        }
                    }
                }
            }
            // containment failed in the home bucket; widen once for slivers,
            // then give up via the snap path below
            if ring >= 1 && best.is_some() {
                break;
            }
        }
        let (tri, l, _) = best.ok_or(Error::PointLocation { x, y })?;
        // snap to the nearest triangle but keep the unclamped barycentrics:
        // evaluation is then the triangle's affine extension, which stays
        // exact for affine fields across the boundary sliver
        let lc = [l[0].max(0.0), l[1].max(0.0), l[2].max(0.0)];
        let s = lc[0] + lc[1] + lc[2];
        let lc = [lc[0] / s, lc[1] / s, lc[2] / s];
        let t = self.mesh.triangle(tri);
        let (p0, p1, p2) = (self.mesh.node(t[0]), self.mesh.node(t[1]), self.mesh.node(t[2]));
        let px = lc[0] * p0[0] + lc[1] * p1[0] + lc[2] * p2[0];
        let py = lc[0] * p0[1] + lc[1] * p1[1] + lc[2] * p2[1];
        let dist = ((x - px).powi(2) + (y - py).powi(2)).sqrt();
        if dist > 2.0 * self.mesh.spacing() {
            return Err(Error::PointLocation { x, y });
        }
        Ok((tri, l))
    }

    pub fn eval_scalar(&self, f: &NodalScalarField, x: f64, y: f64) -> Result<f64> {
        let (tri, l) = self.locate(x, y)?;
        let t = self.mesh.triangle(tri);
        Ok(l[0] * f.values()[t[0]] + l[1] * f.values()[t[1]] + l[2] * f.values()[t[2]])
    }

    pub fn eval_vector(&self, f: &NodalVectorField, x: f64, y: f64) -> Result<[f64; 2]> {
        let (tri, l) = self.locate(x, y)?;
        let t = self.mesh.triangle(tri);
        let v = f.values();
        Ok([
            l[0] * v[t[0]][0] + l[1] * v[t[1]][0] + l[2] * v[t[2]][0],
            l[0] * v[t[0]][1] + l[1] * v[t[1]][1] + l[2] * v[t[2]][1],
        ])
    }
}

/// Barycentric interpolation of a nodal field onto another mesh.
pub fn interpolate(
    f: &NodalScalarField,
    target: &Arc<TriangleMesh>,
) -> Result<NodalScalarField> {
    let locator = PointLocator::new(f.mesh().clone());
    interpolate_with(&locator, f, target)
}

/// Interpolation reusing a prebuilt locator on the source mesh.
pub fn interpolate_with(
    locator: &PointLocator,
    f: &NodalScalarField,
    target: &Arc<TriangleMesh>,
) -> Result<NodalScalarField> {
    let mut values = Vec::with_capacity(target.node_count());
    for p in target.nodes() {
        values.push(locator.eval_scalar(f, p[0], p[1])?);
    }
    Ok(NodalScalarField::new(target.clone(), values))
}

// ---------------------------------------------------------------------------
// Weak operators and solves
// ---------------------------------------------------------------------------

/// Stiffness matrix with a per-cell coefficient: A[v][w] = sum over cells of
/// coeff * area * grad(phi_v).grad(phi_w).
pub(crate) fn stiffness_csr(mesh: &TriangleMesh, cell_coeff: impl Fn(usize) -> f64) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangle_count());
    for i in 0..mesh.triangle_count() {
        let (area, g) = mesh.cell_geometry(i);
        let t = mesh.triangle(i);
        let c = cell_coeff(i) * area;
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((t[a], t[b], c * (g[a][0] * g[b][0] + g[a][1] * g[b][1])));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.node_count(), triplets)
}

/// Weak divergence: entry for node v is -int(g . grad(phi_v)) dx, so a
/// Poisson solve against it needs no second differentiation of `g`.
pub fn weak_divergence_load(g: &CellVectorField) -> Vec<f64> {
    let mesh = g.mesh();
    let mut load = vec![0.0; mesh.node_count()];
    for i in 0..mesh.triangle_count() {
        let (area, grads) = mesh.cell_geometry(i);
        let t = mesh.triangle(i);
        let v = g.values()[i];
        for k in 0..3 {
            load[t[k]] -= area * (v[0] * grads[k][0] + v[1] * grads[k][1]);
        }
    }
    load
}

/// Solve the Poisson problem `laplace(u) = f` with Dirichlet data, where
/// `load` is the weak form of `f` (e.g. from [`weak_divergence_load`]) and
/// `boundary_values` holds one value per node of the boundary loop.
///
/// Galerkin with boundary rows eliminated; the reduced SPD system is solved
/// by Jacobi-preconditioned CG to relative residual 1e-10.
pub fn solve_dirichlet_poisson(
    mesh: &Arc<TriangleMesh>,
    load: &[f64],
    boundary_values: &[f64],
) -> Result<(NodalScalarField, SolveStats)> {
    assert_eq!(load.len(), mesh.node_count());
    assert_eq!(boundary_values.len(), mesh.boundary_node_count());
    assert!(boundary_values.iter().all(|v| v.is_finite()));

    let a = stiffness_csr(mesh, |_| 1.0);
    let n = mesh.node_count();
    let mut fixed = vec![f64::NAN; n];
    for (&node, &v) in mesh.boundary_loop().iter().zip(boundary_values) {
        fixed[node] = v;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| fixed[i].is_nan()).collect();
    let mut reduced_index = vec![usize::MAX; n];
    for (k, &i) in interior.iter().enumerate() {
        reduced_index[i] = k;
    }

    // A u = -load on interior rows, boundary columns moved to the right side
    let mut rhs = vec![0.0; interior.len()];
    let mut triplets = Vec::new();
    for (k, &i) in interior.iter().enumerate() {
        rhs[k] = -load[i];
        for idx in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.cols[idx];
            if reduced_index[j] != usize::MAX {
                triplets.push((k, reduced_index[j], a.vals[idx]));
            } else {
                rhs[k] -= a.vals[idx] * fixed[j];
            }
        }
    }
    let a_red = CsrMatrix::from_triplets(interior.len(), triplets);
    let (x, stats) = solve_cg(&a_red, &rhs, false, "dirichlet poisson")?;

    let mut values = fixed;
    for (k, &i) in interior.iter().enumerate() {
        values[i] = x[k];
    }
    Ok((NodalScalarField::new(mesh.clone(), values), stats))
}

// ---------------------------------------------------------------------------
// Norms, transforms, errors
// ---------------------------------------------------------------------------

/// Bi-symmetric logarithm: sign(x) * log(1 + |x/C|).
pub fn log_sym(x: f64, c: f64) -> f64 {
    assert!(c > 0.0);
    x.signum() * (1.0 + (x / c).abs()).ln()
}

/// L2(Omega) norm via the P1 consistent mass matrix.
pub fn l2_norm(f: &NodalScalarField) -> f64 {
    let mesh = f.mesh();
    let v = f.values();
    let mut acc = 0.0;
    for i in 0..mesh.triangle_count() {
        let t = mesh.triangle(i);
        let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
        acc += mesh.area(i) / 6.0 * (a * a + b * b + c * c + a * b + a * c + b * c);
    }
    acc.sqrt()
}

/// Same quadrature for a raw nodal vector (used by the noise normalization).
pub(crate) fn l2_norm_raw(mesh: &TriangleMesh, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..mesh.triangle_count() {
        let t = mesh.triangle(i);
        let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
        acc += mesh.area(i) / 6.0 * (a * a + b * b + c * c + a * b + a * c + b * c);
    }
    acc.sqrt()
}

/// Relative L2 error in percent: 100 * ||rec - truth|| / ||truth||.
pub fn relative_l2_error(rec: &NodalScalarField, truth: &NodalScalarField) -> Result<f64> {
    if rec.mesh().node_count() != truth.mesh().node_count() {
        return Err(Error::MeshMismatch);
    }
    let denom = l2_norm(truth);
    if denom == 0.0 {
        return Err(Error::ZeroNormTruth);
    }
    let diff = NodalScalarField::new(
        truth.mesh().clone(),
        rec.values()
            .iter()
            .zip(truth.values())
            .map(|(r, t)| r - t)
            .collect(),
    );
    Ok(100.0 * l2_norm(&diff) / denom)
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Legacy ASCII VTK with named nodal scalars as POINT_DATA.
pub fn write_scalar_vtk(
    path: &Path,
    mesh: &TriangleMesh,
    title: &str,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    crate::mesh::vtk_header(&mut out, title, mesh);
    writeln!(out, "POINT_DATA {}", mesh.node_count()).unwrap();
    for (name, vals) in fields {
        assert_eq!(vals.len(), mesh.node_count());
        writeln!(out, "SCALARS {name} double 1").unwrap();
        writeln!(out, "LOOKUP_TABLE default").unwrap();
        for v in *vals {
            writeln!(out, "{v:.17}").unwrap();
        }
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// CSV rows of (node_index, x, y, value...) per node.
pub fn write_csv(
    path: &Path,
    mesh: &TriangleMesh,
    header: &str,
    columns: &[&[f64]],
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "{header}").unwrap();
    for (i, p) in mesh.nodes().iter().enumerate() {
        write!(out, "{i},{:.17},{:.17}", p[0], p[1]).unwrap();
        for col in columns {
            write!(out, ",{:.17}", col[i]).unwrap();
        }
        writeln!(out).unwrap();
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(out.as_bytes())?;
    Ok(())
}
