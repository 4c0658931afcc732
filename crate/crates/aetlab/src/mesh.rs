//! Conforming P1 triangulations of the closed unit disk.
//!
//! The generator is a deterministic concentric-ring construction: ring `j`
//! of `m` sits at radius `j/m` and carries `round(j*N/m)` nodes at uniform
//! angles, where `N` is the boundary node count. Annuli between consecutive
//! rings are triangulated by a two-pointer angular merge, the innermost ring
//! by a fan around the center node. Boundary nodes lie exactly on the unit
//! circle with their parameter `t` stored, so arcs `eta([0, ell])` can be
//! selected without regenerating the mesh.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::{Error, Result};

/// Triangulation of the closed unit disk with a parameterized boundary.
///
/// Immutable after construction; share between threads via [`Arc`].
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Boundary node indices in counterclockwise order, starting at t = 0.
    boundary_loop: Vec<usize>,
    /// Boundary parameter t per entry of `boundary_loop`; eta(t) = (cos t, sin t).
    boundary_t: Vec<f64>,
    /// Signed area per triangle (positive by construction).
    areas: Vec<f64>,
    /// Constant P1 basis gradients per triangle, one 2-vector per vertex.
    grads: Vec<[[f64; 2]; 3]>,
    /// Sum of adjacent triangle areas per node (gradient-recovery weights).
    patch_areas: Vec<f64>,
    is_boundary: Vec<bool>,
    spacing: f64,
}

/// One boundary edge of an arc, with its parameter interval.
#[derive(Debug, Clone, Copy)]
pub struct ArcEdge {
    /// Node indices (start, end) in counterclockwise order.
    pub nodes: [usize; 2],
    /// Full parameter interval of the mesh edge.
    pub t: [f64; 2],
    /// Quadrature upper bound: `min(t[1], ell)`. The mesh edge is kept whole;
    /// integrands are truncated here when the arc ends inside the edge.
    pub t_cut: f64,
    /// Chord length of the full edge.
    pub chord: f64,
}

impl ArcEdge {
    /// Fraction of the edge inside the arc.
    pub fn covered_fraction(&self) -> f64 {
        ((self.t_cut - self.t[0]) / (self.t[1] - self.t[0])).clamp(0.0, 1.0)
    }
}

/// Boundary arc `Gamma = eta([0, ell])` as an ordered list of edges.
#[derive(Debug, Clone)]
pub struct BoundaryArc {
    ell: f64,
    edges: Vec<ArcEdge>,
}

impl BoundaryArc {
    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn edges(&self) -> &[ArcEdge] {
        &self.edges
    }

    /// Total geometric (chord) length of the covered part.
    pub fn length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.chord * e.covered_fraction())
            .sum()
    }

    pub fn is_full_boundary(&self) -> bool {
        self.ell >= TAU - 1e-12
    }
}

impl TriangleMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [usize; 3] {
        self.triangles[i]
    }

    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    pub fn boundary_t(&self) -> &[f64] {
        &self.boundary_t
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    pub fn boundary_node_count(&self) -> usize {
        self.boundary_loop.len()
    }

    /// Target spacing the mesh was built for.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn area(&self, triangle: usize) -> f64 {
        self.areas[triangle]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn patch_area(&self, node: usize) -> f64 {
        self.patch_areas[node]
    }

    /// Area and the three constant P1 basis gradients of a triangle.
    pub fn cell_geometry(&self, triangle: usize) -> (f64, [[f64; 2]; 3]) {
        (self.areas[triangle], self.grads[triangle])
    }

    pub fn centroid(&self, triangle: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[triangle];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Legacy ASCII VTK unstructured grid (POINTS / CELLS type 5 / CELL_TYPES).
    pub fn write_vtk(&self, path: &Path, title: &str) -> Result<()> {
        let mut out = String::new();
        vtk_header(&mut out, title, self);
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}

pub(crate) fn vtk_header(out: &mut String, title: &str, mesh: &TriangleMesh) {
    use std::fmt::Write;
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "{title}").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {} double", mesh.node_count()).unwrap();
    for p in mesh.nodes() {
        writeln!(out, "{:.17} {:.17} 0.0", p[0], p[1]).unwrap();
    }
    writeln!(out, "CELLS {} {}", mesh.triangle_count(), 4 * mesh.triangle_count()).unwrap();
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", mesh.triangle_count()).unwrap();
    for _ in 0..mesh.triangle_count() {
        writeln!(out, "5").unwrap();
    }
}

/// Area and P1 basis gradients of the triangle (p0, p1, p2).
///
/// The gradients sum to zero (partition of unity) and are exact for fields
/// sampled from affine functions.
pub fn tri_geometry(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> (f64, [[f64; 2]; 3]) {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det;
    let inv = 1.0 / det;
    // grad(phi_i) is the inward-scaled normal of the opposite edge.
    let g0 = [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv];
    let g1 = [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv];
    let g2 = [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv];
    (area, [g0, g1, g2])
}

/// Build the concentric-ring disk mesh for a target spacing.
///
/// Boundary nodes sit exactly on the unit circle at uniform parameters; the
/// boundary count is `round(2*pi/h)` rounded to the nearest multiple of 8 so
/// that the arc family `ell_i = i*pi/4` ends exactly on nodes.
pub fn build_disk_mesh(target_h: f64) -> Result<Arc<TriangleMesh>> {
    if !(target_h > 0.0 && target_h < 0.5) || !target_h.is_finite() {
        return Err(Error::BadMeshSpacing(target_h));
    }
    let raw = TAU / target_h;
    let n_boundary = (((raw / 8.0).round() as usize).max(1)) * 8;
    let rings = ((1.0 / target_h).round() as usize).max(1);

    let mut nodes: Vec<[f64; 2]> = Vec::new();
    nodes.push([0.0, 0.0]);
    let mut ring_start = vec![0usize; rings + 1]; // center treated as ring 0
    let mut ring_count = vec![1usize; rings + 1];
    for j in 1..=rings {
        let n_j = if j == rings {
            n_boundary
        } else {
            ((j as f64 * n_boundary as f64 / rings as f64).round() as usize).max(3)
        };
        ring_start[j] = nodes.len();
        ring_count[j] = n_j;
        let r = j as f64 / rings as f64;
        for k in 0..n_j {
            let t = TAU * k as f64 / n_j as f64;
            if j == rings {
                // exact circle points; param stored below reproduces them bitwise
                nodes.push([t.cos(), t.sin()]);
            } else {
                nodes.push([r * t.cos(), r * t.sin()]);
            }
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // center fan
    {
        let n1 = ring_count[1];
        let s1 = ring_start[1];
        for k in 0..n1 {
            triangles.push([0, s1 + k, s1 + (k + 1) % n1]);
        }
    }
    // annuli
    for j in 1..rings {
        let (sa, na) = (ring_start[j], ring_count[j]);
        let (sb, nb) = (ring_start[j + 1], ring_count[j + 1]);
        let mut i = 0usize; // inner pointer
        let mut k = 0usize; // outer pointer
        while i < na || k < nb {
            let a_next = TAU * (i + 1) as f64 / na as f64;
            let b_next = TAU * (k + 1) as f64 / nb as f64;
            let advance_inner = i < na && (k == nb || a_next <= b_next);
            if advance_inner {
                triangles.push([sa + i % na, sb + k % nb, sa + (i + 1) % na]);
                i += 1;
            } else {
                triangles.push([sa + i % na, sb + k % nb, sb + (k + 1) % nb]);
                k += 1;
            }
        }
    }

    let boundary_loop: Vec<usize> =
        (ring_start[rings]..ring_start[rings] + n_boundary).collect();
    let boundary_t: Vec<f64> = (0..n_boundary)
        .map(|k| TAU * k as f64 / n_boundary as f64)
        .collect();

    let mut is_boundary = vec![false; nodes.len()];
    for &b in &boundary_loop {
        is_boundary[b] = true;
    }

    let mut areas = Vec::with_capacity(triangles.len());
    let mut grads = Vec::with_capacity(triangles.len());
    let mut patch_areas = vec![0.0; nodes.len()];
    for (idx, t) in triangles.iter().enumerate() {
        let (area, g) = tri_geometry(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        if !(area > 1e-14) {
            return Err(Error::DegenerateTriangle { index: idx, area });
        }
        for &v in t {
            patch_areas[v] += area;
        }
        areas.push(area);
        grads.push(g);
    }

    let mesh = TriangleMesh {
        nodes,
        triangles,
        boundary_loop,
        boundary_t,
        areas,
        grads,
        patch_areas,
        is_boundary,
        spacing: target_h,
    };
    mesh.check_conforming()?;
    Ok(Arc::new(mesh))
}

impl TriangleMesh {
    /// Every interior edge shared by exactly two triangles, every boundary
    /// edge by exactly one, and the boundary edges form the stored loop.
    fn check_conforming(&self) -> Result<()> {
        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                *edge_use.entry(key).or_insert(0) += 1;
            }
        }
        let n = self.boundary_loop.len();
        let mut boundary_edges = 0usize;
        for (key, uses) in &edge_use {
            match uses {
                1 => {
                    boundary_edges += 1;
                    if !(self.is_boundary[key.0] && self.is_boundary[key.1]) {
                        return Err(Error::BadConfig(format!(
                            "non-boundary nodes on a single-use edge {key:?}"
                        )));
                    }
                }
                2 => {}
                _ => {
                    return Err(Error::BadConfig(format!(
                        "edge {key:?} used by {uses} triangles"
                    )))
                }
            }
        }
        if boundary_edges != n {
            return Err(Error::BadConfig(format!(
                "boundary edge count {boundary_edges} != boundary node count {n}"
            )));
        }
        Ok(())
    }
}

/// Select the arc `eta([0, ell])` of a mesh boundary.
///
/// The returned edges are those whose parameter interval intersects
/// `(0, ell)`; the edge containing `ell` is kept whole and carries `t_cut`
/// for quadrature-time truncation.
pub fn select_arc(mesh: &TriangleMesh, ell: f64) -> Result<BoundaryArc> {
    if !(ell > 0.0 && ell <= TAU + 1e-12) || !ell.is_finite() {
        return Err(Error::BadArcLength(ell));
    }
    let ell = ell.min(TAU);
    let loop_nodes = mesh.boundary_loop();
    let ts = mesh.boundary_t();
    let n = loop_nodes.len();
    let mut edges = Vec::new();
    for k in 0..n {
        let t0 = ts[k];
        let t1 = if k + 1 == n { TAU } else { ts[k + 1] };
        if t0 >= ell - 1e-15 {
            break;
        }
        let a = loop_nodes[k];
        let b = loop_nodes[(k + 1) % n];
        let (pa, pb) = (mesh.node(a), mesh.node(b));
        let chord = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        edges.push(ArcEdge {
            nodes: [a, b],
            t: [t0, t1],
            t_cut: t1.min(ell),
            chord,
        });
    }
    Ok(BoundaryArc { ell, edges })
}

/// The paper's arc family: `Gamma_i = eta([0, i*pi/4])`, i = 1..=8.
pub fn paper_arc(mesh: &TriangleMesh, i: usize) -> Result<BoundaryArc> {
    if !(1..=8).contains(&i) {
        return Err(Error::GammaIndexOutOfRange(i));
    }
    select_arc(mesh, i as f64 * PI / 4.0)
}
