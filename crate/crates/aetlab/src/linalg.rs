//! Sparse symmetric linear algebra: CSR storage and preconditioned CG.

use crate::{Error, Result};

/// Compressed sparse row matrix assembled from (row, col, value) triplets.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut row = 0usize;
        for (r, c, v) in triplets {
            while row < r {
                row_ptr.push(cols.len());
                row += 1;
            }
            if let (Some(&last_c), true) = (cols.last(), cols.len() > *row_ptr.last().unwrap()) {
                if last_c == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            cols.push(c);
            vals.push(v);
        }
        while row < n {
            row_ptr.push(cols.len());
            row += 1;
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    d[r] = self.vals[k];
                }
            }
        }
        d
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .map(|k| self.vals[k])
            .sum()
    }
}

/// Iteration count and final relative residual of a CG solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subtract_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Jacobi-preconditioned conjugate gradients.
///
/// With `deflate_constants` the solve runs on the mean-zero complement: the
/// residual and preconditioned direction are projected every iteration, which
/// handles the one-dimensional null space of pure-Neumann stiffness matrices.
/// Relative tolerance 1e-10 on the 2-norm residual, iteration cap
/// `20*sqrt(n)`.
pub(crate) fn solve_cg(
    a: &CsrMatrix,
    b: &[f64],
    deflate_constants: bool,
    stage: &'static str,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n;
    let tol = 1e-10;
    let max_it = (20.0 * (n as f64).sqrt()).ceil() as usize;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let mut r = b.to_vec();
    if deflate_constants {
        subtract_mean(&mut r);
    }
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }

    let mut x = vec![0.0; n];
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    if deflate_constants {
        subtract_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    for it in 1..=max_it {
        a.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::SolverDivergence {
                stage,
                iterations: it,
                residual: dot(&r, &r).sqrt() / b_norm,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if deflate_constants {
            subtract_mean(&mut r);
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    rel_residual: res,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        if deflate_constants {
            subtract_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDivergence {
        stage,
        iterations: max_it,
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}
