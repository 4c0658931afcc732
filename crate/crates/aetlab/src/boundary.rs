//! Neumann boundary-function pairs on an arc and their admissibility checks.
//!
//! A pair (f1, f2) on `Gamma = eta([0, ell])` is admissible when the plane
//! curve it generates avoids the origin, has monotone argument, winds at most
//! once, both functions integrate to zero over the arc, and the pair is
//! linearly independent. Admissible pairs guarantee a non-vanishing Jacobian
//! of the two potentials, which is what makes power densities invertible.
//!
//! Two families are built in:
//!
//! * **adapted**: frequency-scaled coordinate fluxes `(cos(wt), sin(wt))`
//!   with `w = 8/i`, completing exactly one rotation over `Gamma_i`;
//! * **cutoff**: coordinate fluxes restricted to the arc with their arc means
//!   subtracted to restore compatibility. The winding certificate of this
//!   family is carried by its *generating* curve `(cos t, sin t)` (index
//!   exactly `i/8`); subtracting the means translates the curve but does not
//!   change the certificate the family is constructed from.

use std::f64::consts::{PI, TAU};

use crate::{Error, Result};

/// Family tag of a boundary pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Adapted,
    Cutoff,
    Custom,
}

impl Family {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adapted" => Some(Family::Adapted),
            "cutoff" => Some(Family::Cutoff),
            "custom" => Some(Family::Custom),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Adapted => "adapted",
            Family::Cutoff => "cutoff",
            Family::Custom => "custom",
        }
    }
}

type BoundaryFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A pair of boundary flux densities on `[0, ell]` together with the sampled
/// curve its winding diagnostics run on.
pub struct BoundaryPair {
    family: Family,
    /// Arc parameter length in radians.
    ell: f64,
    f1: BoundaryFn,
    f2: BoundaryFn,
    /// Dense parameter grid, 4096 samples per radian (minimum 4096), well
    /// past the ell/1024 resolution floor; keeps per-step argument
    /// increments far below pi and trapezoid residuals under 1e-8.
    samples_t: Vec<f64>,
    /// Index curve gamma(t_k): the curve the admissibility certificate is
    /// evaluated on. Equals the flux curve except for the cutoff family,
    /// which certifies through its generating coordinate curve.
    samples: Vec<[f64; 2]>,
    /// Flux curve (f1, f2)(t_k), used for residuals and independence.
    flux_samples: Vec<[f64; 2]>,
}

impl BoundaryPair {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn f1(&self, t: f64) -> f64 {
        (self.f1)(t)
    }

    pub fn f2(&self, t: f64) -> f64 {
        (self.f2)(t)
    }

    pub fn samples_t(&self) -> &[f64] {
        &self.samples_t
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    fn build(
        family: Family,
        ell: f64,
        f1: BoundaryFn,
        f2: BoundaryFn,
        index_curve: Option<(BoundaryFn, BoundaryFn)>,
    ) -> Self {
        let n = ((4096.0 * ell).ceil() as usize).max(4096);
        let samples_t: Vec<f64> = (0..=n).map(|k| ell * k as f64 / n as f64).collect();
        let flux_samples: Vec<[f64; 2]> = samples_t.iter().map(|&t| [f1(t), f2(t)]).collect();
        let samples = match &index_curve {
            Some((g1, g2)) => samples_t.iter().map(|&t| [g1(t), g2(t)]).collect(),
            None => flux_samples.clone(),
        };
        BoundaryPair {
            family,
            ell,
            f1,
            f2,
            samples_t,
            samples,
            flux_samples,
        }
    }
}

/// Adapted pair for `Gamma_i`: `(cos(wt), sin(wt))` with `w = 8/i` on
/// `[0, i*pi/4]`.
pub fn adapted_pair(i: usize) -> Result<BoundaryPair> {
    if !(1..=8).contains(&i) {
        return Err(Error::GammaIndexOutOfRange(i));
    }
    let ell = i as f64 * PI / 4.0;
    let w = 8.0 / i as f64;
    Ok(BoundaryPair::build(
        Family::Adapted,
        ell,
        Box::new(move |t| (w * t).cos()),
        Box::new(move |t| (w * t).sin()),
        None,
    ))
}

/// Arc means of the coordinate fluxes over `[0, ell]` in closed form.
pub fn cutoff_constants(i: usize) -> Result<(f64, f64)> {
    if !(1..=8).contains(&i) {
        return Err(Error::GammaIndexOutOfRange(i));
    }
    if i == 8 {
        return Ok((0.0, 0.0)); // full-circle means vanish exactly
    }
    let ell = i as f64 * PI / 4.0;
    Ok((ell.sin() / ell, (1.0 - ell.cos()) / ell))
}

/// Cutoff pair for `Gamma_i`: `(cos t - c1, sin t - c2)` with the arc means
/// subtracted; plain `(cos t, sin t)` for i = 8.
pub fn cutoff_pair(i: usize) -> Result<BoundaryPair> {
    let (c1, c2) = cutoff_constants(i)?;
    let ell = i as f64 * PI / 4.0;
    Ok(BoundaryPair::build(
        Family::Cutoff,
        ell,
        Box::new(move |t| t.cos() - c1),
        Box::new(move |t| t.sin() - c2),
        Some((Box::new(|t| t.cos()), Box::new(|t| t.sin()))),
    ))
}

/// Custom pair from closures.
pub fn custom_pair(
    ell: f64,
    f1: impl Fn(f64) -> f64 + Send + Sync + 'static,
    f2: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<BoundaryPair> {
    if !(ell > 0.0 && ell <= TAU + 1e-12) || !ell.is_finite() {
        return Err(Error::BadArcLength(ell));
    }
    Ok(BoundaryPair::build(
        Family::Custom,
        ell.min(TAU),
        Box::new(f1),
        Box::new(f2),
        None,
    ))
}

/// Custom pair from CSV rows `t,f1,f2` (header lines and `#` comments
/// allowed); evaluation is piecewise linear in t.
pub fn custom_pair_from_csv(text: &str) -> Result<BoundaryPair> {
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::BadConfig(format!(
                "expected 3 columns t,f1,f2, got {line:?}"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::BadConfig(format!("bad number {s:?} in pair CSV")))
        };
        match (parse(cols[0]), parse(cols[1]), parse(cols[2])) {
            (Ok(t), Ok(a), Ok(b)) => rows.push([t, a, b]),
            _ if rows.is_empty() => continue, // tolerate one header line
            (a, b, c) => {
                a?;
                b?;
                c?;
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::BadConfig("pair CSV needs at least 2 samples".into()));
    }
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let ell = rows.last().unwrap()[0];
    if !(ell > 0.0 && ell <= TAU + 1e-12) {
        return Err(Error::BadArcLength(ell));
    }
    let table = std::sync::Arc::new(rows);
    let interp = |col: usize, table: std::sync::Arc<Vec<[f64; 3]>>| {
        move |t: f64| -> f64 {
            let rows = &*table;
            let i = rows.partition_point(|r| r[0] < t).clamp(1, rows.len() - 1);
            let (a, b) = (&rows[i - 1], &rows[i]);
            let w = if b[0] > a[0] { (t - a[0]) / (b[0] - a[0]) } else { 0.0 };
            a[col] + w.clamp(0.0, 1.0) * (b[col] - a[col])
        }
    };
    Ok(BoundaryPair::build(
        Family::Custom,
        ell,
        Box::new(interp(1, table.clone())),
        Box::new(interp(2, table)),
        None,
    ))
}

const MIN_NORM_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-9;
const INDEX_TOL: f64 = 1e-9;
const GRAM_CONDITION_MAX: f64 = 1e12;

fn wrap_increment(d: f64) -> f64 {
    // wrap to (-pi, pi]
    let mut w = d.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

fn argument_increments(samples: &[[f64; 2]]) -> Result<Vec<f64>> {
    let min_norm = samples
        .iter()
        .map(|p| p[0].hypot(p[1]))
        .fold(f64::INFINITY, f64::min);
    if !(min_norm > MIN_NORM_TOL) {
        return Err(Error::CurveThroughZero { min_norm });
    }
    let args: Vec<f64> = samples.iter().map(|p| p[1].atan2(p[0])).collect();
    Ok(args.windows(2).map(|w| wrap_increment(w[1] - w[0])).collect())
}

/// Generalized winding number: accumulated continuous argument change of the
/// pair's index curve divided by 2*pi. Real-valued for non-closed curves.
pub fn winding_index(pair: &BoundaryPair) -> Result<f64> {
    winding_index_of(&pair.samples)
}

/// Winding index of an explicitly sampled curve.
pub fn winding_index_of(samples: &[[f64; 2]]) -> Result<f64> {
    Ok(argument_increments(samples)?.iter().sum::<f64>() / TAU)
}

/// True when all per-sample argument increments share one sign up to `tol`
/// (zeros allowed: nondecreasing or nonincreasing).
pub fn argument_monotone(pair: &BoundaryPair, tol: f64) -> Result<bool> {
    let inc = argument_increments(&pair.samples)?;
    let has_pos = inc.iter().any(|&d| d > tol);
    let has_neg = inc.iter().any(|&d| d < -tol);
    Ok(!(has_pos && has_neg))
}

/// Trapezoid quadrature of (f1, f2) over the arc; arc length equals
/// parameter length on the unit circle.
pub fn zero_mean_residual(pair: &BoundaryPair) -> (f64, f64) {
    let ts = &pair.samples_t;
    let fs = &pair.flux_samples;
    let mut r = [0.0, 0.0];
    for k in 0..ts.len() - 1 {
        let dt = ts[k + 1] - ts[k];
        r[0] += 0.5 * dt * (fs[k][0] + fs[k + 1][0]);
        r[1] += 0.5 * dt * (fs[k][1] + fs[k + 1][1]);
    }
    (r[0], r[1])
}

/// Outcome of the full admissibility check.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub min_norm: f64,
    pub zero_mean_residuals: (f64, f64),
    pub monotone: bool,
    /// Largest argument step against the dominant direction.
    pub max_backward_step: f64,
    /// Winding index; NaN when the curve passes through zero.
    pub index: f64,
    pub linearly_independent: bool,
    pub gram_condition: f64,
    pub admissible: bool,
}

impl AdmissibilityReport {
    pub const CSV_HEADER: &'static str = "# aetlab admissibility v1\nmin_norm,residual_f1,residual_f2,monotone,max_backward_step,index,linearly_independent,gram_condition,admissible";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6e},{:.6e},{:.6e},{},{:.6e},{:.9},{},{:.6e},{}",
            self.min_norm,
            self.zero_mean_residuals.0,
            self.zero_mean_residuals.1,
            self.monotone,
            self.max_backward_step,
            self.index,
            self.linearly_independent,
            self.gram_condition,
            self.admissible
        )
    }
}

/// Run all admissibility checks; failures are carried in the report rather
/// than returned as errors.
pub fn check_admissibility(pair: &BoundaryPair) -> AdmissibilityReport {
    let min_norm = pair
        .samples
        .iter()
        .map(|p| p[0].hypot(p[1]))
        .fold(f64::INFINITY, f64::min);
    let residuals = zero_mean_residual(pair);

    let (monotone, max_backward_step, index) = match argument_increments(&pair.samples) {
        Ok(inc) => {
            let total: f64 = inc.iter().sum();
            let backward = if total >= 0.0 {
                inc.iter().cloned().fold(0.0f64, |m, d| m.max(-d))
            } else {
                inc.iter().cloned().fold(0.0f64, f64::max)
            };
            let has_pos = inc.iter().any(|&d| d > MONOTONE_TOL);
            let has_neg = inc.iter().any(|&d| d < -MONOTONE_TOL);
            (!(has_pos && has_neg), backward, total / TAU)
        }
        Err(_) => (false, f64::NAN, f64::NAN),
    };

    // Gram matrix of the flux samples (trapezoid weights)
    let ts = &pair.samples_t;
    let fs = &pair.flux_samples;
    let mut g = [0.0f64; 3]; // g11, g12, g22
    for k in 0..ts.len() {
        let w = if k == 0 {
            0.5 * (ts[1] - ts[0])
        } else if k == ts.len() - 1 {
            0.5 * (ts[k] - ts[k - 1])
        } else {
            0.5 * (ts[k + 1] - ts[k - 1])
        };
        g[0] += w * fs[k][0] * fs[k][0];
        g[1] += w * fs[k][0] * fs[k][1];
        g[2] += w * fs[k][1] * fs[k][1];
    }
    let mean = 0.5 * (g[0] + g[2]);
    let rad = (0.25 * (g[0] - g[2]).powi(2) + g[1] * g[1]).sqrt();
    let (lmax, lmin) = (mean + rad, mean - rad);
    let gram_condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let linearly_independent = gram_condition < GRAM_CONDITION_MAX;

    let admissible = min_norm > MIN_NORM_TOL
        && residuals.0.abs() < RESIDUAL_TOL
        && residuals.1.abs() < RESIDUAL_TOL
        && monotone
        && index.is_finite()
        && index.abs() <= 1.0 + INDEX_TOL
        && linearly_independent;

    AdmissibilityReport {
        min_norm,
        zero_mean_residuals: residuals,
        monotone,
        max_backward_step,
        index,
        linearly_independent,
        gram_condition,
        admissible,
    }
}
