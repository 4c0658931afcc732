//! Multiplicative Gaussian noise on power densities and eigenvalue flooring.
//!
//! Each stored entry gets an independent standard-normal nodal field e,
//! normalized in the discrete L2 norm, and the perturbation
//! `H~ = H + (alpha/100) (e/||e||) H` applied pointwise. Symmetry is
//! structural (three stored entries). Variates come from a seeded
//! counter-based generator (splitmix-style mixing + Box-Muller), so results
//! are identical across platforms and independent of evaluation order.

use crate::field::{l2_norm_raw, PowerDensityField};
use crate::{Error, Result};

/// Noise parameters of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    /// Noise level in percent.
    pub alpha: f64,
    pub seed: u64,
    /// Eigenvalue lower bound applied after the perturbation.
    pub floor_l: f64,
    /// Normalize e by the Euclidean nodal norm instead of the mass-matrix
    /// L2 norm.
    pub vector_norm: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            alpha: 0.0,
            seed: 50,
            floor_l: 1e-6,
            vector_norm: false,
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn unit_open(bits: u64) -> f64 {
    // (0, 1]: never zero, so ln() below is finite
    ((bits >> 11) + 1) as f64 / (1u64 << 53) as f64
}

/// Standard normal variate for (seed, stream, counter) via Box-Muller.
pub fn standard_normal(seed: u64, stream: u64, counter: u64) -> f64 {
    let key = mix64(seed ^ mix64(stream.wrapping_mul(0xa076_1d64_78bd_642f)));
    let u1 = unit_open(mix64(key ^ counter.wrapping_mul(2).wrapping_add(1)));
    let u2 = unit_open(mix64(key ^ counter.wrapping_mul(2).wrapping_add(2)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Perturb the three stored entries with independent normalized noise
/// fields. `alpha = 0` returns the input unchanged (bitwise).
pub fn add_noise(h: &PowerDensityField, spec: &NoiseSpec) -> PowerDensityField {
    if spec.alpha == 0.0 {
        return h.clone();
    }
    let mesh = h.mesh().clone();
    let n = h.node_count();
    let mut entries = [h.h11.clone(), h.h12.clone(), h.h22.clone()];
    for (stream, entry) in entries.iter_mut().enumerate() {
        let e: Vec<f64> = (0..n)
            .map(|k| standard_normal(spec.seed, stream as u64, k as u64))
            .collect();
        let norm = if spec.vector_norm {
            e.iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            l2_norm_raw(&mesh, &e)
        };
        let scale = spec.alpha / 100.0 / norm;
        for k in 0..n {
            entry[k] += scale * e[k] * entry[k];
        }
    }
    let [h11, h12, h22] = entries;
    // noisy diagonals may dip below zero; the flooring step restores
    // positive definiteness, so do not clamp here
    let mut out = h.clone();
    out.h11 = h11;
    out.h12 = h12;
    out.h22 = h22;
    out
}

/// Clamp both eigenvalues of every nodal 2x2 matrix to at least `l`,
/// keeping the eigenvectors. Nodes already above the floor are copied
/// verbatim, which makes the operation idempotent.
pub fn eigen_floor(h: &PowerDensityField, l: f64) -> Result<PowerDensityField> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::BadConfig(format!("eigenvalue floor {l} must be positive")));
    }
    let mut out = h.clone();
    for i in 0..h.node_count() {
        let (a, b, c) = (h.h11[i], h.h12[i], h.h22[i]);
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
        let (lo, hi) = (mean - rad, mean + rad);
        if lo >= l && hi >= l {
            continue;
        }
        let (lo_f, hi_f) = (lo.max(l), hi.max(l));
        if rad == 0.0 {
            // isotropic node: any basis works
            out.h11[i] = hi_f.max(lo_f);
            out.h12[i] = 0.0;
            out.h22[i] = hi_f.max(lo_f);
            continue;
        }
        // eigenvector of the larger eigenvalue at angle phi
        let phi = 0.5 * (2.0 * b).atan2(a - c);
        let (cs, sn) = (phi.cos(), phi.sin());
        out.h11[i] = hi_f * cs * cs + lo_f * sn * sn;
        out.h22[i] = hi_f * sn * sn + lo_f * cs * cs;
        out.h12[i] = (hi_f - lo_f) * cs * sn;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NodalScalarField;
    use crate::forward::power_density;
    use crate::mesh::build_disk_mesh;
    use std::sync::Arc;

    fn sample_h(h: f64) -> PowerDensityField {
        let mesh = build_disk_mesh(h).unwrap();
        let sigma = NodalScalarField::from_fn(mesh.clone(), |x, y| 1.0 + 0.5 * (x * x + y * y));
        let u1 = NodalScalarField::from_fn(mesh.clone(), |x, y| x + 0.1 * y * y);
        let u2 = NodalScalarField::from_fn(mesh.clone(), |x, y| y - 0.2 * x * y);
        power_density(&sigma, &u1, &u2)
    }

    #[test]
    fn alpha_zero_is_identity() {
        let h = sample_h(0.2);
        let spec = NoiseSpec::default();
        let out = add_noise(&h, &spec);
        assert_eq!(h.h11, out.h11);
        assert_eq!(h.h12, out.h12);
        assert_eq!(h.h22, out.h22);
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let h = sample_h(0.2);
        let spec = NoiseSpec {
            alpha: 5.0,
            ..Default::default()
        };
        let a = add_noise(&h, &spec);
        let b = add_noise(&h, &spec);
        assert_eq!(a.h11, b.h11);
        assert_eq!(a.h12, b.h12);
        assert_eq!(a.h22, b.h22);
        let other = add_noise(
            &h,
            &NoiseSpec {
                seed: 51,
                ..spec
            },
        );
        assert_ne!(a.h11, other.h11);
    }

    #[test]
    fn perturbation_magnitude_matches_drawn_noise() {
        // recompute the drawn noise and verify the update formula entrywise
        let h = sample_h(0.15);
        let mesh = h.mesh().clone();
        let spec = NoiseSpec {
            alpha: 5.0,
            ..Default::default()
        };
        let out = add_noise(&h, &spec);
        for (stream, (orig, noisy)) in [(&h.h11, &out.h11), (&h.h12, &out.h12), (&h.h22, &out.h22)]
            .into_iter()
            .enumerate()
        {
            let e: Vec<f64> = (0..h.node_count())
                .map(|k| standard_normal(spec.seed, stream as u64, k as u64))
                .collect();
            let norm = crate::field::l2_norm_raw(&mesh, &e);
            for k in 0..h.node_count() {
                let expect = orig[k] * (1.0 + spec.alpha / 100.0 * e[k] / norm);
                assert!((noisy[k] - expect).abs() < 1e-15 * expect.abs().max(1.0));
            }
            // aggregate perturbation obeys ||diff|| <= (alpha/100) max|H| |||e|||/||e||
            let diff: Vec<f64> = (0..h.node_count()).map(|k| noisy[k] - orig[k]).collect();
            let abs_e: Vec<f64> = e.iter().map(|v| v.abs()).collect();
            let max_h = orig.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
            let lhs = crate::field::l2_norm_raw(&mesh, &diff);
            let rhs =
                spec.alpha / 100.0 * max_h * crate::field::l2_norm_raw(&mesh, &abs_e) / norm;
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }

    #[test]
    fn noise_mean_is_unbiased_over_seeds() {
        let h = sample_h(0.35);
        let n = h.node_count();
        let seeds = 240usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for s in 0..seeds {
            let out = add_noise(
                &h,
                &NoiseSpec {
                    alpha: 5.0,
                    seed: 1000 + s as u64,
                    ..Default::default()
                },
            );
            for k in 0..n {
                for (a, b) in [(&out.h11, &h.h11), (&out.h12, &h.h12), (&out.h22, &h.h22)] {
                    let d = a[k] - b[k];
                    sum += d;
                    sumsq += d * d;
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        let var = (sumsq / count as f64 - mean * mean).max(0.0);
        let se = (var / count as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * se,
            "biased noise: mean {mean:.3e} vs 3 SE {:.3e}",
            3.0 * se
        );
    }

    #[test]
    fn floor_clamps_small_eigenvalue() {
        let mesh = build_disk_mesh(0.4).unwrap();
        let n = mesh.node_count();
        let h = PowerDensityField::new(
            Arc::clone(&mesh),
            vec![2.0; n],
            vec![0.0; n],
            vec![1e-9; n],
        );
        let f = eigen_floor(&h, 1e-6).unwrap();
        for i in 0..n {
            assert!((f.h11[i] - 2.0).abs() < 1e-15);
            assert!((f.h22[i] - 1e-6).abs() < 1e-21);
            assert_eq!(f.h12[i], 0.0);
        }
    }

    #[test]
    fn floor_keeps_healthy_nodes_bitwise() {
        let h = sample_h(0.3);
        let f = eigen_floor(&h, 1e-6).unwrap();
        let mut copied = 0usize;
        for i in 0..h.node_count() {
            let mean = 0.5 * (h.h11[i] + h.h22[i]);
            let rad = (0.25 * (h.h11[i] - h.h22[i]).powi(2) + h.h12[i] * h.h12[i]).sqrt();
            if mean - rad >= 1e-6 {
                assert_eq!(h.h11[i], f.h11[i]);
                assert_eq!(h.h12[i], f.h12[i]);
                assert_eq!(h.h22[i], f.h22[i]);
                copied += 1;
            }
        }
        assert!(copied > 0);
    }

    #[test]
    fn floor_of_antidiagonal_matrix() {
        // [[0, a], [a, 0]] has eigenvalues (a, -a)
        let mesh = build_disk_mesh(0.45).unwrap();
        let n = mesh.node_count();
        let a = 1e-3;
        let h = PowerDensityField::new(
            Arc::clone(&mesh),
            vec![0.0; n],
            vec![a; n],
            vec![0.0; n],
        );
        let f = eigen_floor(&h, 1e-6).unwrap();
        for i in 0..n {
            let trace = f.h11[i] + f.h22[i];
            assert!((trace - (a + 1e-6)).abs() < 1e-18, "trace {trace}");
            let mean = 0.5 * trace;
            let rad = (0.25 * (f.h11[i] - f.h22[i]).powi(2) + f.h12[i] * f.h12[i]).sqrt();
            assert!((mean + rad - a).abs() < 1e-18);
            assert!((mean - rad - 1e-6).abs() < 1e-18);
        }
    }

    #[test]
    fn floor_is_idempotent_and_bounds_hold() {
        let h = sample_h(0.25);
        let noisy = add_noise(
            &h,
            &NoiseSpec {
                alpha: 50.0,
                ..Default::default()
            },
        );
        let l = 1e-6;
        let once = eigen_floor(&noisy, l).unwrap();
        let twice = eigen_floor(&once, l).unwrap();
        for i in 0..h.node_count() {
            assert!((once.h11[i] - twice.h11[i]).abs() < 1e-14);
            assert!((once.h12[i] - twice.h12[i]).abs() < 1e-14);
            assert!((once.h22[i] - twice.h22[i]).abs() < 1e-14);
        }
        assert!(once.min_eigenvalue() >= l - 1e-14);
        let det = once.det();
        for (i, &d) in det.values().iter().enumerate() {
            let trace = once.h11[i] + once.h22[i];
            assert!(d >= l * l - 1e-12 * trace, "node {i}: det {d}");
        }
    }
}
