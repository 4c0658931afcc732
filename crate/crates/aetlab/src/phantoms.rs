//! Ground-truth conductivities on the unit disk.
//!
//! Both phantoms take values in [1, 2] and equal 1 near the boundary, so the
//! ellipticity bound lambda = 0.5 of the admissibility theory holds with
//! room to spare.

use std::sync::Arc;

use crate::field::NodalScalarField;
use crate::mesh::TriangleMesh;

/// Phantom identifier as used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomId {
    /// Uniform sigma = 1 (reference / identity-pipeline phantom).
    Identity,
    /// Piecewise constant: three circular inclusions of value 2 on background 1.
    Sigma1,
    /// Smooth radial bump: 2 at the origin decaying to 1 at r = 0.8.
    Sigma2,
}

impl PhantomId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" | "one" => Some(PhantomId::Identity),
            "sigma1" => Some(PhantomId::Sigma1),
            "sigma2" => Some(PhantomId::Sigma2),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhantomId::Identity => "identity",
            PhantomId::Sigma1 => "sigma1",
            PhantomId::Sigma2 => "sigma2",
        }
    }
}

/// Evaluable conductivity phantom.
#[derive(Debug, Clone, Copy)]
pub struct Phantom {
    pub id: PhantomId,
    /// Audit switch: evaluate the smooth bump with its published inner
    /// denominator (1 - 0.8^2), which jumps at r = 0.8, instead of the
    /// smooth variant (0.8^2).
    verbatim_bump: bool,
}

impl Phantom {
    pub fn new(id: PhantomId) -> Self {
        Phantom {
            id,
            verbatim_bump: false,
        }
    }

    pub fn identity() -> Self {
        Self::new(PhantomId::Identity)
    }

    pub fn sigma1() -> Self {
        Self::new(PhantomId::Sigma1)
    }

    pub fn sigma2() -> Self {
        Self::new(PhantomId::Sigma2)
    }

    /// The discontinuous as-published bump variant, for auditing only.
    pub fn sigma2_verbatim() -> Self {
        Phantom {
            id: PhantomId::Sigma2,
            verbatim_bump: true,
        }
    }

    /// Ellipticity bound lambda <= sigma, recorded as 0.5.
    pub fn lambda_bound(&self) -> f64 {
        0.5
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match self.id {
            PhantomId::Identity => 1.0,
            PhantomId::Sigma1 => sigma1(x1, x2),
            PhantomId::Sigma2 => {
                if self.verbatim_bump {
                    sigma2_verbatim(x1, x2)
                } else {
                    sigma2(x1, x2)
                }
            }
        }
    }

    pub fn sample_to_mesh(&self, mesh: &Arc<TriangleMesh>) -> NodalScalarField {
        NodalScalarField::from_fn(mesh.clone(), |x, y| self.eval(x, y))
    }
}

/// Piecewise constant phantom: 2 inside the disks centered at (-1/2, 0)
/// radius 0.3, (0, -1/2) radius 0.1, (1/2, 1/2) radius 0.1; 1 otherwise.
/// Disk boundaries are inclusive.
pub fn sigma1(x1: f64, x2: f64) -> f64 {
    let inside = |cx: f64, cy: f64, r: f64| (x1 - cx).powi(2) + (x2 - cy).powi(2) <= r * r;
    if inside(-0.5, 0.0, 0.3) || inside(0.0, -0.5, 0.1) || inside(0.5, 0.5, 0.1) {
        2.0
    } else {
        1.0
    }
}

/// Smooth bump phantom: 1 + exp(2 - 2/(1 - r^2/0.8^2)) for r < 0.8, else 1.
/// Continuous and smooth across r = 0.8, value 2 at the origin.
pub fn sigma2(x1: f64, x2: f64) -> f64 {
    let r2 = x1 * x1 + x2 * x2;
    let denom = 1.0 - r2 / 0.64;
    if denom <= 0.0 {
        1.0
    } else {
        1.0 + (2.0 - 2.0 / denom).exp()
    }
}

fn sigma2_verbatim(x1: f64, x2: f64) -> f64 {
    let r2 = x1 * x1 + x2 * x2;
    if r2 > 0.64 {
        return 1.0;
    }
    let denom = 1.0 - r2 / 0.36;
    if denom == 0.0 {
        return 1.0;
    }
    1.0 + (2.0 - 2.0 / denom).exp()
}
