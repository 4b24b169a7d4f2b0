//! Symmetric uniformly elliptic coefficient fields `A(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym2_eigen;

type Evaluator = Arc<dyn Fn([f64; 2]) -> Matrix2<f64> + Send + Sync>;

/// Named coefficient families understood by configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientSpec {
    Identity,
    /// `R(angle) diag(lambda1, lambda2) R(angle)ᵗ`.
    ConstantAnisotropic { lambda1: f64, lambda2: f64, angle: f64 },
    /// `I + amplitude · sin(x₁) · [[0, 1], [1, 0]]`.
    SmoothVarying { amplitude: f64 },
    /// `(1 + contrast · tanh(sharpness · sin(πx₁/cell) sin(πx₂/cell))) · I`.
    LipschitzCheckerboardSmoothed { contrast: f64, cell: f64, sharpness: f64 },
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientField> {
        match *self {
            CoefficientSpec::Identity => Ok(CoefficientField::identity()),
            CoefficientSpec::ConstantAnisotropic {
                lambda1,
                lambda2,
                angle,
            } => {
                if !(lambda1 > 0.0 && lambda2 > 0.0) {
                    return Err(Error::InvalidParameter("anisotropic eigenvalues must be positive".into()));
                }
                Ok(CoefficientField::constant_anisotropic(lambda1, lambda2, angle))
            }
            CoefficientSpec::SmoothVarying { amplitude } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::InvalidParameter("smooth-varying amplitude must be below 1".into()));
                }
                Ok(CoefficientField::smooth_varying(amplitude))
            }
            CoefficientSpec::LipschitzCheckerboardSmoothed {
                contrast,
                cell,
                sharpness,
            } => {
                if !(contrast.abs() < 1.0 && cell > 0.0 && sharpness > 0.0) {
                    return Err(Error::InvalidParameter(
                        "checkerboard needs |contrast| < 1, cell > 0, sharpness > 0".into(),
                    ));
                }
                Ok(CoefficientField::smoothed_checkerboard(contrast, cell, sharpness))
            }
        }
    }
}

/// A coefficient field with its declared ellipticity constant θ.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    theta: f64,
    lipschitz: bool,
    constant: bool,
    eval: Evaluator,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("theta", &self.theta)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        theta: f64,
        lipschitz: bool,
        eval: impl Fn([f64; 2]) -> Matrix2<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            theta,
            lipschitz,
            constant: false,
            eval: Arc::new(eval),
        }
    }

    pub fn identity() -> Self {
        Self {
            constant: true,
            ..Self::new("identity", 1.0, true, |_| Matrix2::identity())
        }
    }

    pub fn constant_anisotropic(lambda1: f64, lambda2: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        let m = r * Matrix2::new(lambda1, 0.0, 0.0, lambda2) * r.transpose();
        let m = 0.5 * (m + m.transpose());
        let lo = lambda1.min(lambda2);
        let hi = lambda1.max(lambda2);
        Self {
            constant: true,
            ..Self::new(
                format!("constant-anisotropic({lambda1}, {lambda2}, {angle})"),
                hi.max(1.0 / lo),
                true,
                move |_| m,
            )
        }
    }

    pub fn smooth_varying(amplitude: f64) -> Self {
        Self::new(
            format!("smooth-varying({amplitude})"),
            1.0 / (1.0 - amplitude.abs()),
            true,
            move |x| {
                let o = amplitude * x[0].sin();
                Matrix2::new(1.0, o, o, 1.0)
            },
        )
    }

    pub fn smoothed_checkerboard(contrast: f64, cell: f64, sharpness: f64) -> Self {
        let k = std::f64::consts::PI / cell;
        Self::new(
            format!("lipschitz-checkerboard-smoothed({contrast}, {cell}, {sharpness})"),
            1.0 / (1.0 - contrast.abs()),
            true,
            move |x| {
                let s = (sharpness * (k * x[0]).sin() * (k * x[1]).sin()).tanh();
                Matrix2::identity() * (1.0 + contrast * s)
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared ellipticity constant θ ≥ 1.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_lipschitz(&self) -> bool {
        self.lipschitz
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn eval(&self, x: [f64; 2]) -> Matrix2<f64> {
        (self.eval)(x)
    }
}

/// Outcome of a sampled ellipticity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityCertificate {
    pub theta: f64,
    pub min_quotient: f64,
    pub max_quotient: f64,
    /// Smallest θ consistent with the sampled eigenvalue extrema.
    pub theta_estimate: f64,
    pub samples: usize,
}

/// Checks `θ⁻¹|ξ|² ≤ ξᵗA(x)ξ ≤ θ|ξ|²` and symmetry on random `(x, ξ)` drawn
/// from the box `[lo, hi]`.
pub fn ellipticity_check(
    a: &CoefficientField,
    samples: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    seed: u64,
) -> Result<EllipticityCertificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = a.theta();
    let (mut qmin, mut qmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut emin, mut emax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst: Option<([f64; 2], Vector2<f64>, f64)> = None;
    let mut worst_excess = 0.0;
    for _ in 0..samples {
        let x = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
        let m = a.eval(x);
        if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-14 * m.norm() {
            return Err(Error::InvalidParameter(format!(
                "coefficient {} is not symmetric at ({}, {})",
                a.name(),
                x[0],
                x[1]
            )));
        }
        let (l, _) = sym2_eigen(&m);
        emin = emin.min(l[0]);
        emax = emax.max(l[1]);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let xi = Vector2::new(phi.cos(), phi.sin());
        let q = xi.dot(&(m * xi));
        qmin = qmin.min(q);
        qmax = qmax.max(q);
        let excess = (1.0 / theta - q).max(q - theta);
        if excess > 1e-12 * theta && excess > worst_excess {
            worst_excess = excess;
            worst = Some((x, xi, q));
        }
    }
    if let Some((x, xi, q)) = worst {
        return Err(Error::Ellipticity {
            x0: x[0],
            x1: x[1],
            d0: xi[0],
            d1: xi[1],
            quotient: q,
            lo: 1.0 / theta,
            hi: theta,
        });
    }
    Ok(EllipticityCertificate {
        theta,
        min_quotient: qmin,
        max_quotient: qmax,
        theta_estimate: emax.max(1.0 / emin).max(1.0),
        samples,
    })
}
