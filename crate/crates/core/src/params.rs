//! Uncertain model parameters and their Galerkin projections.
//!
//! Every scalar input has the linear form c(θ) = c̄(1 + λθ) with θ uniform on
//! [-1, 1]. The constant matrices (D_hk, d_h) are built once per run; the
//! state-dependent ones (s_hk, p_hk^{ij}) are evaluated per particle.

use serde::{Deserialize, Serialize};

use crate::basis::{ChaosVector, NodalBasis};
use crate::error::{Error, Result};

/// c(θ) = mean·(1 + rel·θ), non-negative on the whole support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertainScalar {
    mean: f64,
    rel: f64,
}

impl UncertainScalar {
    pub fn new(mean: f64, rel: f64) -> Result<Self> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mean value must be finite and non-negative, got {mean}"
            )));
        }
        if !(0.0..=1.0).contains(&rel) {
            return Err(Error::InvalidParameter(format!(
                "relative perturbation must lie in [0, 1], got {rel}"
            )));
        }
        Ok(Self { mean, rel })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn rel(&self) -> f64 {
        self.rel
    }

    #[inline]
    pub fn at(&self, theta: f64) -> f64 {
        self.mean * (1.0 + self.rel * theta)
    }

    pub fn is_deterministic(&self) -> bool {
        self.rel == 0.0 || self.mean == 0.0
    }
}

/// Interaction function P(θ, x, x*).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// P ≡ 1: all-to-all alignment.
    Homogeneous,
    /// (1/Δx)·1[x and x* share a cell]; cells are [origin + kΔx, origin + (k+1)Δx).
    LocalizedCell { width: f64, origin: f64 },
    /// H / (1 + |x − x*|²)^γ.
    CuckerSmale { strength: f64, exponent: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Homogeneous => Ok(()),
            KernelSpec::LocalizedCell { width, origin } => {
                if !(width > 0.0 && width.is_finite() && origin.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "cell width must be positive, got {width}"
                    )));
                }
                Ok(())
            }
            KernelSpec::CuckerSmale { strength, exponent } => {
                if !(strength >= 0.0 && exponent >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Cucker-Smale kernel needs H >= 0 and gamma >= 0, got H={strength}, gamma={exponent}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, KernelSpec::Homogeneous)
    }

    /// Kernel value for two positions. With a `period`, distances use the
    /// minimum image and cells are taken modulo the period.
    #[inline]
    pub fn eval(&self, xi: f64, xj: f64, period: Option<f64>) -> f64 {
        match *self {
            KernelSpec::Homogeneous => 1.0,
            KernelSpec::LocalizedCell { width, origin } => {
                let (a, b) = match period {
                    Some(l) => (wrap(xi - origin, l), wrap(xj - origin, l)),
                    None => (xi - origin, xj - origin),
                };
                if (a / width).floor() == (b / width).floor() {
                    1.0 / width
                } else {
                    0.0
                }
            }
            KernelSpec::CuckerSmale { strength, exponent } => {
                let mut d = xi - xj;
                if let Some(l) = period {
                    d -= l * (d / l).round();
                }
                strength * (-exponent * (d * d).ln_1p()).exp()
            }
        }
    }
}

/// Reduces `x` into [0, period).
#[inline]
pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can round up to exactly `period`
    if r >= period {
        0.0
    } else {
        r
    }
}

/// D_hk = E[D(θ) Φ_h Φ_k]; exact for the linear D(θ) once the rule has M + 1 nodes.
pub fn diffusion_matrix(diffusion: &UncertainScalar, table: &NodalBasis) -> Vec<Vec<f64>> {
    let nodal: Vec<f64> = table.rule().nodes().iter().map(|&t| diffusion.at(t)).collect();
    table.weighted_gram(&nodal)
}

/// d_h = E[√(2D(θ)) Φ_h].
pub fn noise_projection(diffusion: &UncertainScalar, table: &NodalBasis) -> Result<ChaosVector> {
    let mut nodal = Vec::with_capacity(table.nodes());
    for &t in table.rule().nodes() {
        let d = diffusion.at(t);
        if d < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "diffusion is negative ({d}) at node {t}"
            )));
        }
        nodal.push((2.0 * d).sqrt());
    }
    let mut out = vec![0.0; table.modes()];
    table.project_nodal(&nodal, &mut out);
    Ok(ChaosVector(out))
}

fn require_nodes(table: &NodalBasis) -> Result<()> {
    let need = 2 * table.modes();
    if table.nodes() < need {
        return Err(Error::InsufficientQuadrature {
            have: table.nodes(),
            need,
        });
    }
    Ok(())
}

/// s_hk(v) = E[α(θ)(1 − v(θ)²) Φ_h Φ_k] for a particle's velocity modes.
pub fn selfprop_coeffs(
    alpha: &UncertainScalar,
    velocity: &ChaosVector,
    table: &NodalBasis,
) -> Result<Vec<Vec<f64>>> {
    require_nodes(table)?;
    let mut v = vec![0.0; table.nodes()];
    table.to_nodes(velocity.coeffs(), &mut v);
    let nodal: Vec<f64> = table
        .rule()
        .nodes()
        .iter()
        .zip(&v)
        .map(|(&t, &vq)| alpha.at(t) * (1.0 - vq * vq))
        .collect();
    Ok(table.weighted_gram(&nodal))
}

/// p_hk^{ij} = E[P(θ, x_i(θ), x_j(θ)) Φ_h Φ_k].
pub fn kernel_coeffs(
    kernel: &KernelSpec,
    xi: &ChaosVector,
    xj: &ChaosVector,
    period: Option<f64>,
    table: &NodalBasis,
) -> Result<Vec<Vec<f64>>> {
    require_nodes(table)?;
    let mut a = vec![0.0; table.nodes()];
    let mut b = vec![0.0; table.nodes()];
    table.to_nodes(xi.coeffs(), &mut a);
    table.to_nodes(xj.coeffs(), &mut b);
    let nodal: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(&p, &q)| kernel.eval(p, q, period))
        .collect();
    Ok(table.weighted_gram(&nodal))
}

/// Constant Galerkin data shared by every particle of a run.
#[derive(Debug, Clone)]
pub struct GalerkinMatrices {
    pub diffusion: Vec<Vec<f64>>,
    pub noise: ChaosVector,
    /// α(θ) on the nodes of the tabulation.
    pub alpha_nodal: Vec<f64>,
    pub table: NodalBasis,
}

impl GalerkinMatrices {
    pub fn new(
        alpha: &UncertainScalar,
        diffusion: &UncertainScalar,
        table: NodalBasis,
    ) -> Result<Self> {
        require_nodes(&table)?;
        let diffusion_mat = diffusion_matrix(diffusion, &table);
        let noise = noise_projection(diffusion, &table)?;
        let alpha_nodal = table.rule().nodes().iter().map(|&t| alpha.at(t)).collect();
        Ok(Self {
            diffusion: diffusion_mat,
            noise,
            alpha_nodal,
            table,
        })
    }
}
