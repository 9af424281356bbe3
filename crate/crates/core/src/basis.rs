//! Orthonormal Legendre chaos for a random input uniform on [-1, 1].
//!
//! The density Ψ(θ) = 1/2 is folded into the quadrature weights, so every
//! inner product in the crate is a plain weighted sum `Σ_q w_q g(θ_q)` with
//! `Σ_q w_q = 1`. Basis functions are Φ_h = √(2h+1)·L_h, which makes
//! E[Φ_h Φ_k] = δ_hk under that density.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalized Legendre polynomials Φ_0..Φ_M on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrthonormalBasis {
    max_degree: usize,
}

impl OrthonormalBasis {
    pub fn new(max_degree: usize) -> Self {
        Self { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of modes, M + 1.
    pub fn len(&self) -> usize {
        self.max_degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Φ_h(θ), refusing degrees above M and points outside the support.
    pub fn eval(&self, degree: usize, theta: f64) -> Result<f64> {
        if degree > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree,
                max: self.max_degree,
            });
        }
        check_support(theta)?;
        let mut buf = vec![0.0; degree + 1];
        fill_orthonormal(theta, &mut buf);
        Ok(buf[degree])
    }

    /// Writes Φ_0(θ)..Φ_M(θ) into `out` (length M + 1). No domain check.
    pub fn eval_all(&self, theta: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        fill_orthonormal(theta, out);
    }
}

fn check_support(theta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(Error::OutsideSupport(theta));
    }
    Ok(())
}

/// Three-term recurrence for L_0..L_{len-1}, then the √(2h+1) scaling.
fn fill_orthonormal(theta: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = theta;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * theta * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
    for (h, value) in out.iter_mut().enumerate() {
        *value *= ((2 * h + 1) as f64).sqrt();
    }
}

/// Classical Legendre polynomial L_n and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss–Legendre rule against the uniform probability density on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-node rule; nodes strictly increasing, weights summing to one.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "quadrature rule needs at least one node".into(),
            ));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            // standard weight 2/((1-x²)L'²), halved for the density 1/2
            let w = 1.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ_q w_q g(θ_q).
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * g(t))
            .sum()
    }
}

/// Default rule for non-polynomial projections: 2(M+1) nodes.
pub fn default_rule(max_degree: usize) -> QuadratureRule {
    QuadratureRule::gauss_legendre(2 * (max_degree + 1)).expect("n >= 2")
}

/// Chaos coefficients ĝ_0..ĝ_M of a scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector(pub Vec<f64>);

impl ChaosVector {
    pub fn zeros(max_degree: usize) -> Self {
        Self(vec![0.0; max_degree + 1])
    }

    pub fn constant(value: f64, max_degree: usize) -> Self {
        let mut v = Self::zeros(max_degree);
        v.0[0] = value;
        v
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn max_degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn expectation(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    pub fn variance(&self) -> f64 {
        self.0.iter().skip(1).map(|c| c * c).sum()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Σ_h ĝ_h Φ_h(θ).
    pub fn evaluate(&self, theta: f64) -> Result<f64> {
        check_support(theta)?;
        let mut phi = vec![0.0; self.0.len()];
        fill_orthonormal(theta, &mut phi);
        Ok(dot(&self.0, &phi))
    }

    /// Euclidean distance with the shorter vector zero-padded.
    pub fn distance(&self, other: &ChaosVector) -> f64 {
        let n = self.0.len().max(other.0.len());
        (0..n)
            .map(|h| {
                let a = self.0.get(h).copied().unwrap_or(0.0);
                let b = other.0.get(h).copied().unwrap_or(0.0);
                (a - b) * (a - b)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// ĝ_h = Σ_q w_q g(θ_q) Φ_h(θ_q) for h = 0..=M.
pub fn project(
    g: impl Fn(f64) -> f64,
    max_degree: usize,
    rule: &QuadratureRule,
) -> Result<ChaosVector> {
    let table = NodalBasis::new(OrthonormalBasis::new(max_degree), rule.clone())?;
    let values: Vec<f64> = rule.nodes().iter().map(|&t| g(t)).collect();
    let mut out = vec![0.0; max_degree + 1];
    table.project_nodal(&values, &mut out);
    Ok(ChaosVector(out))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A basis tabulated on the nodes of a rule: Φ_h(θ_q), stored node-major.
///
/// This is the workhorse for the particle solver: every state-dependent
/// Galerkin product is formed by going to nodal values, applying the
/// pointwise nonlinearity and projecting back.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    basis: OrthonormalBasis,
    rule: QuadratureRule,
    phi: Vec<f64>,
    weighted_phi: Vec<f64>,
}

impl NodalBasis {
    /// Requires at least M + 1 nodes.
    pub fn new(basis: OrthonormalBasis, rule: QuadratureRule) -> Result<Self> {
        if rule.len() < basis.len() {
            return Err(Error::InsufficientQuadrature {
                have: rule.len(),
                need: basis.len(),
            });
        }
        let m = basis.len();
        let mut phi = vec![0.0; rule.len() * m];
        for (q, &t) in rule.nodes().iter().enumerate() {
            basis.eval_all(t, &mut phi[q * m..(q + 1) * m]);
        }
        let weighted_phi = phi
            .chunks(m)
            .zip(rule.weights())
            .flat_map(|(row, &w)| row.iter().map(move |p| p * w))
            .collect();
        Ok(Self {
            basis,
            rule,
            phi,
            weighted_phi,
        })
    }

    /// Tabulation with the default 2(M+1)-node rule.
    pub fn with_default_rule(max_degree: usize) -> Self {
        Self::new(OrthonormalBasis::new(max_degree), default_rule(max_degree))
            .expect("default rule is large enough")
    }

    pub fn basis(&self) -> OrthonormalBasis {
        self.basis
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    /// Row Φ_0(θ_q)..Φ_M(θ_q).
    #[inline]
    pub fn phi_row(&self, q: usize) -> &[f64] {
        let m = self.modes();
        &self.phi[q * m..(q + 1) * m]
    }

    /// Nodal values Σ_h c_h Φ_h(θ_q) for every node.
    #[inline]
    pub fn to_nodes(&self, coeffs: &[f64], out: &mut [f64]) {
        let m = self.modes();
        for (o, row) in out.iter_mut().zip(self.phi.chunks_exact(m)) {
            *o = dot(coeffs, row);
        }
    }

    /// Coefficients Σ_q w_q g_q Φ_h(θ_q) from nodal values.
    #[inline]
    pub fn project_nodal(&self, values: &[f64], out: &mut [f64]) {
        let m = self.modes();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&g, row) in values.iter().zip(self.weighted_phi.chunks_exact(m)) {
            for (o, wp) in out.iter_mut().zip(row) {
                *o += g * wp;
            }
        }
    }

    /// Galerkin matrix Σ_q w_q a(θ_q) Φ_h(θ_q) Φ_k(θ_q) for nodal weights a.
    pub fn weighted_gram(&self, nodal: &[f64]) -> Vec<Vec<f64>> {
        let m = self.modes();
        let mut mat = vec![vec![0.0; m]; m];
        for (q, &a) in nodal.iter().enumerate() {
            let row = self.phi_row(q);
            let w = self.rule.weights()[q] * a;
            for h in 0..m {
                for k in h..m {
                    mat[h][k] += w * row[h] * row[k];
                }
            }
        }
        for h in 0..m {
            for k in 0..h {
                mat[h][k] = mat[k][h];
            }
        }
        mat
    }
}
