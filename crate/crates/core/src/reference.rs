//! Stochastic Galerkin finite-difference solver for the space-homogeneous
//! problem, the stationary mean-velocity oracle and the free energy.
//!
//! The projected equation for h = 0..M reads
//!
//! ```text
//! ∂t f̂_h = ∂v [ Σ_k (A_hk (v² − 1) v + v δ_hk − U_hk) f̂_k + Σ_k D_hk ∂v f̂_k ]
//! ```
//!
//! with A_hk = E[α Φ_h Φ_k], D_hk = E[D Φ_h Φ_k] and U_hk = Σ_m û_m E[Φ_m Φ_h Φ_k]
//! built from the current mean-velocity modes.

use std::io::Write;

use crate::basis::{ChaosVector, NodalBasis};
use crate::error::{Error, Result};
use crate::params::{diffusion_matrix, UncertainScalar};

/// Values f̂_h(v_j) on a uniform node grid including both end points.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub v_lo: f64,
    pub v_hi: f64,
    pub nv: usize,
    pub modes: usize,
    /// Mode-major: values[h * nv + j].
    pub values: Vec<f64>,
    pub time: f64,
}

impl CoefficientField {
    pub fn zeros(v_lo: f64, v_hi: f64, nv: usize, max_degree: usize) -> Result<Self> {
        if nv < 3 || !(v_hi > v_lo) {
            return Err(Error::InvalidParameter(format!(
                "velocity grid needs lo < hi and at least 3 nodes, got [{v_lo}, {v_hi}] with {nv}"
            )));
        }
        Ok(Self {
            v_lo,
            v_hi,
            nv,
            modes: max_degree + 1,
            values: vec![0.0; nv * (max_degree + 1)],
            time: 0.0,
        })
    }

    /// Deterministic Gaussian in mode 0, normalized so that Σ_j f_j Δv = 1.
    pub fn gaussian(v_lo: f64, v_hi: f64, nv: usize, max_degree: usize, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        let mut f = Self::zeros(v_lo, v_hi, nv, max_degree)?;
        let dv = f.dv();
        for j in 0..nv {
            let z = (f.v(j) - mu) / sigma;
            f.values[j] = (-0.5 * z * z).exp();
        }
        let mass: f64 = f.values[..nv].iter().sum::<f64>() * dv;
        f.values[..nv].iter_mut().for_each(|x| *x /= mass);
        Ok(f)
    }

    pub fn dv(&self) -> f64 {
        (self.v_hi - self.v_lo) / (self.nv - 1) as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_lo + j as f64 * self.dv()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    pub fn mode(&self, h: usize) -> &[f64] {
        &self.values[h * self.nv..(h + 1) * self.nv]
    }

    pub fn max_degree(&self) -> usize {
        self.modes - 1
    }

    /// Σ_j f̂_0(v_j) Δv.
    pub fn mass(&self) -> f64 {
        self.mode(0).iter().sum::<f64>() * self.dv()
    }

    /// û_h = Σ_j v_j f̂_h(v_j) Δv.
    pub fn mean_velocity_modes(&self) -> ChaosVector {
        let dv = self.dv();
        ChaosVector(
            (0..self.modes)
                .map(|h| self.mode(h).iter().enumerate().map(|(j, f)| self.v(j) * f).sum::<f64>() * dv)
                .collect(),
        )
    }

    /// f(θ_q, v_j) for every node of `table`, node-major.
    pub fn nodal(&self, table: &NodalBasis) -> Vec<Vec<f64>> {
        (0..table.nodes())
            .map(|q| {
                let phi = table.phi_row(q);
                (0..self.nv)
                    .map(|j| (0..self.modes).map(|h| self.values[h * self.nv + j] * phi[h]).sum())
                    .collect()
            })
            .collect()
    }

    /// Chaos modes of the temperature ∫(v − u)² f dv / ∫ f dv, projected with
    /// the rule of `table`.
    pub fn temperature_modes(&self, table: &NodalBasis) -> Result<ChaosVector> {
        if table.modes() < self.modes {
            return Err(Error::InvalidParameter(format!(
                "table resolves {} modes, field has {}",
                table.modes(),
                self.modes
            )));
        }
        let v = self.grid();
        let temps: Vec<f64> = self
            .nodal(table)
            .iter()
            .map(|f| {
                let m0: f64 = f.iter().sum();
                let m1: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum();
                let m2: f64 = f.iter().zip(&v).map(|(a, b)| a * b * b).sum();
                let u = m1 / m0;
                m2 / m0 - u * u
            })
            .collect();
        let mut out = vec![0.0; table.modes()];
        table.project_nodal(&temps, &mut out);
        Ok(ChaosVector(out))
    }

    /// CSV dump: grid header, then one row of N_v values per mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "v_grid,{},{},{}", self.v_lo, self.v_hi, self.nv)?;
        writeln!(w, "time,{}", self.time)?;
        for h in 0..self.modes {
            let line: Vec<String> = self.mode(h).iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{h},{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Discretization of the drift–diffusion flux c f + D ∂v f of each mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxScheme {
    /// Central averages for c f and central differences for ∂v f.
    Central,
    /// Scharfetter–Gummel fitting for the diagonal (h = k) terms, central
    /// for the couplings. Keeps the discrete Maxwellian-type steady state
    /// positive where the cell Péclet number c Δv / D exceeds 2.
    #[default]
    ExponentialFitting,
}

/// B(x) = x / (eˣ − 1).
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - 0.5 * x + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// c f + D ∂v f across one interface, exact for exponential profiles.
#[inline]
fn fitted_flux(c: f64, d: f64, left: f64, right: f64, dv: f64) -> f64 {
    if d > 0.0 {
        let z = c * dv / d;
        d / dv * (bernoulli(-z) * right - bernoulli(z) * left)
    } else if c > 0.0 {
        c * right
    } else {
        c * left
    }
}

/// Galerkin data of the projected equation.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub scheme: FluxScheme,
    pub alpha: UncertainScalar,
    pub diffusion: UncertainScalar,
    /// A_hk = E[α Φ_h Φ_k].
    pub selfprop: Vec<Vec<f64>>,
    /// D_hk = E[D Φ_h Φ_k].
    pub diffusion_mat: Vec<Vec<f64>>,
    /// E[Φ_m Φ_h Φ_k], indexed [m][h][k].
    pub triple: Vec<Vec<Vec<f64>>>,
    pub table: NodalBasis,
}

impl ReferenceModel {
    /// Uses 2(M+1) Gauss–Legendre nodes, exact for the triple products.
    pub fn new(alpha: UncertainScalar, diffusion: UncertainScalar, max_degree: usize) -> Self {
        let table = NodalBasis::with_default_rule(max_degree);
        let m = table.modes();
        let alpha_nodes: Vec<f64> = table.rule().nodes().iter().map(|&t| alpha.at(t)).collect();
        let selfprop = chop(table.weighted_gram(&alpha_nodes));
        let diffusion_mat = chop(diffusion_matrix(&diffusion, &table));
        let triple = (0..m)
            .map(|a| {
                let phi_a: Vec<f64> = (0..table.nodes()).map(|q| table.phi_row(q)[a]).collect();
                chop(table.weighted_gram(&phi_a))
            })
            .collect();
        Self {
            scheme: FluxScheme::default(),
            alpha,
            diffusion,
            selfprop,
            diffusion_mat,
            triple,
            table,
        }
    }

    pub fn modes(&self) -> usize {
        self.table.modes()
    }

    /// Largest absolute row sum of D_hk, a bound on its spectral radius.
    pub fn diffusion_bound(&self) -> f64 {
        self.diffusion_mat
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Stable RK4 step bound on `field`'s grid: the smaller of the diffusive
    /// limit `c_diff·Δv²/max D` and an advective limit `Δv / max|drift|`.
    pub fn stable_dt(&self, field: &CoefficientField, c_diff: f64) -> f64 {
        let dv = field.dv();
        let amax = self
            .selfprop
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let vmax = field.v_lo.abs().max(field.v_hi.abs());
        // |u| ≤ vmax for a non-negative density on the grid
        let drift = amax * (vmax * vmax + 1.0) * vmax + 2.0 * vmax;
        let d = self.diffusion_bound();
        let diff = if d > 0.0 { c_diff * dv * dv / d } else { f64::INFINITY };
        diff.min(dv / drift)
    }

    /// Time derivative of `field` written into `out` (same layout).
    pub fn rhs(&self, field: &CoefficientField, out: &mut [f64]) {
        let m = self.modes();
        let nv = field.nv;
        assert_eq!(field.modes, m, "field and model disagree on the number of modes");
        assert_eq!(out.len(), field.values.len());
        let dv = field.dv();
        let u = field.mean_velocity_modes();
        let mut big_u = vec![vec![0.0; m]; m];
        for (a, ua) in u.0.iter().enumerate() {
            for h in 0..m {
                for k in 0..m {
                    big_u[h][k] += ua * self.triple[a][h][k];
                }
            }
        }
        let f = &field.values;
        let mut flux = vec![0.0; m];
        let mut prev = vec![0.0; m];
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..=nv {
            // flux at j − 1/2; zero through both ends
            if j == 0 || j == nv {
                flux.iter_mut().for_each(|x| *x = 0.0);
            } else {
                let vm = field.v_lo + (j as f64 - 0.5) * dv;
                let cubic = (vm * vm - 1.0) * vm;
                for h in 0..m {
                    let mut acc = 0.0;
                    for k in 0..m {
                        let (left, right) = (f[k * nv + j - 1], f[k * nv + j]);
                        let mut c = self.selfprop[h][k] * cubic - big_u[h][k];
                        let d = self.diffusion_mat[h][k];
                        if h == k {
                            c += vm;
                            if self.scheme == FluxScheme::ExponentialFitting {
                                acc += fitted_flux(c, d, left, right, dv);
                                continue;
                            }
                        }
                        acc += c * 0.5 * (left + right) + d * (right - left) / dv;
                    }
                    flux[h] = acc;
                }
            }
            if j > 0 {
                for h in 0..m {
                    out[h * nv + j - 1] = (flux[h] - prev[h]) / dv;
                }
            }
            std::mem::swap(&mut flux, &mut prev);
        }
    }

    /// Classical RK4 to time `t_final`, calling `monitor(field, step)` before
    /// the first step and every `monitor_every` steps (and after the last).
    pub fn rk4_run(
        &self,
        mut field: CoefficientField,
        dt: f64,
        t_final: f64,
        monitor_every: usize,
        monitor: &mut dyn FnMut(&CoefficientField, usize) -> Result<()>,
    ) -> Result<CoefficientField> {
        let bound = self.stable_dt(&field, 0.4);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} violates the stability bound {bound:e}"
            )));
        }
        let n_steps = crate::particles::step_count(t_final, dt)?;
        let len = field.values.len();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut stage = field.clone();
        let t0 = field.time;
        monitor(&field, 0)?;
        for step in 1..=n_steps {
            self.rhs(&field, &mut k1);
            axpy_into(&mut stage.values, &field.values, 0.5 * dt, &k1);
            self.rhs(&stage, &mut k2);
            axpy_into(&mut stage.values, &field.values, 0.5 * dt, &k2);
            self.rhs(&stage, &mut k3);
            axpy_into(&mut stage.values, &field.values, dt, &k3);
            self.rhs(&stage, &mut k4);
            for i in 0..len {
                field.values[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if field.values.iter().any(|x| !x.is_finite()) {
                return Err(Error::SolverBlowUp { step });
            }
            field.time = t0 + step as f64 * dt;
            if (monitor_every > 0 && step % monitor_every == 0) || step == n_steps {
                monitor(&field, step)?;
            }
        }
        Ok(field)
    }

    /// Free energy at each node of the model's rule:
    /// E = ∫(αv⁴/4 + (1 − α)v²/2) f − u²/2 + D ∫ f log f, by the trapezoid rule.
    pub fn free_energy(&self, field: &CoefficientField) -> Result<Vec<f64>> {
        let v = field.grid();
        let dv = field.dv();
        let nodes = self.table.rule().nodes();
        let mut out = Vec::with_capacity(nodes.len());
        for (q, f) in field.nodal(&self.table).iter().enumerate() {
            if let Some((j, &worst)) = f
                .iter()
                .enumerate()
                .filter(|(_, x)| **x < -1e-6)
                .min_by(|a, b| a.1.total_cmp(b.1))
            {
                return Err(Error::NegativeDensity { value: worst, v: v[j] });
            }
            let a = self.alpha.at(nodes[q]);
            let d = self.diffusion.at(nodes[q]);
            let pot: Vec<f64> = v
                .iter()
                .zip(f)
                .map(|(&x, &y)| (a * x.powi(4) / 4.0 + (1.0 - a) * x * x / 2.0) * y)
                .collect();
            let first: Vec<f64> = v.iter().zip(f).map(|(&x, &y)| x * y).collect();
            let ent: Vec<f64> = f.iter().map(|&y| y * y.max(1e-14).ln()).collect();
            let u = trapezoid(&first, dv);
            out.push(trapezoid(&pot, dv) - 0.5 * u * u + d * trapezoid(&ent, dv));
        }
        Ok(out)
    }
}

/// Zeroes entries at round-off level relative to the largest one, so that
/// structurally zero couplings are exactly zero.
fn chop(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let big = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for x in a.iter_mut().flatten() {
        if x.abs() <= 1e-13 * big {
            *x = 0.0;
        }
    }
    a
}

fn axpy_into(out: &mut [f64], base: &[f64], a: f64, x: &[f64]) {
    for ((o, b), y) in out.iter_mut().zip(base).zip(x) {
        *o = b + a * y;
    }
}

pub(crate) fn trapezoid(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1]))
}

/// Tracks the largest increase of the free energy between monitor calls.
#[derive(Debug, Default, Clone)]
pub struct EnergyMonitor {
    pub last: Option<Vec<f64>>,
    /// max over calls and nodes of E(t_new) − E(t_old).
    pub max_increase: f64,
    pub samples: usize,
}

impl EnergyMonitor {
    pub fn record(&mut self, model: &ReferenceModel, field: &CoefficientField) -> Result<()> {
        let e = model.free_energy(field)?;
        if let Some(prev) = &self.last {
            for (a, b) in e.iter().zip(prev) {
                self.max_increase = self.max_increase.max(a - b);
            }
        } else {
            self.max_increase = f64::NEG_INFINITY;
        }
        self.samples += 1;
        self.last = Some(e);
        Ok(())
    }
}

/// Self-consistent stationary state of the homogeneous model at fixed (α, D).
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    pub alpha: f64,
    pub d: f64,
    pub u: f64,
    /// |G(u) − u| at the returned root.
    pub residual: f64,
}

impl StationaryProfile {
    fn exponent(&self, v: f64) -> f64 {
        stationary_exponent(self.alpha, self.d, self.u, v)
    }

    /// f∞ on `grid`, normalized so that Σ_j f_j Δv = 1.
    pub fn on_grid(&self, grid: &[f64]) -> Vec<f64> {
        let dv = grid[1] - grid[0];
        let e: Vec<f64> = grid.iter().map(|&v| self.exponent(v)).collect();
        let emax = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut f: Vec<f64> = e.iter().map(|x| (x - emax).exp()).collect();
        let mass: f64 = f.iter().sum::<f64>() * dv;
        f.iter_mut().for_each(|x| *x /= mass);
        f
    }
}

#[inline]
fn stationary_exponent(alpha: f64, d: f64, u: f64, v: f64) -> f64 {
    -(alpha * v.powi(4) / 4.0 + (1.0 - alpha) * v * v / 2.0 - u * v) / d
}

/// Moments ∫ vᵏ e^{φ(v)} dv / ∫ e^{φ(v)} dv for k = 1, 2 of the stationary
/// weight, by composite 20-point Gauss–Legendre on panels narrow enough to
/// resolve the peak, over a window whose end-point weight is below 1e-17.
fn stationary_moments(alpha: f64, d: f64, u: f64) -> (f64, f64) {
    let phi = |v: f64| stationary_exponent(alpha, d, u, v);
    // peak where αv³ + (1 − α)v = u
    let grad = |v: f64| alpha * v * v * v + (1.0 - alpha) * v - u;
    let (mut lo, mut hi) = (-1.0 - u.abs(), 1.0 + u.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let vstar = 0.5 * (lo + hi);
    let fmax = phi(vstar);
    let curv = (3.0 * alpha * vstar * vstar + 1.0 - alpha).max(1e-3);
    let width = (d / curv).sqrt();
    let mut l = 6.0f64.max(vstar.abs() + 1.0);
    while (phi(l) - fmax > -40.0 || phi(-l) - fmax > -40.0) && l < 1e3 {
        l *= 1.25;
    }
    let h = (width / 4.0).min(0.05);
    let panels = ((2.0 * l) / h).ceil() as usize;
    let h = 2.0 * l / panels as f64;
    let rule = gl20();
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for p in 0..panels {
        let a = -l + p as f64 * h;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            // weights sum to 1 on [-1, 1]
            let v = a + 0.5 * h * (x + 1.0);
            let e = w * h * (phi(v) - fmax).exp();
            z += e;
            m1 += e * v;
            m2 += e * v * v;
        }
    }
    (m1 / z, m2 / z)
}

fn gl20() -> &'static crate::basis::QuadratureRule {
    use std::sync::OnceLock;
    static RULE: OnceLock<crate::basis::QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| crate::basis::QuadratureRule::gauss_legendre(20).expect("20-point rule"))
}

/// G(u) = ∫ v f∞(v; u) dv.
pub fn stationary_map(alpha: f64, d: f64, u: f64) -> f64 {
    stationary_moments(alpha, d, u).0
}

/// G'(0) = Var_0 / D, the slope of the map at the symmetric state.
pub fn stationary_slope_at_zero(alpha: f64, d: f64) -> f64 {
    let (m1, m2) = stationary_moments(alpha, d, 0.0);
    (m2 - m1 * m1) / d
}

fn check_stationary_args(alpha: f64, d: f64) -> Result<()> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("diffusion must be positive, got {d}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be non-negative, got {alpha}")));
    }
    Ok(())
}

/// Largest non-negative root of u = G(u): damped fixed point (factor 1/2)
/// from u = 1, with a scan-and-bisect fallback when that stalls.
pub fn stationary_mean_velocity(alpha: f64, d: f64, tol: f64) -> Result<StationaryProfile> {
    check_stationary_args(alpha, d)?;
    let g = |u: f64| stationary_map(alpha, d, u);
    let done = |u: f64| StationaryProfile { alpha, d, u, residual: (g(u) - u).abs() };

    // start above the largest root: G is increasing and bounded by O(u^{1/3})
    let mut u = 1.0;
    while g(u) > u {
        u *= 2.0;
        if u > 1e6 {
            return Err(Error::NoConvergence { what: "stationary bracket", iterations: 20 });
        }
    }
    const MAX_ITER: usize = 5000;
    for _ in 0..MAX_ITER {
        let gu = g(u);
        if (gu - u).abs() <= tol {
            // a tiny root with G'(0) ≤ 1 is the symmetric state
            if u < 1e-6 && stationary_slope_at_zero(alpha, d) <= 1.0 {
                return Ok(done(0.0));
            }
            return Ok(done(u));
        }
        u = 0.5 * u + 0.5 * gu;
    }

    // slow convergence near the critical diffusion: scan u − G(u) on (0, u]
    let top = u;
    let samples = 400;
    let mut below = None;
    for k in (1..samples).rev() {
        let x = top * k as f64 / samples as f64;
        if x - g(x) < 0.0 {
            below = Some(x);
            break;
        }
    }
    let Some(mut a) = below else {
        if stationary_slope_at_zero(alpha, d) <= 1.0 {
            return Ok(done(0.0));
        }
        return Err(Error::NoConvergence { what: "stationary mean velocity", iterations: MAX_ITER });
    };
    let mut b = (a + top / samples as f64).min(top);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid - g(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= tol {
            break;
        }
    }
    Ok(done(0.5 * (a + b)))
}
