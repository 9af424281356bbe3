//! JSON scenario configuration. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{KernelSpec, UncertainScalar};
use crate::particles::GaussianInit;
use crate::reconstruction::{Axis, PhaseGrid};
use crate::reference::FluxScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Homogeneous,
    Sweep,
    ConvergenceM,
    ConvergenceN,
    ConvergenceS,
    InhomLocal,
    InhomCs,
    Stationary,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Homogeneous => "homogeneous",
            Scenario::Sweep => "sweep",
            Scenario::ConvergenceM => "convergence-m",
            Scenario::ConvergenceN => "convergence-n",
            Scenario::ConvergenceS => "convergence-s",
            Scenario::InhomLocal => "inhom-local",
            Scenario::InhomCs => "inhom-cs",
            Scenario::Stationary => "stationary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scenario `{s}`")))
    }

    pub fn is_inhomogeneous(self) -> bool {
        matches!(self, Scenario::InhomLocal | Scenario::InhomCs)
    }
}

/// α(θ) = alpha (1 + alpha_rel θ), D(θ) = d_bar (1 + lambda θ); kernel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub alpha: f64,
    pub alpha_rel: f64,
    pub d_bar: f64,
    pub lambda: f64,
    /// Cucker–Smale exponent γ.
    pub gamma: f64,
    /// Cucker–Smale strength H.
    pub strength: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            alpha_rel: 0.0,
            d_bar: 0.2,
            lambda: 0.1,
            gamma: 0.1,
            strength: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn alpha(&self) -> Result<UncertainScalar> {
        UncertainScalar::new(self.alpha, self.alpha_rel)
    }

    pub fn diffusion(&self) -> Result<UncertainScalar> {
        UncertainScalar::new(self.d_bar, self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl AxisConfig {
    pub fn axis(&self) -> Result<Axis> {
        Axis::new(self.lo, self.hi, self.cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxConfig {
    Central,
    Fitted,
}

impl From<FluxConfig> for FluxScheme {
    fn from(f: FluxConfig) -> Self {
        match f {
            FluxConfig::Central => FluxScheme::Central,
            FluxConfig::Fitted => FluxScheme::ExponentialFitting,
        }
    }
}

/// Grid and step of the deterministic reference solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub v_lo: f64,
    pub v_hi: f64,
    pub nv: usize,
    /// Fraction of the diffusive stability limit used for the RK4 step.
    pub cfl: f64,
    pub flux: FluxConfig,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            v_lo: -3.0,
            v_hi: 3.0,
            nv: 81,
            cfl: 0.4,
            flux: FluxConfig::Fitted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    /// Particles.
    pub n: usize,
    /// Interaction partners per particle; defaults to N.
    pub s: Option<usize>,
    /// Highest chaos degree.
    pub m: usize,
    pub dt: f64,
    pub t_final: f64,
    /// θ-nodes for the histogram reconstruction; defaults to 2(M + 1).
    pub quadrature_nodes: Option<usize>,
    pub v_grid: AxisConfig,
    pub x_grid: AxisConfig,
    /// Times at which densities are written; defaults to the final time.
    pub snapshot_times: Vec<f64>,
    /// Steps between moment records.
    pub observe_every: usize,
    pub reference: ReferenceConfig,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            s: None,
            m: 4,
            dt: 0.01,
            t_final: 50.0,
            quadrature_nodes: None,
            v_grid: AxisConfig { lo: -3.0, hi: 3.0, cells: 40 },
            x_grid: AxisConfig { lo: -2.0, hi: 2.0, cells: 20 },
            snapshot_times: Vec::new(),
            observe_every: 100,
            reference: ReferenceConfig::default(),
        }
    }
}

impl DiscretizationConfig {
    pub fn subsample(&self) -> usize {
        self.s.unwrap_or(self.n)
    }

    pub fn snapshots(&self) -> Vec<f64> {
        if self.snapshot_times.is_empty() {
            vec![self.t_final]
        } else {
            self.snapshot_times.clone()
        }
    }

    pub fn rule_nodes(&self) -> usize {
        self.quadrature_nodes.unwrap_or(2 * (self.m + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_v: f64,
    pub sigma_v: f64,
}

impl InitialConfig {
    /// Gaussian velocities N(1, 1/4) for the homogeneous problem.
    pub const HOMOGENEOUS: Self = Self { mu_x: 0.0, sigma_x: 0.0, mu_v: 1.0, sigma_v: 0.5 };
    /// Concentrated in space around 0, velocities N(1, 1/100).
    pub const INHOMOGENEOUS: Self = Self { mu_x: 0.0, sigma_x: 0.01, mu_v: 1.0, sigma_v: 0.1 };

    pub fn gaussian(&self) -> GaussianInit {
        GaussianInit {
            mu_x: self.mu_x,
            sigma_x: self.sigma_x,
            mu_v: self.mu_v,
            sigma_v: self.sigma_v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub d_values: Vec<f64>,
    /// Interior points added in the bracket with the largest jump; 0 disables.
    pub refine_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            d_values: (0..=10).map(|k| k as f64 / 10.0).collect(),
            refine_points: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Values of M, N or S, depending on the scenario.
    pub values: Vec<usize>,
    pub replicas: usize,
    /// Chaos degree of the reference for the M axis.
    pub reference_m: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            values: Vec::new(),
            replicas: 10,
            reference_m: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl ScenarioConfig {
    /// Defaults for `scenario` with the given model parameters.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            model: ModelConfig::default(),
            discretization: DiscretizationConfig::default(),
            initial: None,
            sweep: SweepConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn initial(&self) -> InitialConfig {
        self.initial.unwrap_or(if self.scenario.is_inhomogeneous() {
            InitialConfig::INHOMOGENEOUS
        } else {
            InitialConfig::HOMOGENEOUS
        })
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let d = &self.discretization;
        Ok(match self.scenario {
            Scenario::InhomLocal => {
                let ax = d.x_grid.axis()?;
                KernelSpec::LocalizedCell { width: ax.width(), origin: ax.lo }
            }
            Scenario::InhomCs => KernelSpec::CuckerSmale {
                strength: self.model.strength,
                exponent: self.model.gamma,
            },
            _ => KernelSpec::Homogeneous,
        })
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        let d = &self.discretization;
        let v = d.v_grid.axis()?;
        Ok(if self.scenario.is_inhomogeneous() {
            PhaseGrid::phase(d.x_grid.axis()?, v, true)
        } else {
            PhaseGrid::velocity(v)
        })
    }

    /// Field-level checks; messages name the offending key.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(m.alpha >= 0.0 && m.alpha.is_finite()) {
            return Err(bad("model.alpha", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&m.alpha_rel) {
            return Err(bad("model.alpha_rel", "must lie in [0, 1]"));
        }
        if !(m.d_bar >= 0.0 && m.d_bar.is_finite()) {
            return Err(bad("model.d_bar", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&m.lambda) {
            return Err(bad("model.lambda", "must lie in [0, 1]"));
        }
        if !(m.gamma >= 0.0 && m.gamma.is_finite()) {
            return Err(bad("model.gamma", "must be finite and >= 0"));
        }
        if !(m.strength >= 0.0 && m.strength.is_finite()) {
            return Err(bad("model.strength", "must be finite and >= 0"));
        }
        let d = &self.discretization;
        if d.n == 0 {
            return Err(bad("discretization.n", "must be >= 1"));
        }
        if let Some(s) = d.s {
            if s == 0 || s > d.n {
                return Err(bad("discretization.s", format!("must satisfy 1 <= s <= n = {}", d.n)));
            }
        }
        if d.m > 40 {
            return Err(bad("discretization.m", "must be <= 40"));
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(bad("discretization.dt", "must be positive"));
        }
        if !(d.t_final >= 0.0 && d.t_final.is_finite()) {
            return Err(bad("discretization.t_final", "must be finite and >= 0"));
        }
        crate::particles::step_count(d.t_final, d.dt)
            .map_err(|_| bad("discretization.t_final", "must be a multiple of dt"))?;
        for &t in &d.snapshot_times {
            if !(0.0..=d.t_final).contains(&t) {
                return Err(bad("discretization.snapshot_times", format!("{t} outside [0, t_final]")));
            }
            crate::particles::step_count(t, d.dt)
                .map_err(|_| bad("discretization.snapshot_times", format!("{t} is not a multiple of dt")))?;
        }
        if d.rule_nodes() < d.m + 1 {
            return Err(bad("discretization.quadrature_nodes", "must be >= m + 1"));
        }
        d.v_grid.axis().map_err(|e| bad("discretization.v_grid", e))?;
        d.x_grid.axis().map_err(|e| bad("discretization.x_grid", e))?;
        let r = &d.reference;
        if r.nv < 3 || !(r.v_hi > r.v_lo) {
            return Err(bad("discretization.reference", "needs v_lo < v_hi and nv >= 3"));
        }
        if !(r.cfl > 0.0 && r.cfl <= 0.4) {
            return Err(bad("discretization.reference.cfl", "must lie in (0, 0.4]"));
        }
        if let Some(init) = &self.initial {
            if !(init.sigma_v > 0.0) || !(init.sigma_x >= 0.0) {
                return Err(bad("initial", "needs sigma_v > 0 and sigma_x >= 0"));
            }
        }
        match self.scenario {
            Scenario::Sweep => {
                let s = &self.sweep;
                if s.d_values.len() < 2 {
                    return Err(bad("sweep.d_values", "needs at least two values"));
                }
                if s.d_values.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(bad("sweep.d_values", "values must be finite and >= 0"));
                }
            }
            Scenario::ConvergenceM | Scenario::ConvergenceN | Scenario::ConvergenceS => {
                let c = &self.convergence;
                if c.values.len() < 2 {
                    return Err(bad("convergence.values", "needs at least two values"));
                }
                if c.replicas == 0 {
                    return Err(bad("convergence.replicas", "must be >= 1"));
                }
                if c.values.contains(&0) {
                    return Err(bad("convergence.values", "values must be >= 1"));
                }
                if self.scenario == Scenario::ConvergenceM && c.values.iter().any(|&v| v > c.reference_m) {
                    return Err(bad("convergence.values", "every M must be <= reference_m"));
                }
                if self.scenario == Scenario::ConvergenceS && c.values.iter().any(|&v| v > d.n) {
                    return Err(bad("convergence.values", "every S must be <= n"));
                }
            }
            Scenario::Stationary => {
                if !(m.d_bar > 0.0) {
                    return Err(bad("model.d_bar", "must be > 0 for the stationary solver"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
