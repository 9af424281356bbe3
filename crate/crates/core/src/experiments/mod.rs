//! Experiment pipelines: particle and reference runs, diffusion sweeps,
//! convergence studies and the scenario driver behind the CLI.

pub mod config;
pub mod output;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{ChaosVector, NodalBasis, QuadratureRule};
use crate::error::{Error, Result};
use crate::params::KernelSpec;
use crate::particles::{step_count, Dynamics, MomentRecord, ParticleEnsemble, PeriodicDomain, StepConfig};
use crate::reconstruction::{expected_density, velocity_marginal, DensityField, PhaseGrid};
use crate::reference::{stationary_mean_velocity, stationary_slope_at_zero, CoefficientField, EnergyMonitor, ReferenceModel};
use crate::rng::derive_seed;

pub use config::{Scenario, ScenarioConfig};
pub use output::Manifest;

/// Everything needed to run one particle simulation.
#[derive(Debug, Clone)]
pub struct ParticleSetup {
    pub model: config::ModelConfig,
    pub n: usize,
    pub s: usize,
    pub m: usize,
    pub dt: f64,
    pub t_final: f64,
    pub kernel: KernelSpec,
    pub domain: Option<PeriodicDomain>,
    pub init: config::InitialConfig,
    pub seed: u64,
}

impl ParticleSetup {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let d = &cfg.discretization;
        let domain = if cfg.scenario.is_inhomogeneous() {
            Some(PeriodicDomain::new(d.x_grid.lo, d.x_grid.hi)?)
        } else {
            None
        };
        Ok(Self {
            model: cfg.model.clone(),
            n: d.n,
            s: d.subsample(),
            m: d.m,
            dt: d.dt,
            t_final: d.t_final,
            kernel: cfg.kernel()?,
            domain,
            init: cfg.initial(),
            seed: cfg.seed,
        })
    }

    pub fn homogeneous(&self) -> bool {
        self.domain.is_none()
    }

    pub fn dynamics(&self) -> Result<Dynamics> {
        Dynamics::new(
            &self.model.alpha()?,
            &self.model.diffusion()?,
            self.kernel,
            NodalBasis::with_default_rule(self.m),
        )
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt: self.dt,
            subsample: self.s,
            domain: self.domain,
            homogeneous: self.homogeneous(),
        }
    }
}

/// Result of [`run_particles`].
#[derive(Debug, Clone)]
pub struct ParticleRun {
    pub ensemble: ParticleEnsemble,
    pub moments: Vec<MomentRecord>,
    /// Expected densities at the requested times.
    pub snapshots: Vec<DensityField>,
}

impl ParticleRun {
    pub fn final_moments(&self) -> &MomentRecord {
        self.moments.last().expect("at least one record")
    }
}

/// Runs the particle scheme to `setup.t_final`, recording moments every
/// `observe_every` steps (plus first and last) and expected densities on
/// `grid` at each snapshot time.
pub fn run_particles(
    setup: &ParticleSetup,
    grid: Option<(&PhaseGrid, &QuadratureRule)>,
    snapshot_times: &[f64],
    observe_every: usize,
) -> Result<ParticleRun> {
    let dynamics = setup.dynamics()?;
    let cfg = setup.step_config();
    let mut ens = ParticleEnsemble::init_gaussian(setup.n, setup.m, setup.init.gaussian(), setup.seed)?;
    if let Some(d) = setup.domain {
        let modes = ens.modes();
        let mut x = ens.positions().to_vec();
        for row in x.chunks_exact_mut(modes) {
            row[0] = d.wrap(row[0]);
        }
        ens = ParticleEnsemble::from_modes(x, ens.velocities().to_vec(), setup.m, setup.seed)?;
    }
    cfg.validate(setup.n)?;
    let total = step_count(setup.t_final, setup.dt)?;
    let snaps: BTreeSet<usize> = if grid.is_some() {
        snapshot_times
            .iter()
            .map(|&t| step_count(t, setup.dt))
            .collect::<Result<_>>()?
    } else {
        BTreeSet::new()
    };
    let mut moments = Vec::new();
    let mut snapshots = Vec::new();
    for k in 0..=total {
        if k > 0 {
            ens.step(&cfg, &dynamics)?;
        }
        if k == 0 || k == total || (observe_every > 0 && k % observe_every == 0) {
            let (u, t) = ens.moment_modes(dynamics.table())?;
            moments.push(MomentRecord {
                time: ens.time(),
                mean_velocity: u,
                temperature: t,
            });
        }
        if snaps.contains(&k) {
            let (g, rule) = grid.expect("snapshots need a grid");
            snapshots.push(expected_density(&ens, g, rule)?);
        }
    }
    Ok(ParticleRun {
        ensemble: ens,
        moments,
        snapshots,
    })
}

/// Result of [`run_reference`].
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub model: ReferenceModel,
    pub dt: f64,
    /// Coefficient fields at the requested times, in order.
    pub snapshots: Vec<CoefficientField>,
    pub energy: EnergyMonitor,
}

impl ReferenceRun {
    pub fn final_field(&self) -> &CoefficientField {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Solves the projected homogeneous equation from the Gaussian initial
/// velocity law, monitoring the free energy every 100 steps.
pub fn run_reference(
    model_cfg: &config::ModelConfig,
    reference: &config::ReferenceConfig,
    m: usize,
    init: &config::InitialConfig,
    snapshot_times: &[f64],
) -> Result<ReferenceRun> {
    let mut model = ReferenceModel::new(model_cfg.alpha()?, model_cfg.diffusion()?, m);
    model.scheme = reference.flux.into();
    let mut field = CoefficientField::gaussian(reference.v_lo, reference.v_hi, reference.nv, m, init.mu_v, init.sigma_v)?;
    let mut times: Vec<f64> = snapshot_times.to_vec();
    times.sort_by(f64::total_cmp);
    let t_end = times.last().copied().unwrap_or(0.0);
    let bound = model.stable_dt(&field, reference.cfl);
    let dt = if t_end > 0.0 { t_end / (t_end / bound).ceil() } else { bound };
    let mut energy = EnergyMonitor::default();
    let mut snapshots = Vec::new();
    let mut t_now = 0.0;
    for &t in &times {
        let span = t - t_now;
        let steps = (span / dt).round();
        let local_dt = if steps > 0.0 { span / steps } else { dt };
        field = model.rk4_run(field, local_dt, local_dt * steps, 100, &mut |f, step| {
            // the first call of later segments repeats the previous sample
            if step == 0 && energy.samples > 0 {
                return Ok(());
            }
            energy.record(&model, f)
        })?;
        field.time = t;
        t_now = t;
        snapshots.push(field.clone());
    }
    Ok(ReferenceRun { model, dt, snapshots, energy })
}

/// Discrete L¹ distance between a velocity histogram and a nodal density,
/// using exact cell averages of the piecewise-linear interpolant of the
/// latter (zero outside its grid). Histogram mass outside its own grid is
/// added as error.
pub fn l1_histogram_vs_nodal(hist: &DensityField, nodal: &[f64], v_lo: f64, v_hi: f64) -> Result<f64> {
    if hist.grid.x.is_some() {
        return Err(Error::InvalidParameter("expected a velocity-only histogram".into()));
    }
    let nv = nodal.len();
    let h = (v_hi - v_lo) / (nv - 1) as f64;
    // ∫_{v_lo}^{y} of the interpolant
    let cumulative = |y: f64| -> f64 {
        let y = y.clamp(v_lo, v_hi);
        let s = (y - v_lo) / h;
        let k = (s.floor() as usize).min(nv - 2);
        let full: f64 = (0..k).map(|i| 0.5 * h * (nodal[i] + nodal[i + 1])).sum();
        let r = (y - (v_lo + k as f64 * h)) / h;
        let part = h * (nodal[k] * r + 0.5 * (nodal[k + 1] - nodal[k]) * r * r);
        full + part
    };
    let ax = hist.grid.v;
    let w = ax.width();
    let mut l1 = hist.out_of_grid_mass;
    for c in 0..ax.cells {
        let a = ax.lo + c as f64 * w;
        let avg = (cumulative(a + w) - cumulative(a)) / w;
        l1 += (hist.values[c] - avg).abs() * w;
    }
    Ok(l1)
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One sweep point: terminal E[u] and its chaos standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub d_bar: f64,
    pub e_u: f64,
    pub std_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// Sorted by D̄.
    pub rows: Vec<SweepRow>,
    /// Interval refined in the second pass, if any.
    pub refined_bracket: Option<(f64, f64)>,
}

impl SweepResult {
    /// Largest decrease of E[u] between adjacent rows.
    pub fn max_adjacent_drop(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[0].e_u - w[1].e_u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row(&self, d_bar: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| (r.d_bar - d_bar).abs() < 1e-12)
    }
}

fn sweep_point(cfg: &ScenarioConfig, d_bar: f64) -> Result<SweepRow> {
    let mut setup = ParticleSetup::from_config(cfg)?;
    setup.model.d_bar = d_bar;
    setup.seed = derive_seed(cfg.seed, "sweep", d_bar.to_bits());
    let run = run_particles(&setup, None, &[], 0)?;
    let u = &run.final_moments().mean_velocity;
    Ok(SweepRow {
        d_bar,
        e_u: u.expectation(),
        std_u: u.std_dev(),
    })
}

/// Terminal E[u_f] and Std[u_f] over a list of D̄ values, with an optional
/// refinement pass inside the bracket where E[u_f] jumps the most.
pub fn sweep_diffusion(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let mut coarse: Vec<f64> = cfg.sweep.d_values.clone();
    coarse.sort_by(f64::total_cmp);
    coarse.dedup();
    let mut rows: Vec<SweepRow> = coarse
        .par_iter()
        .map(|&d| sweep_point(cfg, d))
        .collect::<Result<_>>()?;
    let mut refined_bracket = None;
    let k = cfg.sweep.refine_points;
    if k > 0 && rows.len() >= 2 {
        let (i, _) = rows
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, (w[1].e_u - w[0].e_u).abs()))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        let (a, b) = (rows[i].d_bar, rows[i + 1].d_bar);
        let extra: Vec<f64> = (1..=k).map(|j| a + (b - a) * j as f64 / (k + 1) as f64).collect();
        let more: Vec<SweepRow> = extra
            .par_iter()
            .map(|&d| sweep_point(cfg, d))
            .collect::<Result<_>>()?;
        rows.extend(more);
        rows.sort_by(|p, q| p.d_bar.total_cmp(&q.d_bar));
        refined_bracket = Some((a, b));
    }
    Ok(SweepResult { rows, refined_bracket })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceAxis {
    M,
    N,
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub value: usize,
    /// Mean over replicas of ‖T̂ − T̂_ref‖.
    pub error: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    pub replica_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub axis: ConvergenceAxis,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Fitted log-log slope of the error against `transform(value)`.
    pub fn slope(&self, transform: impl Fn(usize) -> f64) -> f64 {
        let xs: Vec<f64> = self.rows.iter().map(|r| transform(r.value)).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.error).collect();
        loglog_slope(&xs, &ys)
    }
}

fn temperature_modes_of(setup: &ParticleSetup) -> Result<ChaosVector> {
    Ok(run_particles(setup, None, &[], 0)?.final_moments().temperature.clone())
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// L²(Ω) error of the terminal temperature modes along one axis, averaged
/// over replicas. Replica r uses the derived seed (master, "replica", r) for
/// every run, so runs along the axis share initial data and Brownian paths.
pub fn convergence_study(cfg: &ScenarioConfig, axis: ConvergenceAxis) -> Result<ConvergenceTable> {
    let base = ParticleSetup::from_config(cfg)?;
    let conv = &cfg.convergence;
    let replicas: Vec<u64> = (0..conv.replicas as u64).map(|r| derive_seed(cfg.seed, "replica", r)).collect();

    let pde_reference = if axis == ConvergenceAxis::N {
        let run = run_reference(&cfg.model, &cfg.discretization.reference, base.m, &base.init, &[base.t_final])?;
        Some(run.final_field().temperature_modes(&NodalBasis::with_default_rule(base.m))?)
    } else {
        None
    };

    let per_replica: Vec<Vec<f64>> = replicas
        .par_iter()
        .map(|&seed| -> Result<Vec<f64>> {
            let mut setup = base.clone();
            setup.seed = seed;
            let reference = match axis {
                ConvergenceAxis::M => {
                    let mut s = setup.clone();
                    s.m = conv.reference_m;
                    temperature_modes_of(&s)?
                }
                ConvergenceAxis::S => {
                    let mut s = setup.clone();
                    s.s = s.n;
                    temperature_modes_of(&s)?
                }
                ConvergenceAxis::N => pde_reference.clone().expect("computed above"),
            };
            conv.values
                .iter()
                .map(|&v| {
                    let mut s = setup.clone();
                    match axis {
                        ConvergenceAxis::M => s.m = v,
                        ConvergenceAxis::N => {
                            s.n = v;
                            s.s = cfg.discretization.s.map_or(v, |x| x.min(v));
                        }
                        ConvergenceAxis::S => s.s = v,
                    }
                    Ok(temperature_modes_of(&s)?.distance(&reference))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let rows = conv
        .values
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let errs: Vec<f64> = per_replica.iter().map(|r| r[k]).collect();
            let (error, stderr) = mean_and_stderr(&errs);
            ConvergenceRow { value, error, stderr, replica_errors: errs }
        })
        .collect();
    Ok(ConvergenceTable { axis, rows })
}

/// Stationary-oracle summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryReport {
    pub alpha: f64,
    pub d: f64,
    pub u: f64,
    pub residual: f64,
    pub slope_at_zero: f64,
}

pub fn stationary_report(alpha: f64, d: f64) -> Result<StationaryReport> {
    let s = stationary_mean_velocity(alpha, d, 1e-12)?;
    Ok(StationaryReport {
        alpha,
        d,
        u: s.u,
        residual: s.residual,
        slope_at_zero: stationary_slope_at_zero(alpha, d),
    })
}

/// Runs the scenario of `cfg`, writing its CSV outputs and `manifest.json`
/// into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new(cfg);
    let d = &cfg.discretization;
    match cfg.scenario {
        Scenario::Homogeneous | Scenario::InhomLocal | Scenario::InhomCs => {
            let setup = ParticleSetup::from_config(cfg)?;
            let grid = cfg.grid()?;
            let rule = QuadratureRule::gauss_legendre(d.rule_nodes())?;
            let snaps = d.snapshots();
            let run = run_particles(&setup, Some((&grid, &rule)), &snaps, d.observe_every)?;
            manifest.write(out_dir, "moments.csv", |w| output::write_moments(w, &run.moments))?;
            for field in &run.snapshots {
                let t = output::time_label(field.time);
                manifest.write(out_dir, &format!("density_{t}.csv"), |w| field.write_csv(w))?;
                if cfg.scenario.is_inhomogeneous() {
                    let marginal = velocity_marginal(field)?;
                    manifest.note(&format!("marginal_mean_{t}"), marginal.mean_velocity()?);
                    manifest.write(out_dir, &format!("marginal_{t}.csv"), |w| marginal.write_csv(w))?;
                }
            }
            if cfg.scenario == Scenario::Homogeneous {
                let reference = run_reference(&cfg.model, &d.reference, d.m, &setup.init, &snaps)?;
                for (field, hist) in reference.snapshots.iter().zip(&run.snapshots) {
                    let t = output::time_label(field.time);
                    manifest.write(out_dir, &format!("reference_{t}.csv"), |w| field.write_csv(w))?;
                    let l1 = l1_histogram_vs_nodal(hist, field.mode(0), field.v_lo, field.v_hi)?;
                    manifest.note(&format!("l1_vs_reference_{t}"), l1);
                }
                manifest.note("reference_dt", reference.dt);
                manifest.note("free_energy_max_increase", reference.energy.max_increase);
            }
        }
        Scenario::Sweep => {
            let res = sweep_diffusion(cfg)?;
            manifest.write(out_dir, "sweep.csv", |w| output::write_sweep(w, &res))?;
            manifest.refinement = res.refined_bracket;
        }
        Scenario::ConvergenceM | Scenario::ConvergenceN | Scenario::ConvergenceS => {
            let axis = match cfg.scenario {
                Scenario::ConvergenceM => ConvergenceAxis::M,
                Scenario::ConvergenceN => ConvergenceAxis::N,
                _ => ConvergenceAxis::S,
            };
            let table = convergence_study(cfg, axis)?;
            manifest.write(out_dir, "convergence.csv", |w| output::write_convergence(w, &table))?;
        }
        Scenario::Stationary => {
            let rep = stationary_report(cfg.model.alpha, cfg.model.d_bar)?;
            manifest.write(out_dir, "stationary.csv", |w| output::write_stationary(w, &rep))?;
        }
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.save(out_dir)?;
    Ok(manifest)
}
