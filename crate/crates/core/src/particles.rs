//! Particle ensemble carrying chaos coefficients, and its Euler–Maruyama
//! integrator with subsampled interactions.
//!
//! Each particle i stores x̂_{i,0..M} and v̂_{i,0..M}. One step applies
//!
//! ```text
//! x̂_{i,h} += Δt v̂_{i,h}
//! v̂_{i,h} += Δt Σ_k s_hk(v_i) v̂_{i,k}
//!          + Δt/S Σ_{j∈J} Σ_k p_hk^{ij} (v̂_{j,k} − v̂_{i,k})
//!          + d_h √Δt η_i
//! ```
//!
//! with a single standard normal η_i per particle shared by every mode: the
//! modes are projections of one Brownian path, so the noise amplitude per mode
//! is d_h = E[√(2D(θ)) Φ_h] and nothing else. The Galerkin products are formed
//! on quadrature nodes: the particle's chaos expansion is evaluated at each θ_q,
//! the pointwise force is applied there and the result projected back. That
//! is algebraically the same as multiplying by s_hk and p_hk^{ij} but costs
//! O(nM) rather than O(nM²) per pair.
//!
//! All forces read the pre-step state, and every particle owns its random
//! streams, so results do not depend on the number of threads.

use std::io::Write;

use log::warn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::{ChaosVector, NodalBasis};
use crate::error::{Error, Result};
use crate::params::{wrap, GalerkinMatrices, KernelSpec, UncertainScalar};
use crate::rng::{stream, Purpose};

/// Periodic position interval [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicDomain {
    pub lo: f64,
    pub hi: f64,
}

impl PeriodicDomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "periodic domain needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn period(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        self.lo + wrap(x - self.lo, self.period())
    }
}

/// Time stepping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Interaction partners per particle, 1 ≤ S ≤ N.
    pub subsample: usize,
    pub domain: Option<PeriodicDomain>,
    /// Space-homogeneous problem: positions are not transported.
    pub homogeneous: bool,
}

impl StepConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.subsample == 0 || self.subsample > n {
            return Err(Error::InvalidParameter(format!(
                "subsample size must satisfy 1 <= S <= N = {n}, got {}",
                self.subsample
            )));
        }
        if self.dt > 0.1 {
            warn!("time step {} is large for the self-propulsion drift", self.dt);
        }
        Ok(())
    }
}

/// Parameters of the drift and noise, plus the tabulated basis.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub kernel: KernelSpec,
    pub galerkin: GalerkinMatrices,
}

impl Dynamics {
    pub fn new(
        alpha: &UncertainScalar,
        diffusion: &UncertainScalar,
        kernel: KernelSpec,
        table: NodalBasis,
    ) -> Result<Self> {
        kernel.validate()?;
        Ok(Self {
            kernel,
            galerkin: GalerkinMatrices::new(alpha, diffusion, table)?,
        })
    }

    pub fn table(&self) -> &NodalBasis {
        &self.galerkin.table
    }

    pub fn modes(&self) -> usize {
        self.galerkin.table.modes()
    }
}

/// Gaussian initial data, deterministic in θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInit {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_v: f64,
    pub sigma_v: f64,
}

/// N particles with M + 1 chaos modes per coordinate.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    n: usize,
    modes: usize,
    x: Vec<f64>,
    v: Vec<f64>,
    time: f64,
    steps: usize,
    seed: u64,
    brownian: Vec<ChaCha8Rng>,
    subsample: Vec<ChaCha8Rng>,
}

impl ParticleEnsemble {
    /// Builds an ensemble from explicit particle-major mode arrays.
    pub fn from_modes(
        x: Vec<f64>,
        v: Vec<f64>,
        max_degree: usize,
        seed: u64,
    ) -> Result<Self> {
        let modes = max_degree + 1;
        if v.is_empty() || v.len() % modes != 0 || x.len() != v.len() {
            return Err(Error::InvalidParameter(format!(
                "mode arrays must be non-empty with length N*(M+1); got x={}, v={}, M+1={modes}",
                x.len(),
                v.len()
            )));
        }
        let n = v.len() / modes;
        Ok(Self {
            n,
            modes,
            x,
            v,
            time: 0.0,
            steps: 0,
            seed,
            brownian: (0..n).map(|i| stream(seed, Purpose::Brownian, i as u64)).collect(),
            subsample: (0..n).map(|i| stream(seed, Purpose::Subsample, i as u64)).collect(),
        })
    }

    /// Samples mode 0 of positions and velocities from independent normals;
    /// higher modes start at zero.
    pub fn init_gaussian(
        n: usize,
        max_degree: usize,
        init: GaussianInit,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ensemble needs N >= 1".into()));
        }
        if !(init.sigma_x >= 0.0) || !(init.sigma_v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need sigma_x >= 0 and sigma_v > 0, got {} and {}",
                init.sigma_x, init.sigma_v
            )));
        }
        let modes = max_degree + 1;
        let mut x = vec![0.0; n * modes];
        let mut v = vec![0.0; n * modes];
        for i in 0..n {
            let mut rng = stream(seed, Purpose::InitialData, i as u64);
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zv: f64 = StandardNormal.sample(&mut rng);
            x[i * modes] = init.mu_x + init.sigma_x * zx;
            v[i * modes] = init.mu_v + init.sigma_v * zv;
        }
        Self::from_modes(x, v, max_degree, seed)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_degree(&self) -> usize {
        self.modes - 1
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn position_modes(&self, i: usize) -> &[f64] {
        &self.x[i * self.modes..(i + 1) * self.modes]
    }

    pub fn velocity_modes(&self, i: usize) -> &[f64] {
        &self.v[i * self.modes..(i + 1) * self.modes]
    }

    /// Position and velocity of every particle at each node of `table`,
    /// particle-major.
    pub fn nodal_states(&self, table: &NodalBasis) -> (Vec<f64>, Vec<f64>) {
        let nq = table.nodes();
        let mut xs = vec![0.0; self.n * nq];
        let mut vs = vec![0.0; self.n * nq];
        xs.par_chunks_mut(nq)
            .zip(vs.par_chunks_mut(nq))
            .enumerate()
            .for_each(|(i, (xo, vo))| {
                table.to_nodes(self.position_modes(i), xo);
                table.to_nodes(self.velocity_modes(i), vo);
            });
        (xs, vs)
    }

    /// Ensemble average of each velocity mode.
    pub fn mean_velocity_modes(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.modes];
        for row in self.v.chunks_exact(self.modes) {
            for (a, b) in u.iter_mut().zip(row) {
                *a += b;
            }
        }
        let inv = 1.0 / self.n as f64;
        u.iter_mut().for_each(|a| *a *= inv);
        u
    }

    /// One Euler–Maruyama step.
    pub fn step(&mut self, cfg: &StepConfig, dynamics: &Dynamics) -> Result<()> {
        cfg.validate(self.n)?;
        if dynamics.modes() != self.modes {
            return Err(Error::InvalidParameter(format!(
                "dynamics built for {} modes, ensemble has {}",
                dynamics.modes(),
                self.modes
            )));
        }
        let m = self.modes;
        let n = self.n;
        let table = dynamics.table();
        let nq = table.nodes();
        let g = &dynamics.galerkin;
        let dt = cfg.dt;
        let sqrt_dt = dt.sqrt();
        let s = cfg.subsample;
        let all_to_all = s == n;
        let period = cfg.domain.map(|d| d.period());

        let kernel = dynamics.kernel;
        let modal_interaction = kernel.is_homogeneous();
        let (x_nodal, v_nodal) = if modal_interaction {
            (Vec::new(), Vec::new())
        } else {
            self.nodal_states(table)
        };
        let mean_modes = if modal_interaction && all_to_all {
            self.mean_velocity_modes()
        } else {
            Vec::new()
        };

        let x_old = &self.x;
        let v_old = &self.v;
        let mut x_new = x_old.clone();
        let mut v_new = v_old.clone();

        struct Scratch {
            sampler: Subsampler,
            partners: Vec<u32>,
            vq: Vec<f64>,
            force: Vec<f64>,
            drift: Vec<f64>,
            inter: Vec<f64>,
        }

        v_new
            .par_chunks_mut(m)
            .zip(x_new.par_chunks_mut(m))
            .zip(self.brownian.par_iter_mut())
            .zip(self.subsample.par_iter_mut())
            .enumerate()
            .for_each_init(
                || Scratch {
                    sampler: Subsampler::new(n),
                    partners: Vec::with_capacity(s),
                    vq: vec![0.0; nq],
                    force: vec![0.0; nq],
                    drift: vec![0.0; m],
                    inter: vec![0.0; m],
                },
                |sc, (i, (((v_row, x_row), brown), sub_rng))| {
                    let vi = &v_old[i * m..(i + 1) * m];

                    // self-propulsion α(θ)(1 − v²)v on the nodes
                    if modal_interaction {
                        table.to_nodes(vi, &mut sc.vq);
                    } else {
                        sc.vq.copy_from_slice(&v_nodal[i * nq..(i + 1) * nq]);
                    }
                    for ((f, &vq), &a) in sc.force.iter_mut().zip(&sc.vq).zip(&g.alpha_nodal) {
                        *f = a * (1.0 - vq * vq) * vq;
                    }

                    sc.inter.iter_mut().for_each(|c| *c = 0.0);
                    if modal_interaction && all_to_all {
                        for ((c, &u), &v) in sc.inter.iter_mut().zip(&mean_modes).zip(vi) {
                            *c = u - v;
                        }
                    } else {
                        sc.sampler.sample_into(s, sub_rng, &mut sc.partners);
                        let inv_s = 1.0 / s as f64;
                        if modal_interaction {
                            for &j in &sc.partners {
                                let vj = &v_old[j as usize * m..(j as usize + 1) * m];
                                for ((c, &a), &b) in sc.inter.iter_mut().zip(vj).zip(vi) {
                                    *c += a - b;
                                }
                            }
                            sc.inter.iter_mut().for_each(|c| *c *= inv_s);
                        } else {
                            let xi = &x_nodal[i * nq..(i + 1) * nq];
                            for &j in &sc.partners {
                                let j = j as usize;
                                if j == i {
                                    continue;
                                }
                                let xj = &x_nodal[j * nq..(j + 1) * nq];
                                let vj = &v_nodal[j * nq..(j + 1) * nq];
                                for q in 0..nq {
                                    let p = kernel.eval(xi[q], xj[q], period);
                                    sc.force[q] += inv_s * p * (vj[q] - sc.vq[q]);
                                }
                            }
                        }
                    }

                    table.project_nodal(&sc.force, &mut sc.drift);
                    let eta: f64 = StandardNormal.sample(brown);
                    for h in 0..m {
                        v_row[h] = vi[h]
                            + dt * (sc.drift[h] + sc.inter[h])
                            + g.noise.0[h] * sqrt_dt * eta;
                    }
                    if !cfg.homogeneous {
                        for h in 0..m {
                            x_row[h] += dt * vi[h];
                        }
                        if let Some(d) = cfg.domain {
                            x_row[0] = d.wrap(x_row[0]);
                        }
                    }
                },
            );

        for (idx, (&xv, &vv)) in x_new.iter().zip(&v_new).enumerate() {
            if !vv.is_finite() || !xv.is_finite() {
                return Err(Error::NonFiniteState {
                    step: self.steps + 1,
                    particle: idx / m,
                    field: if vv.is_finite() { "position" } else { "velocity" },
                    mode: idx % m,
                });
            }
        }
        self.x = x_new;
        self.v = v_new;
        self.steps += 1;
        self.time = self.steps as f64 * dt;
        Ok(())
    }

    /// Mean velocity u(θ) and temperature T(θ) at one point of the support.
    pub fn moments(&self, theta: f64) -> Result<(f64, f64)> {
        let basis = crate::basis::OrthonormalBasis::new(self.max_degree());
        let mut phi = vec![0.0; self.modes];
        basis.eval(0, theta)?;
        basis.eval_all(theta, &mut phi);
        let vals: Vec<f64> = self
            .v
            .chunks_exact(self.modes)
            .map(|row| crate::basis::dot(row, &phi))
            .collect();
        Ok(mean_and_spread(&vals))
    }

    /// Chaos modes of the mean velocity (exact average of v̂) and of the
    /// temperature (projection of T(θ) with the table's rule).
    pub fn moment_modes(&self, table: &NodalBasis) -> Result<(ChaosVector, ChaosVector)> {
        if table.modes() != self.modes {
            return Err(Error::InvalidParameter(format!(
                "table has {} modes, ensemble has {}",
                table.modes(),
                self.modes
            )));
        }
        if table.nodes() < 2 * self.modes {
            return Err(Error::InsufficientQuadrature {
                have: table.nodes(),
                need: 2 * self.modes,
            });
        }
        let u_hat = self.mean_velocity_modes();
        let nq = table.nodes();
        let mut sum = vec![0.0; nq];
        let mut sum_sq = vec![0.0; nq];
        let mut buf = vec![0.0; nq];
        for row in self.v.chunks_exact(self.modes) {
            table.to_nodes(row, &mut buf);
            for q in 0..nq {
                sum[q] += buf[q];
                sum_sq[q] += buf[q] * buf[q];
            }
        }
        let inv = 1.0 / self.n as f64;
        let temps: Vec<f64> = sum
            .iter()
            .zip(&sum_sq)
            .map(|(&s1, &s2)| {
                let u = s1 * inv;
                (s2 * inv - u * u).max(0.0)
            })
            .collect();
        let mut t_hat = vec![0.0; self.modes];
        table.project_nodal(&temps, &mut t_hat);
        Ok((ChaosVector(u_hat), ChaosVector(t_hat)))
    }

    /// CSV dump: a `#` header with N, M, t and seed, then one row per particle
    /// holding x̂_0..x̂_M followed by v̂_0..v̂_M.
    pub fn write_snapshot_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# N={},M={},t={},seed={}",
            self.n,
            self.max_degree(),
            self.time,
            self.seed
        )?;
        let mut header = vec!["particle".to_string()];
        header.extend((0..self.modes).map(|h| format!("x{h}")));
        header.extend((0..self.modes).map(|h| format!("v{h}")));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut line = i.to_string();
            for c in self.position_modes(i).iter().chain(self.velocity_modes(i)) {
                line.push(',');
                line.push_str(&format!("{c:e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Two-pass mean and population variance.
fn mean_and_spread(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Uniform sampling without replacement by a partial Fisher–Yates shuffle
/// over a scratch permutation that is restored after every draw.
#[derive(Debug, Clone)]
pub struct Subsampler {
    perm: Vec<u32>,
    swaps: Vec<u32>,
}

impl Subsampler {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize, "population too large");
        Self {
            perm: (0..n as u32).collect(),
            swaps: Vec::new(),
        }
    }

    pub fn population(&self) -> usize {
        self.perm.len()
    }

    /// Writes `s` distinct indices into `out`. `s == N` returns 0..N in order
    /// without consuming randomness.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, s: usize, rng: &mut R, out: &mut Vec<u32>) {
        let n = self.perm.len();
        assert!(s <= n, "subsample larger than population");
        out.clear();
        if s == n {
            out.extend(0..n as u32);
            return;
        }
        self.swaps.clear();
        for k in 0..s {
            let j = rng.random_range(k..n);
            self.perm.swap(k, j);
            self.swaps.push(j as u32);
            out.push(self.perm[k]);
        }
        for k in (0..s).rev() {
            self.perm.swap(k, self.swaps[k] as usize);
        }
    }
}

/// S distinct particle indices drawn uniformly from 0..N.
pub fn subsample_indices<R: Rng + ?Sized>(s: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!(
            "subsample size must satisfy 1 <= S <= N = {n}, got {s}"
        )));
    }
    let mut out = Vec::with_capacity(s);
    Subsampler::new(n).sample_into(s, rng, &mut out);
    Ok(out.into_iter().map(|j| j as usize).collect())
}

/// Hook called on the ensemble while [`run`] advances it.
pub trait Observer {
    fn observe(&mut self, ens: &ParticleEnsemble, dynamics: &Dynamics) -> Result<()>;
}

/// Records (t, û, T̂) at every observation.
#[derive(Debug, Default, Clone)]
pub struct MomentRecorder {
    pub records: Vec<MomentRecord>,
}

#[derive(Debug, Clone)]
pub struct MomentRecord {
    pub time: f64,
    pub mean_velocity: ChaosVector,
    pub temperature: ChaosVector,
}

impl Observer for MomentRecorder {
    fn observe(&mut self, ens: &ParticleEnsemble, dynamics: &Dynamics) -> Result<()> {
        let (u, t) = ens.moment_modes(dynamics.table())?;
        self.records.push(MomentRecord {
            time: ens.time(),
            mean_velocity: u,
            temperature: t,
        });
        Ok(())
    }
}

/// Number of steps of size `dt` that reach `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "final time must be non-negative, got {t_final}"
        )));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} is not a multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Advances the ensemble to `t_final`, calling the observers before the first
/// step, every `observe_every` steps, and after the last one.
pub fn run(
    ens: &mut ParticleEnsemble,
    cfg: &StepConfig,
    dynamics: &Dynamics,
    t_final: f64,
    observe_every: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<()> {
    cfg.validate(ens.len())?;
    let n_steps = step_count(t_final, cfg.dt)?;
    for o in observers.iter_mut() {
        o.observe(ens, dynamics)?;
    }
    for k in 1..=n_steps {
        ens.step(cfg, dynamics)?;
        let due = observe_every > 0 && k % observe_every == 0;
        if due || k == n_steps {
            for o in observers.iter_mut() {
                o.observe(ens, dynamics)?;
            }
        }
    }
    Ok(())
}
