//! Histogram reconstruction of densities from chaos-mode particles.

use std::io::Write;

use rayon::prelude::*;

use crate::basis::{NodalBasis, OrthonormalBasis, QuadratureRule};
use crate::error::{Error, Result};
use crate::particles::ParticleEnsemble;

/// Uniform cells on [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid axis needs lo < hi and at least one cell, got [{lo}, {hi}] with {cells}"
            )));
        }
        Ok(Self { lo, hi, cells })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        self.lo + (c as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|c| self.center(c)).collect()
    }

    #[inline]
    fn cell(&self, y: f64) -> Option<usize> {
        let k = ((y - self.lo) / self.width()).floor();
        if k >= 0.0 && k < self.cells as f64 {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// Phase-space grid; `x = None` means a velocity-only (homogeneous) grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub x: Option<Axis>,
    pub v: Axis,
    /// Wrap positions into the x-interval before binning.
    pub periodic_x: bool,
}

impl PhaseGrid {
    pub fn velocity(v: Axis) -> Self {
        Self { x: None, v, periodic_x: false }
    }

    pub fn phase(x: Axis, v: Axis, periodic_x: bool) -> Self {
        Self { x: Some(x), v, periodic_x }
    }

    pub fn x_cells(&self) -> usize {
        self.x.map_or(1, |a| a.cells)
    }

    pub fn len(&self) -> usize {
        self.x_cells() * self.v.cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Δx·Δv, or Δv on a velocity grid.
    pub fn cell_volume(&self) -> f64 {
        self.x.map_or(1.0, |a| a.width()) * self.v.width()
    }

    #[inline]
    fn index(&self, x: f64, v: f64) -> Option<usize> {
        let cv = self.v.cell(v)?;
        let cx = match self.x {
            None => 0,
            Some(ax) => {
                let x = if self.periodic_x {
                    ax.lo + crate::params::wrap(x - ax.lo, ax.hi - ax.lo)
                } else {
                    x
                };
                ax.cell(x)?
            }
        };
        Some(cx * self.v.cells + cv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Expectation,
    Variance,
    SampleAtTheta,
}

impl DensityKind {
    pub fn label(self) -> &'static str {
        match self {
            DensityKind::Expectation => "expectation",
            DensityKind::Variance => "variance",
            DensityKind::SampleAtTheta => "sample",
        }
    }
}

/// Cell values, x-major (row = x-cell, column = v-cell).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub kind: DensityKind,
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    /// Probability mass of particles that fell outside the grid.
    pub out_of_grid_mass: f64,
    pub time: f64,
}

impl DensityField {
    /// Σ values · cell volume.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Mean velocity of a velocity-only field, normalized by its mass.
    pub fn mean_velocity(&self) -> Result<f64> {
        if self.grid.x.is_some() {
            return Err(Error::InvalidParameter(
                "mean velocity needs a velocity-only field; take the marginal first".into(),
            ));
        }
        let c = self.grid.v.centers();
        let num: f64 = c.iter().zip(&self.values).map(|(v, f)| v * f).sum();
        let den: f64 = self.values.iter().sum();
        if den <= 0.0 {
            return Err(Error::InvalidParameter("field has no mass".into()));
        }
        Ok(num / den)
    }

    /// CSV dump: header rows (kind, time, grids, out-of-grid mass), then one
    /// row of N_v values per x-cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,{}", self.kind.label())?;
        writeln!(w, "time,{}", self.time)?;
        match self.grid.x {
            Some(a) => writeln!(w, "x_grid,{},{},{},{}", a.lo, a.hi, a.cells, self.grid.periodic_x)?,
            None => writeln!(w, "x_grid,none")?,
        }
        let v = self.grid.v;
        writeln!(w, "v_grid,{},{},{}", v.lo, v.hi, v.cells)?;
        writeln!(w, "out_of_grid_mass,{:e}", self.out_of_grid_mass)?;
        for row in self.values.chunks(v.cells) {
            let line: Vec<String> = row.iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn histogram(xs: &[f64], vs: &[f64], grid: &PhaseGrid) -> (Vec<f64>, f64) {
    let n = vs.len();
    let weight = 1.0 / (n as f64 * grid.cell_volume());
    let mut values = vec![0.0; grid.len()];
    let mut outside = 0usize;
    for i in 0..n {
        let x = if xs.is_empty() { 0.0 } else { xs[i] };
        match grid.index(x, vs[i]) {
            Some(k) => values[k] += weight,
            None => outside += 1,
        }
    }
    (values, outside as f64 / n as f64)
}

fn check_grid(grid: &PhaseGrid) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    Ok(())
}

/// Histogram of the particles' realizations at a fixed θ.
pub fn density_at_theta(ens: &ParticleEnsemble, grid: &PhaseGrid, theta: f64) -> Result<DensityField> {
    check_grid(grid)?;
    let basis = OrthonormalBasis::new(ens.max_degree());
    basis.eval(0, theta)?;
    let mut phi = vec![0.0; ens.modes()];
    basis.eval_all(theta, &mut phi);
    let eval = |row: &[f64]| row.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>();
    let m = ens.modes();
    let vs: Vec<f64> = ens.velocities().chunks_exact(m).map(eval).collect();
    let xs: Vec<f64> = if grid.x.is_some() {
        ens.positions().chunks_exact(m).map(eval).collect()
    } else {
        Vec::new()
    };
    let (values, out) = histogram(&xs, &vs, grid);
    Ok(DensityField {
        kind: DensityKind::SampleAtTheta,
        grid: *grid,
        values,
        out_of_grid_mass: out,
        time: ens.time(),
    })
}

/// Histograms at every node of `rule`, computed in parallel.
fn nodal_histograms(
    ens: &ParticleEnsemble,
    grid: &PhaseGrid,
    rule: &QuadratureRule,
) -> Result<Vec<(Vec<f64>, f64)>> {
    check_grid(grid)?;
    let table = NodalBasis::new(OrthonormalBasis::new(ens.max_degree()), rule.clone())?;
    let (xn, vn) = ens.nodal_states(&table);
    let nq = rule.len();
    let n = ens.len();
    Ok((0..nq)
        .into_par_iter()
        .map(|q| {
            let vs: Vec<f64> = (0..n).map(|i| vn[i * nq + q]).collect();
            let xs: Vec<f64> = if grid.x.is_some() {
                (0..n).map(|i| xn[i * nq + q]).collect()
            } else {
                Vec::new()
            };
            histogram(&xs, &vs, grid)
        })
        .collect())
}

fn weighted_mean(hists: &[(Vec<f64>, f64)], rule: &QuadratureRule, cells: usize) -> (Vec<f64>, f64) {
    let mut mean = vec![0.0; cells];
    let mut out = 0.0;
    for ((h, o), &w) in hists.iter().zip(rule.weights()) {
        for (m, v) in mean.iter_mut().zip(h) {
            *m += w * v;
        }
        out += w * o;
    }
    (mean, out)
}

/// E[f] ≈ Σ_q w_q f(θ_q), each f(θ_q) a histogram.
pub fn expected_density(ens: &ParticleEnsemble, grid: &PhaseGrid, rule: &QuadratureRule) -> Result<DensityField> {
    let hists = nodal_histograms(ens, grid, rule)?;
    let (values, out) = weighted_mean(&hists, rule, grid.len());
    Ok(DensityField {
        kind: DensityKind::Expectation,
        grid: *grid,
        values,
        out_of_grid_mass: out,
        time: ens.time(),
    })
}

/// Var[f] ≈ Σ_q w_q (f(θ_q) − E[f])² per cell.
pub fn variance_density(ens: &ParticleEnsemble, grid: &PhaseGrid, rule: &QuadratureRule) -> Result<DensityField> {
    let hists = nodal_histograms(ens, grid, rule)?;
    let (mean, _) = weighted_mean(&hists, rule, grid.len());
    let mut values = vec![0.0; grid.len()];
    for ((h, _), &w) in hists.iter().zip(rule.weights()) {
        for ((acc, v), m) in values.iter_mut().zip(h).zip(&mean) {
            *acc += w * (v - m) * (v - m);
        }
    }
    Ok(DensityField {
        kind: DensityKind::Variance,
        grid: *grid,
        values,
        out_of_grid_mass: 0.0,
        time: ens.time(),
    })
}

/// ∫ f dx over the x-cells.
pub fn velocity_marginal(field: &DensityField) -> Result<DensityField> {
    let ax = field.grid.x.ok_or_else(|| {
        Error::InvalidParameter("velocity marginal needs a 2-D phase-space field".into())
    })?;
    let nv = field.grid.v.cells;
    let mut values = vec![0.0; nv];
    for row in field.values.chunks_exact(nv) {
        for (a, b) in values.iter_mut().zip(row) {
            *a += b * ax.width();
        }
    }
    Ok(DensityField {
        kind: field.kind,
        grid: PhaseGrid::velocity(field.grid.v),
        values,
        out_of_grid_mass: field.out_of_grid_mass,
        time: field.time,
    })
}
