//! CSV writers and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::{ConvergenceTable, StationaryReport, SweepResult};
use crate::error::Result;
use crate::particles::MomentRecord;

/// Describes one run: the resolved config, what was written and a few
/// scalar diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub config: ScenarioConfig,
    pub outputs: Vec<String>,
    /// D̄ interval refined by a sweep, if any.
    pub refinement: Option<(f64, f64)>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            scenario: cfg.scenario.name().to_string(),
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            wall_time_s: 0.0,
            config: cfg.clone(),
            outputs: Vec::new(),
            refinement: None,
            diagnostics: BTreeMap::new(),
        }
    }

    /// Creates `dir/name`, fills it with `body` and records it.
    pub fn write(
        &mut self,
        dir: &Path,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Time formatted for file names: `50`, `0.5`, `12.25`.
pub fn time_label(t: f64) -> String {
    let r = (t * 1e9).round() / 1e9;
    format!("{r}")
}

pub fn write_sweep<W: Write>(w: &mut W, res: &SweepResult) -> Result<()> {
    writeln!(w, "Dbar,E_u,Std_u")?;
    for r in &res.rows {
        writeln!(w, "{},{:e},{:e}", r.d_bar, r.e_u, r.std_u)?;
    }
    Ok(())
}

pub fn write_convergence<W: Write>(w: &mut W, table: &ConvergenceTable) -> Result<()> {
    writeln!(w, "axis,error,stderr")?;
    for r in &table.rows {
        writeln!(w, "{},{:e},{:e}", r.value, r.error, r.stderr)?;
    }
    Ok(())
}

/// One row per record: time, E[u], Std[u], E[T], Std[T].
pub fn write_moments<W: Write>(w: &mut W, records: &[MomentRecord]) -> Result<()> {
    writeln!(w, "t,E_u,Std_u,E_T,Std_T")?;
    for r in records {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e}",
            time_label(r.time),
            r.mean_velocity.expectation(),
            r.mean_velocity.std_dev(),
            r.temperature.expectation(),
            r.temperature.std_dev()
        )?;
    }
    Ok(())
}

pub fn write_stationary<W: Write>(w: &mut W, rep: &StationaryReport) -> Result<()> {
    writeln!(w, "alpha,D,u,residual,slope_at_zero")?;
    writeln!(
        w,
        "{},{},{:e},{:e},{:e}",
        rep.alpha, rep.d, rep.u, rep.residual, rep.slope_at_zero
    )?;
    Ok(())
}
