use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use flockuq::experiments::{run_scenario, stationary_report, Scenario, ScenarioConfig};
use flockuq::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "kebab-case")]
enum Command {
    Homogeneous,
    Sweep,
    ConvergenceM,
    ConvergenceN,
    ConvergenceS,
    InhomLocal,
    InhomCs,
    Stationary,
}

/// Particle stochastic-Galerkin experiments for flocking with uncertain parameters.
#[derive(Debug, Parser)]
#[command(name = "flockuq", version)]
struct Cli {
    scenario: Command,
    /// JSON scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Self-propulsion strength for `stationary` without a config.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Diffusion for `stationary` without a config.
    #[arg(long = "D", allow_negative_numbers = true)]
    diffusion: Option<f64>,
}

fn scenario_of(c: Command) -> Scenario {
    match c {
        Command::Homogeneous => Scenario::Homogeneous,
        Command::Sweep => Scenario::Sweep,
        Command::ConvergenceM => Scenario::ConvergenceM,
        Command::ConvergenceN => Scenario::ConvergenceN,
        Command::ConvergenceS => Scenario::ConvergenceS,
        Command::InhomLocal => Scenario::InhomLocal,
        Command::InhomCs => Scenario::InhomCs,
        Command::Stationary => Scenario::Stationary,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let scenario = scenario_of(cli.scenario);
    if scenario == Scenario::Stationary && cli.config.is_none() {
        let alpha = cli.alpha.unwrap_or(1.0);
        let d = cli
            .diffusion
            .ok_or_else(|| Error::Config("stationary needs --D or --config".into()))?;
        let rep = stationary_report(alpha, d).map_err(|e| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        })?;
        println!("alpha = {}", rep.alpha);
        println!("D = {}", rep.d);
        println!("u = {}", rep.u);
        println!("residual = {:e}", rep.residual);
        println!("G'(0) = {}", rep.slope_at_zero);
        return Ok(());
    }
    let path = cli
        .config
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = ScenarioConfig::load(&path)?;
    if cfg.scenario != scenario {
        return Err(Error::Config(format!(
            "config describes scenario `{}`, command line asks for `{}`",
            cfg.scenario.name(),
            scenario.name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
    let manifest = run_scenario(&cfg, &out)?;
    for name in &manifest.outputs {
        println!("{}", out.join(name).display());
    }
    for (k, v) in &manifest.diagnostics {
        println!("{k} = {v}");
    }
    if let Some((a, b)) = manifest.refinement {
        println!("refined bracket = [{a}, {b}]");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
