use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qiup::io::config::{parse_config, RunConfig};
use qiup::scenario::{run_scenario, SCENARIOS};
use qiup::Error;

/// Simulate quantum imaging with undetected photons and measure resolution.
#[derive(Debug, Parser)]
#[command(name = "qiup", version)]
struct Cli {
    /// Run configuration (flat `key = value` file).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario to run; overrides the config.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write every phase-stepped frame as a grey map.
    #[arg(long)]
    emit_frames: bool,
    /// List scenarios and exit.
    #[arg(long)]
    list_scenarios: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::new(cli.scenario.as_deref().unwrap_or("image"))?,
    };
    if let Some(s) = &cli.scenario {
        cfg = cfg.with_scenario(s)?;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.acquisition.seed = s;
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Input("--threads must be positive".into()));
        }
        cfg.threads = Some(t);
    }
    cfg.emit_frames |= cli.emit_frames;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = build_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Input(e.to_string()))?;
    let summary = pool.install(|| run_scenario(&cfg))?;
    eprintln!(
        "{}: {} artifacts in {} ({:.2} s)",
        summary.scenario,
        summary.artifacts.len(),
        cfg.output_dir.display(),
        summary.elapsed.as_secs_f64()
    );
    for m in &summary.measurements {
        match m.theory {
            Some(t) => eprintln!("  {} = {:.6} {} (theory {:.6})", m.name, m.value, m.unit, t),
            None => eprintln!("  {} = {:.6} {}", m.name, m.value, m.unit),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.list_scenarios {
        for (name, what) in SCENARIOS {
            println!("{name:20} {what}");
        }
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
