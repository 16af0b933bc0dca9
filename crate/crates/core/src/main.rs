use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use nldpg::config::RunConfig;
use nldpg::driver::{format_sig, run_and_export};
use nldpg::error::ConfigError;
use nldpg::Error;

/// Nonlinear dPG solver for -div(phi(|grad u|) grad u) = f with adaptive
/// mesh refinement.
#[derive(Parser, Debug)]
#[command(name = "nldpg", version)]
struct Cli {
    /// Configuration file with `key = value` lines.
    config: Option<PathBuf>,
    /// square, lshape or a mesh file.
    #[arg(long)]
    problem: Option<String>,
    /// example-a, example-b or linear:<w>.
    #[arg(long)]
    model: Option<String>,
    /// uniform or adaptive.
    #[arg(long)]
    refine: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other configuration key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let overrides = [
        ("problem", cli.problem.clone()),
        ("model", cli.model.clone()),
        ("refine", cli.refine.clone()),
        ("theta", cli.theta.map(|t| t.to_string())),
        ("levels", cli.levels.map(|l| l.to_string())),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::Value { key: kv.clone(), msg: "expected KEY=VALUE".into() })?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(1);
        }
    };
    match run_and_export(&cfg) {
        Ok(out) => {
            for r in &out.records {
                println!("{:>3} {:>9} {:>2} eta {:<18} vmax {}", r.level, r.ndof, r.newton_iters, format_sig(r.eta), format_sig(r.vmax));
            }
            println!("results written to {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            error!("{}", f.error);
            match f.error {
                Error::Newton { .. } | Error::NewtonNotConverged { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
