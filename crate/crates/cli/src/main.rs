//! Command-line front end: `geolorenz [--config F] [--out D] [--threads N] <command>`.
//!
//! Exit codes: 0 ok, 1 io, 2 config, 3 validate, 4 cones, 5 leaf,
//! 6 millefeuille, 7 spectrum, 8 pressure, 9 classify, 10 compare,
//! 11 missing upstream artifact.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use stages::{Ctx, Failure, Stage, EXIT_CONFIG, EXIT_IO};

#[derive(Parser)]
#[command(name = "geolorenz", version, about = "Geometric Lorenz map pipeline")]
struct Cli {
    /// Config file (key = value with [sections]); defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Whole pipeline, or one stage from cached artifacts with --stage.
    Run {
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    Validate,
    Cones,
    Leaf,
    Millefeuille,
    Spectrum,
    Pressure,
    Classify,
    Compare,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: EXIT_CONFIG, msg: format!("--threads: {e}") })?;
    }
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure { code: EXIT_IO, msg: format!("{}: {e}", p.display()) })?,
        None => String::new(),
    };
    let cfg = RunConfig::parse(&text).map_err(|msg| Failure { code: EXIT_CONFIG, msg: format!("config: {msg}") })?;
    let compare = cfg.compare_delta_hat.is_some();
    let ctx = Ctx::new(cfg, &cli.out)?;
    let stages: Vec<Stage> = match cli.cmd {
        Cmd::Run { stage: Some(s) } => vec![s],
        Cmd::Run { stage: None } => {
            let mut v = Stage::PIPELINE.to_vec();
            if compare {
                v.push(Stage::Compare);
            }
            v
        }
        Cmd::Validate => vec![Stage::Validate],
        Cmd::Cones => vec![Stage::Cones],
        Cmd::Leaf => vec![Stage::Leaf],
        Cmd::Millefeuille => vec![Stage::Millefeuille],
        Cmd::Spectrum => vec![Stage::Spectrum],
        Cmd::Pressure => vec![Stage::Pressure],
        Cmd::Classify => vec![Stage::Classify],
        Cmd::Compare => vec![Stage::Compare],
    };
    for s in stages {
        ctx.run(s)?;
    }
    println!("{}", ctx.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
