use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod config;
mod run;

use run::{Command, ConfigFailure, Options};

/// Corridor refueling and charging infrastructure planner.
#[derive(Parser)]
#[command(name = "corridor", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use exhaustive search instead of the genetic algorithm.
    #[arg(long, global = true)]
    exact: bool,
    /// Station mask for simulate: hex, "all" or "none".
    #[arg(long, global = true)]
    mask: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the configuration and every input it references.
    Validate,
    /// Snap candidate sites to routes and write them as GeoJSON.
    Candidates,
    /// Simulate the fleet under a station mask.
    Simulate,
    /// Choose the smallest station set that strands no trip.
    Optimize,
    /// Completion rate against station budget.
    Curve,
    /// Size dispensers or chargers from the last simulate/optimize ledger.
    Size,
    /// Emissions by pathway and refuel rates by powertrain.
    Impact,
    /// Year-by-year station build-out under rising adoption.
    Roadmap,
}

fn config_error(diags: &config::Diagnostics) -> ExitCode {
    let body = json!({"error": {"kind": "config", "diagnostics": diags.0}});
    eprintln!("{body}");
    ExitCode::from(2)
}

fn runtime_error(e: &anyhow::Error) -> ExitCode {
    let body = json!({"error": {"kind": "runtime", "message": format!("{e:#}")}});
    eprintln!("{body}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config_path) = cli.config.clone() else {
        let mut d = config::Diagnostics::default();
        d.0.push(config::Diagnostic {
            pointer: String::new(),
            message: "--config is required".into(),
        });
        return config_error(&d);
    };
    let bytes = match std::fs::read(&config_path) {
        Ok(b) => b,
        Err(e) => {
            let mut d = config::Diagnostics::default();
            d.0.push(config::Diagnostic {
                pointer: String::new(),
                message: format!("{}: {e}", config_path.display()),
            });
            return config_error(&d);
        }
    };
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cfg = match config::parse(&String::from_utf8_lossy(&bytes), &base, cli.seed) {
        Ok(c) => c,
        Err(d) => return config_error(&d),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return runtime_error(&e.into()),
    };

    let cmd = match cli.command {
        Cmd::Validate => {
            return match pool.install(|| config::load(&cfg)) {
                Ok(loaded) => {
                    let summary = json!({
                        "valid": true,
                        "routes": loaded.routes.len(),
                        "vehicle_classes": loaded.classes.len(),
                        "candidates": loaded.candidates.len(),
                        "trips": loaded.trips.len(),
                        "seed": cfg.seed,
                    });
                    println!("{summary}");
                    ExitCode::SUCCESS
                }
                Err(d) => config_error(&d),
            };
        }
        Cmd::Candidates => Command::Candidates,
        Cmd::Simulate => Command::Simulate,
        Cmd::Optimize => Command::Optimize,
        Cmd::Curve => Command::Curve,
        Cmd::Size => Command::Size,
        Cmd::Impact => Command::Impact,
        Cmd::Roadmap => Command::Roadmap,
    };
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let opts = Options {
        exact: cli.exact,
        mask: cli.mask.clone(),
    };
    match pool.install(|| run::run(cmd, &cfg, &bytes, &base, &out_dir, &opts)) {
        Ok(manifest) => {
            println!("{}", json!({"manifest": manifest.display().to_string()}));
            ExitCode::SUCCESS
        }
        Err(e) => match e.downcast_ref::<ConfigFailure>() {
            Some(f) => config_error(&f.0),
            None => runtime_error(&e),
        },
    }
}
