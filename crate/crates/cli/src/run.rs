//! Subcommand execution and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use corridor_core::impact::{impact_report, pathway_ranking, refuel_rates};
use corridor_core::io as cio;
use corridor_core::siting::{
    completion_curve_with, exhaustive_optimize, ga_optimize, rollout, SearchMethod, MAX_EXHAUSTIVE_CANDIDATES,
};
use corridor_core::sizing::{charge_stats, size_network};
use corridor_core::trip::simulate_fleet;
use corridor_core::{AdoptionMode, FleetLedger, Scenario, StationMask};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{self, Loaded, ScenarioConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Candidates,
    Simulate,
    Optimize,
    Curve,
    Size,
    Impact,
    Roadmap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Candidates => "candidates",
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Curve => "curve",
            Command::Size => "size",
            Command::Impact => "impact",
            Command::Roadmap => "roadmap",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub exact: bool,
    pub mask: Option<String>,
}

#[derive(Serialize)]
struct Manifest {
    tool_version: &'static str,
    subcommand: &'static str,
    seed: u64,
    config_hash: String,
    options: BTreeMap<&'static str, Value>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files in memory so they can be digested and written together.
struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.add(name, text);
        Ok(())
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<(), cio::IoError>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }
}

fn relative(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn scenario(cfg: &ScenarioConfig, loaded: &Loaded) -> Result<Scenario> {
    Ok(Scenario::new(
        loaded.routes.clone(),
        loaded.classes.clone(),
        loaded.candidates.clone(),
        loaded.trips.clone(),
        cfg.speed_mph,
    )?)
}

fn ledger_outputs(out: &mut Outputs, ledger: &FleetLedger) -> Result<()> {
    out.csv("ledger.csv", |w| cio::write_ledger_csv(w, ledger))?;
    out.csv("trips.csv", |w| cio::write_trip_results_csv(w, &ledger.trips))?;
    out.json("ledger.json", ledger)
}

/// Executes one subcommand and writes its outputs plus `manifest_<name>.json`.
/// Returns the path of the manifest.
pub fn run(
    cmd: Command,
    cfg: &ScenarioConfig,
    config_bytes: &[u8],
    base: &Path,
    out_dir: &Path,
    opts: &Options,
) -> Result<PathBuf> {
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: BTreeMap::new(),
    };
    let mut inputs: Vec<PathBuf> = Vec::new();
    let mut options = BTreeMap::new();

    let load = || -> Result<Loaded> {
        config::load(cfg).map_err(|d| anyhow::Error::new(ConfigFailure(d)))
    };

    match cmd {
        Command::Candidates => {
            let loaded = load()?;
            inputs = loaded.inputs.clone();
            out.json("candidates.geojson", &cio::candidates_geojson(&loaded.candidates))?;
        }
        Command::Simulate => {
            let loaded = load()?;
            inputs = loaded.inputs.clone();
            let n = loaded.candidates.len();
            let mask_text = opts.mask.clone().unwrap_or_else(|| "all".into());
            let mask = StationMask::parse(&mask_text, n)?;
            options.insert("mask", json!(mask.to_hex()));
            let ledger = simulate_fleet(
                &loaded.trips,
                &loaded.routes,
                &loaded.classes,
                &mask,
                &loaded.candidates,
                cfg.speed_mph,
            )?;
            ledger_outputs(&mut out, &ledger)?;
            out.json(
                "simulate_summary.json",
                &json!({
                    "mask_hex": mask.to_hex(),
                    "station_count": mask.popcount(),
                    "total_trips": ledger.total_trips,
                    "completed_trips": ledger.completed_trips,
                    "stranded_count": ledger.stranded.len(),
                    "completion_rate": ledger.completion_rate,
                    "unit": ledger.unit,
                }),
            )?;
        }
        Command::Optimize => {
            let loaded = load()?;
            inputs = loaded.inputs.clone();
            options.insert("exact", json!(opts.exact));
            let sc = scenario(cfg, &loaded)?;
            let solution = if opts.exact {
                exhaustive_optimize(&sc)?
            } else {
                ga_optimize(&sc, &cfg.ga)?
            };
            out.json("solution.geojson", &cio::solution_geojson(&loaded.candidates, &solution))?;
            out.json("summary.json", &cio::solution_summary(&solution, cfg.seed))?;
            ledger_outputs(&mut out, &solution.ledger)?;
        }
        Command::Curve => {
            let loaded = load()?;
            inputs = loaded.inputs.clone();
            options.insert("exact", json!(opts.exact));
            let sc = scenario(cfg, &loaded)?;
            let n = sc.candidate_count();
            let ks = cfg.curve_k_values.clone().unwrap_or_else(|| (0..=n).rev().collect());
            let curve = completion_curve_with(&sc, &method(cfg, opts, n)?, &ks)?;
            out.csv("curve.csv", |w| cio::write_curve_csv(w, &curve))?;
        }
        Command::Size => {
            let Some(sizing) = &cfg.sizing else {
                let mut d = config::Diagnostics::default();
                d.0.push(config::Diagnostic {
                    pointer: "/sizing".into(),
                    message: "size needs a sizing section".into(),
                });
                return Err(ConfigFailure(d).into());
            };
            let loaded = load()?;
            let ledger_path = out_dir.join("ledger.json");
            let bytes = std::fs::read(&ledger_path).with_context(|| {
                format!(
                    "{}: run simulate or optimize first to produce the ledger",
                    ledger_path.display()
                )
            })?;
            let ledger: FleetLedger = serde_json::from_slice(&bytes).context("ledger.json")?;
            inputs = loaded.inputs.clone();
            inputs.push(ledger_path);
            let report = size_network(
                &ledger,
                &sizing.equipment,
                sizing.utilization_target,
                sizing.horizon_min,
            )?;
            let stats = charge_stats(&ledger, &loaded.classes);
            out.csv("sizing.csv", |w| cio::write_sizing_csv(w, &report))?;
            out.csv("charge_stats.csv", |w| cio::write_charge_stats_csv(w, &stats))?;
            out.json("power_profile.json", &stats.sites)?;
        }
        Command::Impact => {
            inputs.extend(cfg.impact.pathways.iter().cloned());
            inputs.extend(cfg.impact.powertrains.iter().cloned());
            let report = impact_report(cfg.impact.vmt, &config::pathways(&cfg.impact)?)?;
            let rates = refuel_rates(&config::powertrains(&cfg.impact)?)?;
            out.csv("impact.csv", |w| cio::write_impact_csv(w, &report))?;
            out.csv("refuel_rates.csv", |w| cio::write_refuel_rates_csv(w, &rates))?;
            out.json("pathway_ranking.json", &pathway_ranking(&report))?;
        }
        Command::Roadmap => {
            let Some(years) = &cfg.adoption_by_year else {
                let mut d = config::Diagnostics::default();
                d.0.push(config::Diagnostic {
                    pointer: "/roadmap/adoption_by_year".into(),
                    message: "roadmap needs adoption fractions by year".into(),
                });
                return Err(ConfigFailure(d).into());
            };
            let loaded = load()?;
            inputs = loaded.inputs.clone();
            options.insert("exact", json!(opts.exact));
            let base_scenario = Scenario::new(
                loaded.routes.clone(),
                loaded.classes.clone(),
                loaded.candidates.clone(),
                loaded.base_trips.clone(),
                cfg.speed_mph,
            )?;
            let mode = cfg.adoption.map_or(AdoptionMode::Deterministic, |a| a.1);
            let plan = rollout(
                &base_scenario,
                years,
                mode,
                cfg.seed,
                &method(cfg, opts, base_scenario.candidate_count())?,
            )?;
            out.csv("rollout.csv", |w| cio::write_rollout_csv(w, &plan))?;
        }
    }

    let mut input_digests = BTreeMap::new();
    for p in &inputs {
        let bytes = std::fs::read(p).with_context(|| p.display().to_string())?;
        let key = if p.starts_with(base) { relative(base, p) } else { relative(out_dir, p) };
        input_digests.insert(key, sha256_hex(&bytes));
    }
    std::fs::create_dir_all(&out.dir).with_context(|| out.dir.display().to_string())?;
    let mut output_digests = BTreeMap::new();
    for (name, bytes) in &out.files {
        let path = out.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| path.display().to_string())?;
        output_digests.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        tool_version: TOOL_VERSION,
        subcommand: cmd.name(),
        seed: cfg.seed,
        config_hash: sha256_hex(config_bytes),
        options,
        inputs: input_digests,
        outputs: output_digests,
    };
    let path = out.dir.join(format!("manifest_{}.json", cmd.name()));
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    std::fs::write(&path, text).with_context(|| path.display().to_string())?;
    Ok(path)
}

fn method(cfg: &ScenarioConfig, opts: &Options, n: usize) -> Result<SearchMethod> {
    if opts.exact {
        if n > MAX_EXHAUSTIVE_CANDIDATES {
            bail!("--exact supports at most {MAX_EXHAUSTIVE_CANDIDATES} candidates, scenario has {n}");
        }
        Ok(SearchMethod::Exhaustive)
    } else {
        Ok(SearchMethod::Genetic(cfg.ga.clone()))
    }
}

/// Configuration problems found after parsing, such as bad rows in an input file.
#[derive(Debug)]
pub struct ConfigFailure(pub config::Diagnostics);

impl std::fmt::Display for ConfigFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigFailure {}
