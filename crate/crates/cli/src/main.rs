//! `gibbslab`: command-line runs of the Gibbs-state experiments.
//!
//! Exit status: 0 on success, 1 on a failed computation, 2 on an invalid
//! configuration, 3 when a report raised flags (for example an inconclusive
//! comparison), 4 when a Fock basis would exceed its size guard.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{CommandError, Outcome};
use config::{Format, ScenarioConfig};

/// Overrides the configured output directory.
const OUT_ENV: &str = "GIBBSLAB_OUT";

#[derive(Parser)]
#[command(name = "gibbslab", version, about = "Focusing NLS Gibbs measures and their bosonic mean-field limit")]
struct Cli {
    /// Scenario file (TOML); defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `sampler.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build and persist the weighted ensemble; print z ± SE.
    SampleClassical,
    /// Z_τ, Z_{τ,0} and their ratio along the τ sweep.
    FockPartition,
    /// Classical or quantum p-particle correlation functions.
    Correlations,
    /// Series coefficients with their bounds.
    Series,
    /// NLS trajectory with conservation report, or an ε sweep of flows.
    NlsEvolve,
    /// e_Z and e_γ along the τ sweep.
    Convergence,
    /// Classical and quantum two-time correlations.
    TimeCorrelation,
    /// Invariance of the Gibbs measure under the flow.
    Invariance,
    /// Tail and moment test for the L⁴ norm on the mass ball.
    TailCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SampleClassical => "sample-classical",
            Command::FockPartition => "fock-partition",
            Command::Correlations => "correlations",
            Command::Series => "series",
            Command::NlsEvolve => "nls-evolve",
            Command::Convergence => "convergence",
            Command::TimeCorrelation => "time-correlation",
            Command::Invariance => "invariance",
            Command::TailCheck => "tail-check",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Vec<String>> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| vec![format!("config: cannot read {}: {e}", p.display())])?,
        None => String::new(),
    };
    let mut cfg = ScenarioConfig::parse(&text).map_err(|e| vec![e.to_string()])?;
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(out) = cli.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
        cfg.output.directory = out;
    }
    cfg.validate().map_err(|errs| errs.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
    let cfg = cfg.materialize();
    cfg.validate().map_err(|errs| errs.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building the worker pool")?;
    }
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(errs) => {
            for e in errs {
                eprintln!("invalid config: {e}");
            }
            return Ok(ExitCode::from(2));
        }
    };
    let hash = cfg.hash();
    let started_at = chrono::Utc::now().to_rfc3339();
    let start = Instant::now();
    let result = match cli.command {
        Command::SampleClassical => commands::sample_classical(&cfg, &hash),
        Command::FockPartition => commands::fock_partition(&cfg),
        Command::Correlations => commands::correlations(&cfg),
        Command::Series => commands::series(&cfg),
        Command::NlsEvolve => commands::nls_evolve(&cfg),
        Command::Convergence => commands::convergence(&cfg),
        Command::TimeCorrelation => commands::time_correlation(&cfg),
        Command::Invariance => commands::invariance(&cfg),
        Command::TailCheck => commands::tail_check(&cfg),
    };
    let compute_s = start.elapsed().as_secs_f64();
    let mut outcome = match result {
        Ok(o) => o,
        Err(CommandError::Config(m)) => {
            eprintln!("invalid config: {m}");
            return Ok(ExitCode::from(2));
        }
        Err(CommandError::Resource(m)) => {
            eprintln!("resource error: {m}");
            return Ok(ExitCode::from(4));
        }
        Err(CommandError::Failed(m)) => anyhow::bail!("{}: {m}", cli.command.name()),
    };
    outcome.report.config_hash = hash.clone();
    let write_start = Instant::now();
    let files = write_outputs(&cfg, cli.command.name(), &outcome)?;
    let manifest = json!({
        "command": cli.command.name(),
        "config_hash": hash,
        "started_at": started_at,
        "durations": { "compute_s": compute_s, "write_s": write_start.elapsed().as_secs_f64() },
        "versions": { "gibbslab": env!("CARGO_PKG_VERSION") },
        "files": files,
        "flags": outcome.report.flags,
    });
    let dir = &cfg.output.directory;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    for line in &outcome.summary {
        println!("{line}");
    }
    for flag in &outcome.report.flags {
        eprintln!("flag: {flag}");
    }
    println!("outputs in {} (config {})", dir.display(), &hash[..12]);
    Ok(if outcome.report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn write_outputs(cfg: &ScenarioConfig, name: &str, outcome: &Outcome) -> anyhow::Result<Vec<String>> {
    let dir: &Path = &cfg.output.directory;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec!["config.toml".to_string()];
    fs::write(dir.join("config.toml"), format!("# config_hash = \"{}\"\n{}", cfg.hash(), cfg.to_toml()))?;
    for f in &cfg.output.formats {
        let file = match f {
            Format::Csv => {
                let file = format!("{name}.csv");
                let mut buf = Vec::new();
                outcome.report.write_csv(&mut buf)?;
                fs::write(dir.join(&file), buf)?;
                file
            }
            Format::Json => {
                let file = format!("{name}.json");
                let mut buf = Vec::new();
                outcome.report.write_json(&mut buf)?;
                buf.push(b'\n');
                fs::write(dir.join(&file), buf)?;
                file
            }
        };
        files.push(file);
    }
    for (file, bytes) in &outcome.files {
        fs::write(dir.join(file), bytes)?;
        files.push(file.clone());
    }
    Ok(files)
}
