mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gfmlab_core::converter::ModelError;
use gfmlab_core::emt::SimError;

use crate::config::{Scenario, Sweep};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Numeric(_) => 3,
        }
    }
}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter(_) => RunError::Config(e.to_string()),
            _ => RunError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(_) | SimError::Model(ModelError::InvalidParameter(_)) => RunError::Config(e.to_string()),
            _ => RunError::Numeric(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Equivalent impedance over the analysis grid
    Impedance,
    /// Synchronizing and damping torque coefficients
    Torque,
    /// Net-damping stability verdict
    Verdict,
    /// Closed-loop poles of both realizations
    Poles,
    /// Small-signal response to a power-reference step
    Step,
    /// Time-domain run with stability classification
    Simulate,
    /// Simulated impedance frequency scan
    ScanZ,
    /// Simulated power-angle frequency scan
    ScanT,
}

#[derive(Debug, Parser)]
#[command(name = "gfmlab", version, about = "Stability analysis of grid-forming converters")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML)
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Parameter sweep, `path=v1,v2,...`
    #[arg(long)]
    sweep: Option<String>,
    /// Also write SVG plots
    #[arg(long)]
    svg: bool,
    /// Concurrent sweep points (0 uses every core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn load(path: &Path) -> Result<Scenario, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
    config::parse(&text, &path.display().to_string())?.resolve(stem)
}

fn run(cli: &Cli) -> Result<Vec<(String, String)>, RunError> {
    let mut scenario = load(&cli.config)?;
    if let Some(spec) = &cli.sweep {
        scenario.analysis.sweep = Some(Sweep::parse(spec)?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let bundle = pool.install(|| commands::execute(cli.command, &scenario))?;
    let mut files: Vec<(String, String)> = Vec::new();
    for (name, table, plot) in &bundle.tables {
        files.push((format!("{name}.csv"), table.to_csv()));
        if cli.svg {
            if let Some(spec) = plot {
                files.push((format!("{name}.svg"), output::svg(table, spec)));
            }
        }
    }
    let manifest = toml::to_string(&scenario.to_file()).map_err(|e| RunError::Config(e.to_string()))?;
    files.push((
        "manifest.toml".into(),
        format!("# gfmlab {} {}\n{manifest}", env!("CARGO_PKG_VERSION"), commands::name(cli.command)),
    ));
    for line in &bundle.messages {
        println!("{line}");
    }
    Ok(files)
}

/// Writes every file or none.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, body).map_err(io(&path)) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(e);
        }
        written.push(path);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|files| write_all(&cli.out, &files)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gfmlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
