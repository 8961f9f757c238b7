mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit code 2.
    Usage(String),
    /// Failure inside the pipeline: exit code 1.
    Run(mmtwin::Error),
}

impl From<mmtwin::Error> for CliError {
    fn from(e: mmtwin::Error) -> Self {
        CliError::Run(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mmtwin", version, about = "mmWave digital-twin channel prediction and calibration")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration (tracer, calibration, codebook, link budget).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for ray launching and mini-batch sampling (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for outputs, the run manifest and timings.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Triangle mesh (PLY) with per-face regions or a `<mesh>.regions` companion.
    #[arg(long)]
    pub scene: PathBuf,
    /// Explicit region-mapping file (overrides the companion file).
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Per-region material table (CSV from `ingest`/`calibrate`) or a material
    /// database (TOML) looked up by region label. Defaults to the bundled database.
    #[arg(long)]
    pub materials: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign database materials to mesh regions from a semantic point export.
    Ingest {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Semantic point export (text or binary).
        #[arg(long)]
        semantics: PathBuf,
        /// Text embeddings of the material vocabulary.
        #[arg(long)]
        texts: PathBuf,
        /// Material database (TOML); defaults to the bundled 60 GHz table.
        #[arg(long)]
        materials: Option<PathBuf>,
    },
    /// Discover propagation paths for every pose and dump paths and MPCs.
    Trace {
        #[command(flatten)]
        scene: SceneArgs,
        /// Snapshot table whose poses are traced (MPC columns are ignored).
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Predict snapshots and their metrics at the given poses.
    Predict {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Fit per-region materials to measured snapshots.
    Calibrate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Measured snapshot table.
        #[arg(long)]
        snapshots: PathBuf,
        /// Snapshots per iteration (defaults to all).
        #[arg(long)]
        batch: Option<usize>,
        /// Iteration budget (overrides the config).
        #[arg(long)]
        iterations: Option<usize>,
        /// Use plain gradient descent instead of Adam.
        #[arg(long)]
        gd: bool,
    },
    /// Walk a body proxy along a trajectory and record the shadow loss.
    Dynamics {
        #[command(flatten)]
        scene: SceneArgs,
        /// Trajectory CSV: t_s,x,y,z,yaw (degrees).
        #[arg(long)]
        trajectory: PathBuf,
        /// Transmitter position `x,y,z` (m).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        tx: [f64; 3],
        /// Receiver position `x,y,z` (m).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        rx: [f64; 3],
        /// Database label of the proxy material.
        #[arg(long, default_value = "human body")]
        proxy_material: String,
    },
    /// Evaluate a beam codebook on snapshots and pick the best beam per snapshot.
    Beamsweep {
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Compare predicted and measured snapshots: per-snapshot errors, error
    /// quantiles and matched clusters.
    Report {
        /// Predicted snapshot table.
        #[arg(long)]
        predicted: PathBuf,
        /// Measured snapshot table.
        #[arg(long)]
        snapshots: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Trace { .. } => "trace",
            Command::Predict { .. } => "predict",
            Command::Calibrate { .. } => "calibrate",
            Command::Dynamics { .. } => "dynamics",
            Command::Beamsweep { .. } => "beamsweep",
            Command::Report { .. } => "report",
        }
    }
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok([*x, *y, *z]),
        _ => Err(format!("expected three finite coordinates `x,y,z`, got `{s}`")),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let mut config = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        config = config.with_seed(seed);
    }
    if let Command::Calibrate { batch, iterations, gd, .. } = &cli.command {
        if *batch == Some(0) {
            return Err(CliError::Usage("--batch must be at least 1".into()));
        }
        if batch.is_some() {
            config.calibration.batch = *batch;
        }
        if let Some(n) = iterations {
            config.calibration.max_iterations = *n;
        }
        if *gd {
            config.calibration.optimizer = mmtwin::calibration::OptimizerKind::Gd;
        }
    }
    config.validate()?;
    std::fs::create_dir_all(&g.out_dir).map_err(|e| mmtwin::Error::Io { path: g.out_dir.clone(), source: e })?;
    commands::dispatch(&cli, &config)
}
