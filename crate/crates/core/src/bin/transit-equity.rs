use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use transit_equity::config::{BBox, RunConfig};
use transit_equity::gtfs::synth::SynthSpec;
use transit_equity::workspace::{self, Layer, Method, Workspace};
use transit_equity::Result;

#[derive(Parser)]
#[command(name = "transit-equity", version, about = "Transit accessibility and per-line equity scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a workspace from a GTFS directory and a population CSV.
    Ingest(IngestArgs),
    /// Accessibility of every hexagon.
    Accessibility(WorkspaceArgs),
    /// Gini index and Lorenz curve of the stored accessibility.
    Gini(WorkspaceArgs),
    /// Score every line.
    Score {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
    },
    /// Correlate exact and fast scores.
    Correlate(WorkspaceArgs),
    /// Generate a synthetic city.
    Synth {
        /// JSON spec; defaults apply to absent keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a layer for mapping or plotting.
    ExportGeojson {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long, value_enum)]
        layer: LayerArg,
    },
}

#[derive(Args)]
struct WorkspaceArgs {
    #[arg(long, short = 'w')]
    workspace: PathBuf,
    /// Worker cap, overriding the ingested config.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    /// JSON file with RunConfig keys. Flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short = 'w')]
    workspace: PathBuf,
    #[arg(long)]
    gtfs: Option<PathBuf>,
    #[arg(long)]
    population: Option<PathBuf>,
    /// south,west,north,east
    #[arg(long, value_delimiter = ',', num_args = 4)]
    bbox: Option<Vec<f64>>,
    #[arg(long)]
    side_m: Option<f64>,
    #[arg(long)]
    min_density: Option<f64>,
    #[arg(long)]
    depart_s: Option<u32>,
    #[arg(long)]
    horizon_s: Option<u32>,
    #[arg(long)]
    max_access_s: Option<u32>,
    #[arg(long)]
    walk_matrix: Option<PathBuf>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long)]
    service_date: Option<chrono::NaiveDate>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Fast,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerArg {
    Grid,
    Accessibility,
    Lorenz,
}

fn open(args: &WorkspaceArgs) -> Result<Workspace> {
    Ok(Workspace::open(&args.workspace)?.with_threads(args.threads))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn ingest_config(args: IngestArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident <- $value:expr),* $(,)?) => {
            $(if let Some(v) = $value { c.$field = v; })*
        };
    }
    set!(
        side_m <- args.side_m,
        min_density <- args.min_density,
        depart_s <- args.depart_s,
        horizon_s <- args.horizon_s,
        max_access_s <- args.max_access_s,
        percentile <- args.percentile,
        seed <- args.seed,
    );
    if args.gtfs.is_some() {
        c.gtfs_dir = args.gtfs;
    }
    if args.population.is_some() {
        c.population_csv = args.population;
    }
    if args.walk_matrix.is_some() {
        c.walk_matrix = args.walk_matrix;
    }
    if args.service_date.is_some() {
        c.service_date = args.service_date;
    }
    if args.threads.is_some() {
        c.threads = args.threads;
    }
    if let Some(b) = args.bbox {
        c.bbox = Some(BBox {
            south: b[0],
            west: b[1],
            north: b[2],
            east: b[3],
        });
    }
    c.validate()?;
    Ok(c)
}

fn load_spec(path: Option<&Path>) -> Result<SynthSpec> {
    path.map_or_else(|| Ok(SynthSpec::default()), workspace::load_synth_spec)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => {
            let dir = args.workspace.clone();
            let config = ingest_config(args)?;
            print_json(&workspace::cmd_ingest(&config, &dir)?);
        }
        Command::Accessibility(args) => {
            let ws = open(&args)?;
            let field = workspace::cmd_accessibility(&ws)?;
            println!("{} hexagons -> {}", field.scores.len(), ws.path(workspace::ACCESSIBILITY).display());
        }
        Command::Gini(args) => print_json(&workspace::cmd_gini(&open(&args)?)?),
        Command::Score { ws, method } => {
            let method = match method {
                MethodArg::Exact => Method::Exact,
                MethodArg::Fast => Method::Fast,
            };
            print_json(&workspace::cmd_score(&open(&ws)?, method)?);
        }
        Command::Correlate(args) => {
            let out = workspace::cmd_correlate(&open(&args)?)?;
            print_json(&out.report);
        }
        Command::Synth { spec, seed, out } => {
            let manifest = workspace::cmd_synth(&load_spec(spec.as_deref())?, seed, &out)?;
            println!("{} lines -> {}", manifest.roles.len(), out.display());
        }
        Command::ExportGeojson { ws, layer } => {
            let layer = match layer {
                LayerArg::Grid => Layer::Grid,
                LayerArg::Accessibility => Layer::Accessibility,
                LayerArg::Lorenz => Layer::Lorenz,
            };
            println!("{}", workspace::cmd_export_geojson(&open(&ws)?, layer)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
