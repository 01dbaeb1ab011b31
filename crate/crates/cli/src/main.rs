mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rvs_core::taskio::{City, Split};

#[derive(Parser, Debug)]
#[command(name = "rvs", version, about = "Map graphs, location tokens, model I/O, baselines and metrics for map-based goal prediction")]
pub struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact root; overrides the config file.
    #[arg(long, global = true, env = "RVS_ARTIFACTS_DIR")]
    pub artifacts_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub city: Option<City>,
    /// Dataset file in the JSON-lines contract.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the street and landmark graph from an OSM extract.
    BuildGraph {
        #[arg(long)]
        osm: Option<PathBuf>,
        /// south,west,north,east in degrees.
        #[arg(long)]
        region: Option<String>,
    },
    /// Build the cell hierarchy graph over the map graph's region.
    WorldGraph,
    /// Train node embeddings on random walks over the world graph.
    Embed {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        walks_per_node: Option<usize>,
        #[arg(long)]
        walk_length: Option<usize>,
    },
    /// Cluster embeddings into discrete graph tokens.
    Quantize {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Write encoder inputs and decoder targets for every split.
    ExportRecords {
        #[arg(long)]
        split: Option<Split>,
    },
    /// Run a non-learning system and write its predictions.
    Baseline {
        #[arg(long)]
        system: rvs_core::baselines::System,
        #[arg(long)]
        split: Split,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a prediction file against a split.
    Score(ScoreArgs),
    /// Summaries of the dataset and, when available, the map graph.
    Stats,
    /// Out-of-vocabulary analysis between two cities' instructions.
    Oov {
        #[arg(long, default_value = "manhattan")]
        reference: City,
        #[arg(long, default_value = "pittsburgh")]
        target: City,
        #[arg(long)]
        split: Option<Split>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Sample start/goal pairs on the map graph.
    SamplePairs {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        max_path: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-way ANOVA with FDR correction over grouped features.
    Anova {
        /// JSON object: feature -> group -> values.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Convert a published dataset file to the internal contract.
    Adapt {
        #[arg(long)]
        input: PathBuf,
        /// Field mapping, TOML or JSON.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic city, dataset and matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        rows: usize,
        #[arg(long, default_value_t = 12)]
        cols: usize,
        #[arg(long, default_value_t = 300)]
        examples: usize,
    },
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub split: Split,
    /// Write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write per-example errors as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
