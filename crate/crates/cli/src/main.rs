mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config, missing inputs, unwritable output directory.
    #[error("{0}")]
    Usage(String),
    /// Inputs that load but break a record or analysis precondition.
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<cnc_core::report::ReportError> for CliError {
    fn from(e: cnc_core::report::ReportError) -> Self {
        use cnc_core::report::ReportError;
        match e {
            ReportError::Data(_) => CliError::Data(e.to_string()),
            ReportError::Io { .. } | ReportError::Internal(_) => CliError::Internal(e.to_string()),
        }
    }
}

/// Participation, classification, retention, spatial and network analyses of
/// city nature challenge records.
#[derive(Debug, Parser)]
#[command(name = "cnc", version)]
pub struct Cli {
    /// Run configuration (TOML); relative paths in it resolve against its directory.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Seed for k-means initialisation and the generator.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Stage progress and warnings on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// Add the wall time to manifest.json (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub record_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Record file (jsonl or csv, by extension); repeatable, replaces the configured list.
    #[arg(long = "records", value_name = "PATH")]
    pub records: Vec<PathBuf>,
    /// Challenge listing: `city,year,start,end[,region.geojson]` per line.
    #[arg(long, value_name = "PATH")]
    pub challenges: Option<PathBuf>,
    /// GeoJSON land-use layer with a `class` property per feature.
    #[arg(long, value_name = "PATH")]
    pub layer: Option<PathBuf>,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

fn parse_k(s: &str) -> Result<KChoice, String> {
    if s == "auto" {
        return Ok(KChoice::Auto);
    }
    match s.parse::<usize>() {
        Ok(k) if k > 0 => Ok(KChoice::Fixed(k)),
        _ => Err(format!("expected a positive integer or `auto`, got {s:?}")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClassifyArgs {
    /// Cluster count, or `auto` for the elbow choice.
    #[arg(long, value_parser = parse_k)]
    pub k: Option<KChoice>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Cluster raw counts instead of log1p z-scores.
    #[arg(long)]
    pub raw_features: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AttritionArgs {
    /// Months after joining to follow.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Count only observations as activity.
    #[arg(long)]
    pub observations_only: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GeoArgs {
    #[arg(long)]
    pub grid_nx: Option<usize>,
    #[arg(long)]
    pub grid_ny: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NetworkArgs {
    /// Keep window users without interactions as isolated nodes.
    #[arg(long)]
    pub include_isolated: bool,
    /// `city/year` of the graph written to graph.csv and graph.json.
    #[arg(long, value_name = "CITY/YEAR")]
    pub graph_challenge: Option<String>,
    /// Also write link-count degree alongside the weighted degree.
    #[arg(long)]
    pub unweighted_degree: bool,
    /// Power-iteration tolerance for eigenvector centrality.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Start of the observation date range (RFC 3339 or YYYY-MM-DD).
    #[arg(long = "from")]
    pub date_from: Option<String>,
    /// End of the observation date range (RFC 3339 or YYYY-MM-DD).
    #[arg(long = "to")]
    pub date_to: Option<String>,
    /// `min_lat,min_lon,max_lat,max_lon`
    #[arg(long)]
    pub bbox: Option<String>,
    #[arg(long)]
    pub place_id: Option<String>,
    #[arg(long)]
    pub page_size: Option<usize>,
    /// Request budget per minute.
    #[arg(long)]
    pub rate: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Treat cache entries older than this many hours as missing.
    #[arg(long, value_name = "HOURS")]
    pub cache_max_age: Option<u64>,
    /// Serve every page from the cache.
    #[arg(long)]
    pub offline: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Generator parameters (TOML); the standard scenario when absent.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub n_users: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch observations from the API into a JSONL record file.
    Ingest(IngestArgs),
    /// Load and merge the records and report structural violations.
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Contribution histogram, Lorenz curve and per-city-year trends.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-challenge k-means user classes with elbow diagnostics.
    Classify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        classify: ClassifyArgs,
    },
    /// Cohort retention curves and next-year return.
    Attrition {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        attrition: AttritionArgs,
    },
    /// Quadrant counts, spread metrics and greenspace fractions.
    Geo {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        geo: GeoArgs,
    },
    /// Interaction networks and centralities per user class.
    Network {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        classify: ClassifyArgs,
        #[command(flatten)]
        network: NetworkArgs,
    },
    /// Generate a synthetic community with planted ground truth.
    Synth(SynthArgs),
    /// Every analysis plus report.md.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        classify: ClassifyArgs,
        #[command(flatten)]
        attrition: AttritionArgs,
        #[command(flatten)]
        geo: GeoArgs,
        #[command(flatten)]
        network: NetworkArgs,
        /// Also write SVG charts.
        #[arg(long)]
        svg: bool,
    },
    /// The full report, then a comparison against the full-scale reference values.
    Replicate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        classify: ClassifyArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
                    eprintln!("cnc: {first} (see cnc --help)");
                    ExitCode::from(1)
                }
            };
        }
    };
    std::panic::set_hook(Box::new(|info| eprintln!("cnc: internal error: {}", config::one_line(&info.to_string()))));
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("cnc: {}", config::one_line(&e.to_string()));
            ExitCode::from(e.code())
        }
        Err(_) => ExitCode::from(3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn k_accepts_auto_and_positive_integers() {
        assert_eq!(parse_k("auto"), Ok(KChoice::Auto));
        assert_eq!(parse_k("4"), Ok(KChoice::Fixed(4)));
        assert!(parse_k("0").is_err());
        assert!(parse_k("four").is_err());
    }

    #[test]
    fn global_flags_after_the_subcommand() {
        let cli = Cli::try_parse_from(["cnc", "report", "--seed", "3", "--output-dir", "o", "--svg"]).unwrap();
        assert_eq!(cli.seed, Some(3));
        assert!(matches!(cli.command, Command::Report { svg: true, .. }));
    }
}
