//! Run configuration: a TOML file whose paths resolve against its own directory.

use std::fs;
use std::path::{Path, PathBuf};

use cnc_core::attrition::ActivityKind;
use cnc_core::classify::ClassifyConfig;
use cnc_core::data::{LoadMode, RecordFormat};
use cnc_core::report::GridOptions;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecordSource {
    pub path: PathBuf,
    /// Taken from the extension when absent.
    pub format: Option<RecordFormat>,
}

impl RecordSource {
    pub fn format(&self) -> Result<RecordFormat, CliError> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        let ext = self.path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        ext.parse().map_err(|_| {
            CliError::Usage(format!("{}: cannot tell the record format, set `format`", self.path.display()))
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub records: Vec<RecordSource>,
    pub challenges: Option<PathBuf>,
    pub layer: Option<PathBuf>,
    pub mode: LoadMode,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AttritionConfig {
    pub horizon: usize,
    pub activity: ActivityKind,
}

impl Default for AttritionConfig {
    fn default() -> Self {
        Self { horizon: cnc_core::attrition::DEFAULT_HORIZON, activity: ActivityKind::All }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub include_isolated: bool,
    pub unweighted_degree: bool,
    /// `city/year` of the graph to export.
    pub graph_challenge: Option<String>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let p = cnc_core::network::PowerOptions::default();
        Self {
            include_isolated: false,
            unweighted_degree: false,
            graph_challenge: None,
            tol: p.tol,
            max_iter: p.max_iter,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub svg: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub endpoint: String,
    pub date_from: String,
    pub date_to: String,
    /// `min_lat,min_lon,max_lat,max_lon`
    pub bbox: Option<String>,
    pub place_id: Option<String>,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    pub cache_dir: Option<PathBuf>,
    /// Hours after which a cached page is refetched; never by default.
    pub cache_max_age_hours: Option<u64>,
    #[serde(default)]
    pub offline: bool,
    #[serde(default = "default_rate")]
    pub max_requests_per_minute: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_page_size() -> usize {
    200
}

fn default_rate() -> usize {
    60
}

fn default_retries() -> u32 {
    5
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Generator parameter file; the standard scenario when absent.
    pub params: Option<PathBuf>,
    pub n_users: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub classify: ClassifyConfig,
    pub attrition: AttritionConfig,
    pub geo: GridOptions,
    pub network: NetworkConfig,
    pub report: ReportConfig,
    pub ingest: Option<IngestConfig>,
    pub synth: SynthConfig,
    /// Directory the relative paths above resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), one_line(&e.to_string()))))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
