//! Fit bundles: the directory written by `fit` and read by the other commands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hierform::density::Posterior;
use hierform::design::assemble;
use hierform::infer::{summarize, Draws, FitHeader, FittedModel, SamplerConfig, SummaryTable};
use hierform::modelspec::validate;
use hierform::tabular::{read_csv_path, Dataset};
use serde::{Deserialize, Serialize};

use crate::model::ModelInput;
use crate::CliError;

pub const SPEC: &str = "spec.json";
pub const CONFIG: &str = "config.json";
pub const DRAWS: &str = "draws.csv";
pub const SUMMARY: &str = "summary.txt";
pub const LOGLIK: &str = "loglik.csv";
pub const META: &str = "meta.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleConfig {
    pub model: ModelInput,
    pub data: PathBuf,
    pub sampler: SamplerConfig,
    pub header: FitHeader,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
    pub divergences: usize,
    pub treedepth_hits: usize,
    pub step_sizes: Vec<f64>,
    pub mean_accept_stat: f64,
    pub max_rhat: f64,
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Bundle(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Bundle(format!("{}: {e}", path.display())))
}

pub fn matrix_text(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn loglik_text(ll: &[Vec<f64>]) -> String {
    let n = ll.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=n).map(|i| format!("obs_{i}")).collect();
    matrix_text(&header, ll)
}

fn parse_loglik(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|e| CliError::Bundle(format!("{LOGLIK}: {e}")))
                })
                .collect()
        })
        .collect()
}

pub struct Bundle {
    pub dir: PathBuf,
    pub config: BundleConfig,
    pub meta: Meta,
    pub draws: Draws,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Bundle, CliError> {
        let config: BundleConfig = read_json(&dir.join(CONFIG))?;
        let meta: Meta = read_json(&dir.join(META))?;
        let path = dir.join(DRAWS);
        let file = fs::File::open(&path)
            .map_err(|e| CliError::Bundle(format!("{}: {e}", path.display())))?;
        let draws = Draws::read_csv(file)?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            config,
            meta,
            draws,
        })
    }

    pub fn name(&self) -> String {
        self.dir
            .file_name()
            .and_then(|n| n.to_str())
            .map_or_else(|| self.dir.display().to_string(), str::to_string)
    }

    /// Summary rebuilt from the stored draws and sampler counts.
    pub fn summary(&self) -> SummaryTable {
        let mut table = summarize(&self.draws);
        table.divergences = self.meta.divergences;
        table.treedepth_hits = self.meta.treedepth_hits;
        table
    }

    pub fn data(&self) -> Result<Dataset, CliError> {
        let path = &self.config.data;
        read_csv_path(path, None).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Recompiles the model against its training data.
    pub fn model(&self, data: &Dataset) -> Result<FittedModel, CliError> {
        let spec = self.config.model.spec()?;
        let checked = validate(&spec, data)?;
        let design = assemble(&checked, data)?;
        let posterior = Posterior::new(design, &spec.priors)?;
        Ok(FittedModel {
            checked,
            posterior,
            draws: self.draws.clone(),
            config: self.config.sampler.clone(),
        })
    }

    /// Stored pointwise log-likelihood, or recomputed when absent.
    pub fn loglik(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let path = self.dir.join(LOGLIK);
        match fs::read_to_string(&path) {
            Ok(text) => parse_loglik(&text),
            Err(_) => Ok(self.model(&self.data()?)?.loglik()?),
        }
    }
}
