use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tte_estimand::estimand::EstimandSpec;
use tte_estimand::estimate::{CensorModel, CovariateSpec};
use tte_estimand::io::CsvOptions;
use tte_estimand::mi::{Assumption, ImputationCovariates};
use tte_estimand::simulate::DgpConfig;
use tte_estimand::strategy::StrategyPlan;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Root seed for simulation, bootstrap and imputation streams.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// ICE records (`id,kind,month,terminal`).
    #[serde(default)]
    pub ices: Option<PathBuf>,
    #[serde(default)]
    pub oracle: Option<PathBuf>,
    #[serde(default)]
    pub csv: CsvOptions,
    #[serde(default)]
    pub simulate: Option<DgpConfig>,
    #[serde(default)]
    pub discretize: Option<DiscretizeConfig>,
    /// Plan for `transform`; `estimate` and `sensitivity` use the estimand's plan.
    #[serde(default)]
    pub plan: Option<StrategyPlan>,
    #[serde(default)]
    pub estimand: Option<EstimandSpec>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub mi: Option<MiConfig>,
    #[serde(default)]
    pub format: Option<Format>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            seed: None,
            input: None,
            output: None,
            ices: None,
            oracle: None,
            csv: CsvOptions::default(),
            simulate: None,
            discretize: None,
            plan: None,
            estimand: None,
            estimator: EstimatorConfig::default(),
            mi: None,
            format: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizeConfig {
    pub k: usize,
    #[serde(default)]
    pub unit: Option<String>,
    /// Kind and terminal flag given to ICE records built from a `tI` column.
    #[serde(default = "default_ice_kind")]
    pub ice_kind: String,
    #[serde(default)]
    pub ice_terminal: bool,
}

fn default_ice_kind() -> String {
    "ice".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Km,
    Ipcw,
    Gcomp,
    Tmle,
    AalenJohansen,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Outcome-regression covariates (g-computation and TMLE).
    pub covariates: CovariateSpec,
    /// Censoring model for IPCW.
    pub censor_model: CensorModel,
    /// Treatment/censoring node models for TMLE.
    pub g_covariates: CovariateSpec,
    /// Lower bound on probabilities of staying uncensored.
    pub floor: f64,
    /// Bootstrap replicates for methods without an analytic standard error.
    pub bootstrap: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: Method::Km,
            covariates: CovariateSpec::default(),
            censor_model: CensorModel::default(),
            g_covariates: CovariateSpec::default(),
            floor: 0.01,
            bootstrap: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiConfig {
    /// Assumption for censored subjects without an ICE tag.
    #[serde(default = "default_assumption")]
    pub assumption: Assumption,
    /// Assumption per ICE kind whose strategy censored the subject.
    #[serde(default)]
    pub by_kind: BTreeMap<String, Assumption>,
    pub m: usize,
    #[serde(default)]
    pub reference_arm: Option<u32>,
    #[serde(default)]
    pub covariates: ImputationCovariates,
    #[serde(default = "default_true")]
    pub proper: bool,
}

fn default_assumption() -> Assumption {
    Assumption::Car
}

fn default_true() -> bool {
    true
}

/// Parse a config file; errors name the offending field path.
pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config { path: String::new(), message: format!("{}: {e}", path.display()) })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<PipelineConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config {
            path: "schema_version".into(),
            message: format!("unsupported schema version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
        });
    }
    Ok(cfg)
}
