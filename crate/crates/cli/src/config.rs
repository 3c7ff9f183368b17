//! Run configuration: a TOML file whose values the command-line flags
//! override. The effective configuration is echoed into every sidecar.

use std::path::{Path, PathBuf};

use mcstain::colorize::{AdversarialBackend, ColorizerBackend, LinearBackend, TrainConfig};
use mcstain::study::StudyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Linear,
    Adversarial,
}

/// Input and output locations. Relative paths in a config file resolve
/// against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub cube: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub stack: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub control_points: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// ```toml
/// backend = "linear"          # or "adversarial"
/// k = 3                       # features learned by `learn`
///
/// [paths]
/// cube = "phantom/cube.ptdc"
/// truth = "phantom/stain.png"
/// control_points = "points.csv" # optional, registers the truth image
/// out_dir = "run"
///
/// [study]                     # clip_fraction, train_fraction, patch_size,
/// learn_fraction = 0.1        # overlap, blur_sigma, learn_fraction,
/// subset_seed = 0             # subset_seed
///
/// [study.kmeans]
/// seed = 0
/// k_min = 2
/// k_max = 6
///
/// [train]                     # adversarial backend only
/// learning_rate = 0.0002
/// max_epochs = 200
/// patience = 10
/// split = 0.7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub k: usize,
    pub paths: Paths,
    pub study: StudyConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Linear,
            k: 3,
            paths: Paths::default(),
            study: StudyConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| mcstain::Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.cube, &mut p.truth, &mut p.stack, &mut p.features, &mut p.model, &mut p.control_points, &mut p.out_dir]
        {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.study.validate()?;
        self.train.validate()?;
        if self.k == 0 {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn backend(&self) -> Box<dyn ColorizerBackend> {
        match self.backend {
            BackendKind::Linear => Box::new(LinearBackend),
            BackendKind::Adversarial => Box::new(AdversarialBackend { config: self.train.clone() }),
        }
    }
}

/// Serialize `value` as TOML, which unlike JSON keeps infinities.
pub fn to_toml<T: Serialize>(value: &T) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| CliError::Usage(format!("cannot serialize configuration: {e}")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Input path from a flag, else from the config; it must exist.
pub fn require_input(flag: Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    let path = flag
        .or_else(|| config.clone())
        .ok_or_else(|| CliError::Usage(format!("no {name} given (flag --{} or paths.{name})", name.replace('_', "-"))))?;
    if !path.is_file() {
        return Err(CliError::Core(mcstain::Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("{name} file not found")),
        )));
    }
    Ok(path)
}
