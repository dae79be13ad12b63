use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rjcma::data::{SyntheticConfig, WindowSpec};
use rjcma::fusion::FusionConfig;
use rjcma::model::ModelConfig;
use rjcma::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::UsageError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSettings {
    pub n_folds: usize,
    /// Fold used by `ablate`.
    pub ablation_fold: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self { n_folds: 6, ablation_fold: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSettings {
    pub model: ModelConfig,
    pub h: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                fusion: FusionConfig { d_a: 8, d_v: 8, d_t: 8, window: 16, iterations: 3 },
                ..Default::default()
            },
            h: 1e-5,
            tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Parent of every run directory.
    pub out_dir: PathBuf,
    /// Dataset for train/ablate/cv. Without one, the synthetic section is
    /// generated in memory with the same splits `gen` would write.
    pub manifest: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("runs"), manifest: None }
    }
}

/// Everything a command needs. Loaded from JSON, then patched by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub model: ModelConfig,
    pub window: WindowSpec,
    pub train: TrainConfig,
    pub cv: CvSettings,
    pub gradcheck: GradcheckSettings,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let k = model.fusion.window;
        Self {
            seed: 0,
            synthetic: SyntheticConfig::default(),
            window: WindowSpec { length: k, stride: k / 2, pad: Default::default() },
            model,
            train: TrainConfig::default(),
            cv: CvSettings::default(),
            gradcheck: GradcheckSettings::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> rjcma::Result<()> {
        self.synthetic.validate()?;
        self.model.fusion.validate()?;
        self.gradcheck.model.fusion.validate()?;
        self.window.validate()?;
        self.train.validate()?;
        if self.window.length != self.model.fusion.window {
            return Err(rjcma::Error::Config(format!(
                "window.length {} must equal model.fusion.window {}",
                self.window.length, self.model.fusion.window
            )));
        }
        if self.cv.n_folds < 2 {
            return Err(rjcma::Error::Config("cv.n_folds must be at least 2".into()));
        }
        Ok(())
    }
}

/// Reads the config file (if any), applies `key.path=value` overrides, and
/// deserializes, rejecting unknown keys.
pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => serde_json::to_value(RunConfig::default())?,
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_json::from_value(value).map_err(|e| UsageError(format!("invalid configuration: {e}")).into())
}

/// `a.b.c=v`: `v` is parsed as JSON when possible, else taken as a string.
pub fn apply_override(root: &mut Value, spec: &str) -> anyhow::Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!(UsageError(format!("override `{spec}` is not KEY=VALUE")));
    };
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!(UsageError(format!("override key `{key}` has an empty segment")));
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let Value::Object(map) = node else {
            bail!(UsageError(format!("override `{key}`: `{}` is not a section", parts[..i].join("."))));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields at least one segment")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_json_or_strings() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut v, "train.lr_init=0.001").unwrap();
        apply_override(&mut v, "train.target=arousal").unwrap();
        apply_override(&mut v, "model.temporal.dilations=[1,2,4]").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.train.lr_init, 1e-3);
        assert_eq!(cfg.train.target, rjcma::metrics::Target::Arousal);
        assert_eq!(cfg.model.temporal.dilations, [1, 2, 4]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load(None, &["train.learning_rate=1".into()]).is_err());
        assert!(load(None, &["nonsense".into()]).is_err());
        assert!(load(None, &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn defaults_are_consistent() {
        RunConfig::default().validate().unwrap();
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, RunConfig::default());
    }
}
