//! Run configuration: a TOML file layered under environment variables and
//! command-line overrides.
//!
//! Every key has a dotted name (`sgf.half_width`) and an environment form
//! with the [`ENV_PREFIX`] (`CANOPY_SGF_HALF_WIDTH`). Later layers win:
//! defaults, then file, then environment, then explicit overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::domain::WindowSpec;
use crate::error::{Error, Result};
use crate::evaluation::{BaselineConfig, DefoliationRule, ScoreConfig};
use crate::ingest::SclPolicy;
use crate::model::{Architecture, ErrorVariant, TrainConfig};
use crate::preprocess::{PreprocessConfig, SgfConfig};

pub const ENV_PREFIX: &str = "CANOPY_";

/// Every settable key.
pub const KEYS: &[&str] = &[
    "seed",
    "scl.keep",
    "tukey.k",
    "sgf.half_width",
    "sgf.order",
    "ewma.horizon",
    "window.size",
    "window.stride",
    "model.preset",
    "model.allow_unsupported_window",
    "train.batch_size",
    "train.epochs",
    "train.validation_split",
    "train.learning_rate",
    "train.beta1",
    "train.beta2",
    "train.epsilon",
    "train.clip_norm",
    "score.variant",
    "score.anomaly_window",
    "score.zero_lag",
    "score.tn_reward",
    "score.early_threshold",
    "defoliation.ndvi_threshold",
    "defoliation.tcw_threshold",
    "defoliation.run",
    "defoliation.combinator",
    "baseline.sigma_multiplier",
    "baseline.run",
    "baseline.period_weeks",
    "baseline.min_train_weeks",
];

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size stack and schedule.
    #[default]
    Full,
    /// Reduced stack and short schedule for quick runs.
    Desk,
}

impl Preset {
    pub fn architecture(self) -> Architecture {
        match self {
            Preset::Full => Architecture::FULL,
            Preset::Desk => Architecture::DESK,
        }
    }

    pub fn train_config(self) -> TrainConfig {
        match self {
            Preset::Full => TrainConfig::default(),
            Preset::Desk => TrainConfig::desk(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SclSection {
    pub keep: Vec<u8>,
}

impl Default for SclSection {
    fn default() -> Self {
        SclSection {
            keep: SclPolicy::default().classes().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TukeySection {
    pub k: f64,
}

impl Default for TukeySection {
    fn default() -> Self {
        TukeySection { k: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgfSection {
    pub half_width: usize,
    pub order: usize,
}

impl Default for SgfSection {
    fn default() -> Self {
        let d = SgfConfig::default();
        SgfSection {
            half_width: d.half_width,
            order: d.order,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EwmaSection {
    pub horizon: usize,
}

impl Default for EwmaSection {
    fn default() -> Self {
        EwmaSection { horizon: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub size: usize,
    /// Training stride; defaults to the window size.
    pub stride: Option<usize>,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection {
            size: 26,
            stride: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    pub allow_unsupported_window: bool,
}

/// Training settings; unset fields come from the model preset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub validation_split: Option<f64>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub variant: ErrorVariant,
    pub anomaly_window: u32,
    pub zero_lag: f64,
    pub tn_reward: f64,
    pub early_threshold: f64,
}

impl Default for ScoreSection {
    fn default() -> Self {
        let d = ScoreConfig::default();
        ScoreSection {
            variant: ErrorVariant::default(),
            anomaly_window: d.anomaly_window,
            zero_lag: d.zero_lag,
            tn_reward: d.tn_reward,
            early_threshold: d.early_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub scl: SclSection,
    pub tukey: TukeySection,
    pub sgf: SgfSection,
    pub ewma: EwmaSection,
    pub window: WindowSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub score: ScoreSection,
    pub defoliation: DefoliationRule,
    pub baseline: BaselineConfig,
}

/// Parses a raw override as a TOML value; bare words fall back to strings.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_key(root: &mut Table, key: &str, value: Value) -> Result<()> {
    if !KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown configuration key '{key}'")));
    }
    let mut parts = key.split('.').peekable();
    let mut table = root;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        table = table
            .entry(part)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{part}' is not a section")))?;
    }
    Ok(())
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Merges the layers. `env` is scanned for prefixed names of known keys;
    /// `overrides` are `(dotted key, raw value)` pairs.
    pub fn layered<I>(file: Option<&Path>, env: I, overrides: &[(String, String)]) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut root = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        let env: Vec<(String, String)> = env.into_iter().collect();
        for key in KEYS {
            let name = env_name(key);
            if let Some((_, raw)) = env.iter().find(|(k, _)| *k == name) {
                set_key(&mut root, key, parse_value(raw))?;
            }
        }
        for (key, raw) in overrides {
            set_key(&mut root, key, parse_value(raw))?;
        }
        let cfg: Config = Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scl_policy()?;
        self.preprocess_config()?;
        self.training_windows()?;
        self.train_config().validate()?;
        self.score_config().validate()?;
        if self.tukey.k < 0.0 {
            return Err(Error::Config("tukey.k must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scl_policy(&self) -> Result<SclPolicy> {
        SclPolicy::new(self.scl.keep.iter().copied())
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        if self.ewma.horizon == 0 {
            return Err(Error::Config("ewma.horizon must be positive".into()));
        }
        Ok(PreprocessConfig {
            tukey_k: self.tukey.k,
            sgf: SgfConfig::new(self.sgf.half_width, self.sgf.order)?,
            ewma_horizon: self.ewma.horizon,
            ..PreprocessConfig::default()
        })
    }

    pub fn training_windows(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.window.size, self.window.stride.unwrap_or(self.window.size))
    }

    pub fn architecture(&self) -> Architecture {
        self.model.preset.architecture()
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = self.model.preset.train_config();
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size.unwrap_or(base.batch_size),
            epochs: t.epochs.unwrap_or(base.epochs),
            validation_split: t.validation_split.unwrap_or(base.validation_split),
            seed: self.seed,
            learning_rate: t.learning_rate.unwrap_or(base.learning_rate),
            beta1: t.beta1.unwrap_or(base.beta1),
            beta2: t.beta2.unwrap_or(base.beta2),
            epsilon: t.epsilon.unwrap_or(base.epsilon),
            clip_norm: t.clip_norm.unwrap_or(base.clip_norm),
        }
    }

    pub fn score_config(&self) -> ScoreConfig {
        ScoreConfig {
            anomaly_window: self.score.anomaly_window,
            zero_lag: self.score.zero_lag,
            tn_reward: self.score.tn_reward,
            early_threshold: self.score.early_threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_are_valid() {
        let c = Config::layered(None, Vec::new(), &[]).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.scl.keep, vec![4, 5]);
        assert_eq!(c.train_config().epochs, 200);
        assert_eq!(c.training_windows().unwrap(), WindowSpec::training(26));
        assert_eq!(c.score.variant, ErrorVariant::Adj4);
    }

    #[test]
    fn precedence_flags_env_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed = 1\n[sgf]\nhalf_width = 4\n[window]\nsize = 12\n[model]\npreset = \"desk\"").unwrap();
        let env = vec![
            ("CANOPY_SGF_HALF_WIDTH".to_string(), "5".to_string()),
            ("CANOPY_SEED".to_string(), "2".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let flags = vec![("seed".to_string(), "3".to_string())];
        let c = Config::layered(Some(f.path()), env, &flags).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.sgf.half_width, 5);
        assert_eq!(c.window.size, 12);
        assert_eq!(c.train_config().epochs, 30);
        assert_eq!(c.train_config().seed, 3);
    }

    #[test]
    fn bare_words_and_lists() {
        let flags = vec![
            ("score.variant".to_string(), "rec_err_adj2".to_string()),
            ("scl.keep".to_string(), "[4]".to_string()),
            ("defoliation.combinator".to_string(), "and".to_string()),
        ];
        let c = Config::layered(None, Vec::new(), &flags).unwrap();
        assert_eq!(c.score.variant, ErrorVariant::Adj2);
        assert_eq!(c.scl.keep, vec![4]);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let bad = vec![("sgf.width".to_string(), "3".to_string())];
        assert!(Config::layered(None, Vec::new(), &bad).is_err());
        let bad = vec![("sgf.order".to_string(), "9".to_string())];
        assert!(Config::layered(None, Vec::new(), &bad).is_err());
        assert!(Config::from_toml_str("[tukey]\nfence = 2").is_err());
        let missing = Config::layered(Some(Path::new("/nonexistent.toml")), Vec::new(), &[]);
        assert!(matches!(missing, Err(Error::Io { .. })));
    }

    #[test]
    fn snapshot_round_trips() {
        let c = Config::layered(None, Vec::new(), &[("window.stride".into(), "4".into())]).unwrap();
        let text = c.to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn env_names() {
        assert_eq!(env_name("sgf.half_width"), "CANOPY_SGF_HALF_WIDTH");
        assert_eq!(env_name("seed"), "CANOPY_SEED");
    }
}
