use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{config_err, Error, Result};
use crate::kv::KvDoc;
use crate::loss::DEFAULT_TEMPERATURE;
use crate::model::ModelConfig;

/// Everything a training run needs besides the data itself.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_min: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub dwa_temperature: f64,
    /// Apply the random augmentations to training batches.
    pub augment: bool,
    pub model: ModelConfig,
    /// Dataset root (see [`crate::dataset::io`]); must contain a manifest.
    pub data_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 11] = [
        "epochs",
        "batch_size",
        "lr_initial",
        "lr_min",
        "adam_beta1",
        "adam_beta2",
        "adam_epsilon",
        "seed",
        "dwa_temperature",
        "augment",
        "data_dir",
    ];
    pub const MODEL_PREFIX: &'static str = "model.";

    /// Full-size model and the published schedule.
    pub fn full() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 8,
            lr_initial: 5e-4,
            lr_min: 5e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            dwa_temperature: DEFAULT_TEMPERATURE,
            augment: true,
            model: ModelConfig::full_scale(),
            data_dir: None,
        }
    }

    /// 64x64 inputs, small stand-in encoder, batch 4.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 4,
            model: ModelConfig::desk_scale(),
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(config_err!("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err!("batch_size must be at least 1"));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_initial && self.lr_initial.is_finite()) {
            return Err(config_err!(
                "need 0 < lr_min <= lr_initial, got lr_min={} lr_initial={}",
                self.lr_min,
                self.lr_initial
            ));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(config_err!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(config_err!("adam_epsilon must be positive"));
        }
        if !(self.dwa_temperature > 0.0 && self.dwa_temperature.is_finite()) {
            return Err(config_err!("dwa_temperature must be positive"));
        }
        self.model.validate()
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.insert("epochs", self.epochs);
        doc.insert("batch_size", self.batch_size);
        doc.insert("lr_initial", self.lr_initial);
        doc.insert("lr_min", self.lr_min);
        doc.insert("adam_beta1", self.adam_beta1);
        doc.insert("adam_beta2", self.adam_beta2);
        doc.insert("adam_epsilon", self.adam_epsilon);
        doc.insert("seed", self.seed);
        doc.insert("dwa_temperature", self.dwa_temperature);
        doc.insert("augment", self.augment);
        if let Some(dir) = &self.data_dir {
            doc.insert("data_dir", dir.display());
        }
        self.model.write_kv(&mut doc, Self::MODEL_PREFIX);
        doc
    }

    /// Overlays the keys present in `doc` onto `base`; unknown keys are errors.
    pub fn from_kv(doc: &KvDoc, base: &TrainConfig) -> Result<TrainConfig> {
        let model_keys: Vec<String> = ModelConfig::KEYS
            .iter()
            .map(|k| format!("{}{k}", Self::MODEL_PREFIX))
            .collect();
        doc.reject_unknown(Self::KEYS.iter().copied().chain(model_keys.iter().map(String::as_str)))?;
        let mut cfg = base.clone();
        macro_rules! field {
            ($key:literal, $field:ident) => {
                if let Some(v) = doc.parse_opt($key)? {
                    cfg.$field = v;
                }
            };
        }
        field!("epochs", epochs);
        field!("batch_size", batch_size);
        field!("lr_initial", lr_initial);
        field!("lr_min", lr_min);
        field!("adam_beta1", adam_beta1);
        field!("adam_beta2", adam_beta2);
        field!("adam_epsilon", adam_epsilon);
        field!("seed", seed);
        field!("dwa_temperature", dwa_temperature);
        field!("augment", augment);
        if let Some(dir) = doc.get("data_dir") {
            cfg.data_dir = Some(PathBuf::from(dir));
        }
        cfg.model = ModelConfig::read_kv(doc, Self::MODEL_PREFIX, &base.model)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, base: &TrainConfig) -> Result<TrainConfig> {
        Self::from_kv(&KvDoc::parse(text)?, base)
    }

    pub fn load(path: &Path, base: &TrainConfig) -> Result<TrainConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, base).map_err(|e| config_err!("{}: {e}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_kv().render()).map_err(|e| Error::io(path, e))
    }

    /// Applies `key=value` overrides in order.
    pub fn with_overrides<'a>(&self, overrides: impl IntoIterator<Item = &'a str>) -> Result<TrainConfig> {
        let mut doc = self.to_kv();
        for raw in overrides {
            let (k, v) = KvDoc::parse_override(raw)?;
            doc.insert(k, v);
        }
        Self::from_kv(&doc, self)
    }
}

/// Per-epoch cosine decay from `lr_initial` at epoch 0 to `lr_min` at the
/// final epoch. A one-epoch run stays at `lr_initial`.
pub fn cosine_lr(epoch: usize, config: &TrainConfig) -> Result<f64> {
    let e = config.epochs;
    if epoch >= e {
        return Err(Error::Precondition(format!("epoch {epoch} outside 0..{e}")));
    }
    let (lr0, lr1) = (config.lr_initial, config.lr_min);
    if epoch == 0 || e == 1 {
        return Ok(lr0);
    }
    if epoch == e - 1 {
        return Ok(lr1);
    }
    let t = std::f64::consts::PI * epoch as f64 / (e - 1) as f64;
    Ok(lr1 + 0.5 * (lr0 - lr1) * (1.0 + t.cos()))
}
