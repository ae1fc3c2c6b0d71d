use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Adadelta,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            "adadelta" => Ok(Self::Adadelta),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Linear,
    Exponential,
    Noam,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            "exponential" => Ok(Self::Exponential),
            "noam" => Ok(Self::Noam),
            other => Err(Error::Config(format!("unknown learning-rate schedule `{other}`"))),
        }
    }
}

/// Every tunable of batch training and of the online update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub schedule: ScheduleKind,
    /// Per-step factor of the exponential schedule.
    pub lr_decay: f64,
    pub warmup_steps: usize,
    /// Model width used by the noam schedule.
    pub model_dim: usize,
    /// Horizon of the linear schedule.
    pub total_steps: usize,
    pub label_smoothing: f64,
    pub weight_decay: f64,
    pub coverage_lambda: f64,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub eval_every: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            optimizer: OptimizerKind::Adam,
            schedule: ScheduleKind::Constant,
            lr_decay: 0.999,
            warmup_steps: 4000,
            model_dim: 512,
            total_steps: 100_000,
            label_smoothing: 0.0,
            weight_decay: 0.0,
            coverage_lambda: 0.0,
            clip_norm: 5.0,
            max_epochs: 500,
            patience: 10,
            eval_every: 100,
            batch_size: 16,
            seed: 1,
        }
    }
}

impl TrainConfig {
    /// Single-step vanilla SGD, the default online-learning rule.
    pub fn online_default() -> Self {
        Self {
            learning_rate: 0.1,
            optimizer: OptimizerKind::Sgd,
            ..Self::default()
        }
    }

    pub const KEYS: &'static [&'static str] = &[
        "learning_rate",
        "optimizer",
        "schedule",
        "lr_decay",
        "warmup_steps",
        "model_dim",
        "total_steps",
        "label_smoothing",
        "weight_decay",
        "coverage_lambda",
        "clip_norm",
        "max_epochs",
        "patience",
        "eval_every",
        "batch_size",
        "seed",
    ];

    /// Sets one field from its textual form; `Ok(false)` if `key` is not a field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "schedule" => self.schedule = value.parse()?,
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "warmup_steps" => self.warmup_steps = parse(key, value)?,
            "model_dim" => self.model_dim = parse(key, value)?,
            "total_steps" => self.total_steps = parse(key, value)?,
            "label_smoothing" => self.label_smoothing = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "coverage_lambda" => self.coverage_lambda = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return err("label_smoothing must be in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) {
            return err("weight_decay must be non-negative");
        }
        if !(self.coverage_lambda >= 0.0) {
            return err("coverage_lambda must be non-negative");
        }
        if !(self.clip_norm > 0.0) {
            return err("clip_norm must be positive");
        }
        if self.batch_size == 0 || self.eval_every == 0 || self.max_epochs == 0 {
            return err("batch_size, eval_every and max_epochs must be at least 1");
        }
        match self.schedule {
            ScheduleKind::Linear if self.total_steps == 0 => err("total_steps must be at least 1"),
            ScheduleKind::Exponential if !(self.lr_decay > 0.0) => err("lr_decay must be positive"),
            ScheduleKind::Noam if self.warmup_steps == 0 || self.model_dim == 0 => {
                err("noam needs warmup_steps and model_dim of at least 1")
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}
