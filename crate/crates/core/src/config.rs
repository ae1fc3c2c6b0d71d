//! `key = value` configuration files covering model sizes, vocabulary
//! building, training, search, online learning and the server.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoding::BeamConfig;
use crate::error::{Error, Result};
use crate::model::{AttentionKind, ModelConfig};
use crate::training::config::parse;
use crate::training::TrainConfig;

/// Network sizes that do not depend on the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub emb_dim: usize,
    pub state_dim: usize,
    pub att_dim: usize,
    pub attention: AttentionKind,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            emb_dim: 32,
            state_dim: 64,
            att_dim: 64,
            attention: AttentionKind::Additive,
        }
    }
}

impl ModelDims {
    pub fn with_vocabularies(self, src_vocab: usize, trg_vocab: usize) -> ModelConfig {
        ModelConfig {
            src_vocab,
            trg_vocab,
            emb_dim: self.emb_dim,
            state_dim: self.state_dim,
            att_dim: self.att_dim,
            attention: self.attention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSettings {
    pub max_vocab: usize,
    pub min_freq: usize,
    /// Number of subword merges; 0 keeps whole words.
    pub bpe_merges: usize,
}

impl Default for VocabSettings {
    fn default() -> Self {
        Self {
            max_vocab: 30_000,
            min_freq: 1,
            bpe_merges: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineSettings {
    pub online_learning_rate: f64,
    pub online_steps: usize,
}

impl Default for OnlineSettings {
    fn default() -> Self {
        Self {
            online_learning_rate: TrainConfig::online_default().learning_rate,
            online_steps: 1,
        }
    }
}

impl OnlineSettings {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.online_learning_rate,
            ..TrainConfig::online_default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSettings {
    pub addr: String,
    pub max_sessions: usize,
    pub session_timeout_secs: u64,
    pub static_dir: String,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            max_sessions: 64,
            session_timeout_secs: 600,
            static_dir: "static".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub model: ModelDims,
    pub vocab: VocabSettings,
    pub train: TrainConfig,
    pub beam: BeamConfig,
    pub online: OnlineSettings,
    pub server: ServerSettings,
}

impl Settings {
    /// Sets one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "emb_dim" => self.model.emb_dim = parse(key, value)?,
            "state_dim" => self.model.state_dim = parse(key, value)?,
            "att_dim" => self.model.att_dim = parse(key, value)?,
            "attention" => self.model.attention = value.parse()?,
            "max_vocab" => self.vocab.max_vocab = parse(key, value)?,
            "min_freq" => self.vocab.min_freq = parse(key, value)?,
            "bpe_merges" => self.vocab.bpe_merges = parse(key, value)?,
            "online_learning_rate" => self.online.online_learning_rate = parse(key, value)?,
            "online_steps" => self.online.online_steps = parse(key, value)?,
            "addr" => self.server.addr = value.to_string(),
            "max_sessions" => self.server.max_sessions = parse(key, value)?,
            "session_timeout_secs" => self.server.session_timeout_secs = parse(key, value)?,
            "static_dir" => self.server.static_dir = value.to_string(),
            _ => {
                if !self.train.set(key, value)? && !self.beam.set(key, value)? {
                    return Err(Error::Config(format!("unknown configuration key `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut settings = Self::default();
        settings.apply_str(text)?;
        Ok(settings)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.beam.validate()?;
        self.online.train_config().validate()?;
        if self.online.online_steps == 0 {
            return Err(Error::Config("online_steps must be at least 1".into()));
        }
        if self.server.max_sessions == 0 {
            return Err(Error::Config("max_sessions must be at least 1".into()));
        }
        self.model.with_vocabularies(1, 1).validate()
    }
}
