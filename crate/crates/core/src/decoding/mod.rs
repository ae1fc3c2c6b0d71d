//! Beam search, ensembles, scoring, checkpoint averaging and unknown-word
//! replacement.

mod constraint;
mod dict;
mod search;
mod unk;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use constraint::{render, PrefixConstraint};
pub use dict::{build_stat_dict, DictEntry, StatDict};
pub use search::normalized_score;
pub use unk::{hypothesis_pieces, hypothesis_text, replace_unknowns};

use crate::corpus::EOS;
use crate::error::{Error, Result};
use crate::model::{forward_logprob, CacheMode, ModelParams};
use crate::training::config::parse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Maximum output length is `ceil(max_len_a · source_len + max_len_b)`.
    pub max_len_a: f64,
    pub max_len_b: f64,
    /// Minimum number of tokens before eos may be emitted.
    pub min_len: usize,
    /// Length-penalty exponent α.
    pub length_alpha: f64,
    /// Coverage-penalty weight β.
    pub coverage_beta: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_size: 6,
            max_len_a: 1.5,
            max_len_b: 10.0,
            min_len: 0,
            length_alpha: 0.0,
            coverage_beta: 0.0,
        }
    }
}

impl BeamConfig {
    pub const KEYS: &'static [&'static str] = &[
        "beam_size",
        "max_len_a",
        "max_len_b",
        "min_len",
        "length_alpha",
        "coverage_beta",
    ];

    pub fn max_len(&self, source_len: usize) -> usize {
        (self.max_len_a * source_len as f64 + self.max_len_b).ceil().max(0.0) as usize
    }

    /// Sets one field from its textual form; `Ok(false)` if `key` is not a field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "beam_size" => self.beam_size = parse(key, value)?,
            "max_len_a" => self.max_len_a = parse(key, value)?,
            "max_len_b" => self.max_len_b = parse(key, value)?,
            "min_len" => self.min_len = parse(key, value)?,
            "length_alpha" => self.length_alpha = parse(key, value)?,
            "coverage_beta" => self.coverage_beta = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.beam_size == 0 {
            return err("beam_size must be at least 1");
        }
        if !(self.max_len_a >= 0.0 && self.max_len_b.is_finite() && self.max_len_a.is_finite()) {
            return err("max_len_a must be a non-negative number");
        }
        if !(self.length_alpha >= 0.0) || !(self.coverage_beta >= 0.0) {
            return err("length_alpha and coverage_beta must be non-negative");
        }
        if self.max_len(0) == 0 {
            return err("maximum length must be at least 1");
        }
        if self.min_len > self.max_len(0) {
            return err("min_len must not exceed the maximum length");
        }
        Ok(())
    }
}

/// A scored translation with its attention history.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Target ids, ending in eos unless the length limit cut the search.
    pub tokens: Vec<usize>,
    /// Verbatim text for tokens forced by a prefix constraint.
    pub surfaces: Vec<Option<String>>,
    pub log_prob: f64,
    /// Length- and coverage-normalized score used for ranking.
    pub score: f64,
    /// One weight vector over source positions per generated token.
    pub attention: Vec<Array1<f64>>,
    pub finished: bool,
}

impl Hypothesis {
    /// Tokens without the trailing eos.
    pub fn content(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

/// N-best translations of an encoded source, best first. Several models are
/// combined by averaging their per-step output distributions.
pub fn beam_search(models: &[&ModelParams], source: &[usize], config: &BeamConfig) -> Result<Vec<Hypothesis>> {
    search::search(models, source, config, None)
}

/// Beam search whose output text must start with `constraint`'s prefix.
pub fn constrained_search(
    models: &[&ModelParams],
    source: &[usize],
    config: &BeamConfig,
    constraint: &PrefixConstraint,
) -> Result<Vec<Hypothesis>> {
    search::search(models, source, config, Some(constraint))
}

/// Teacher-forced log-probability of `target` (a full `bos .. eos` sequence).
pub fn score_sentence(params: &ModelParams, source: &[usize], target: &[usize]) -> Result<f64> {
    Ok(forward_logprob(params, source, target, CacheMode::Discard)?.total_log_prob())
}

/// Elementwise mean of several checkpoints of one architecture.
pub fn average_checkpoints(checkpoints: &[ModelParams]) -> Result<ModelParams> {
    let first = checkpoints.first().ok_or(Error::EmptyInput("no checkpoints to average"))?;
    let mut sum = first.zeros_like();
    for p in checkpoints {
        if p.config != first.config {
            return Err(Error::Config("checkpoints have different model configurations".into()));
        }
        sum.add_scaled(1.0, p)?;
    }
    let n = checkpoints.len() as f64;
    for (_, mut t) in sum.tensors_mut() {
        t.mapv_inplace(|v| v / n);
    }
    Ok(sum)
}

/// `idx ||| tokenized hypothesis ||| normalized score ||| raw logprob`
pub fn nbest_line(index: usize, tokens: &str, score: f64, log_prob: f64) -> String {
    format!("{index} ||| {tokens} ||| {score:.6} ||| {log_prob:.6}")
}

/// One detokenized translation of a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub text: String,
    /// Space-joined output tokens (subword markers kept, unknowns replaced).
    pub tokens: String,
    pub hypothesis: Hypothesis,
}

/// Translates raw text: tokenize, search, replace unknowns, detokenize.
pub fn translate(
    models: &[&ModelParams],
    source: &crate::corpus::TextCodec,
    target: &crate::corpus::TextCodec,
    sentence: &str,
    config: &BeamConfig,
    dict: Option<&StatDict>,
) -> Result<Vec<Translation>> {
    let source_tokens = source.tokenize(sentence);
    if source_tokens.is_empty() {
        return Err(Error::EmptyInput("source sentence is empty"));
    }
    let ids = source.encode(sentence);
    Ok(beam_search(models, &ids, config)?
        .into_iter()
        .map(|hypothesis| Translation {
            text: hypothesis_text(&hypothesis, target, &source_tokens, dict),
            tokens: replace_unknowns(&hypothesis, target, &source_tokens, dict).join(" "),
            hypothesis,
        })
        .collect())
}
