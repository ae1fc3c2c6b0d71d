use std::io::Write;
use std::thread;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::{coverage_regularizer, token_loss};
use super::optim::{clip_gradients, optimizer_step, OptimizerState};
use crate::corpus::{make_batches, ParallelCorpus, TextCodec};
use crate::decoding::{translate, BeamConfig};
use crate::error::{Error, Result};
use crate::eval::bleu;
use crate::model::{backward, forward_logprob, CacheMode, ModelConfig, ModelParams};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogRecord {
    Update { step: u64, epoch: usize, loss: f64, lr: f64 },
    Eval { step: u64, bleu: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    /// Update index of the returned (best-scoring) checkpoint.
    pub best_step: Option<u64>,
    pub best_bleu: Option<f64>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Update { loss, .. } => Some(*loss),
                LogRecord::Eval { .. } => None,
            })
            .collect()
    }

    pub fn evaluations(&self) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Eval { step, bleu } => Some((*step, *bleu)),
                LogRecord::Update { .. } => None,
            })
            .collect()
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
            .collect()
    }
}

/// Contribution of one pair to a loss: token cross-entropies weighted by
/// `token_weight` plus the attention coverage penalty weighted by
/// `sentence_weight`, with its gradient.
pub fn sample_loss_and_grad(
    params: &ModelParams,
    source: &[usize],
    target: &[usize],
    config: &TrainConfig,
    token_weight: f64,
    sentence_weight: f64,
) -> Result<(f64, ModelParams)> {
    let fwd = forward_logprob(params, source, target, CacheMode::Keep)?;
    let mut loss = 0.0;
    let mut d_logits = Vec::with_capacity(fwd.logits.len());
    for (logits, &y) in fwd.logits.iter().zip(&target[1..]) {
        let (l, g) = token_loss(logits, y, config.label_smoothing);
        loss += l * token_weight;
        d_logits.push(g * token_weight);
    }
    let d_attention: Option<Vec<Array1<f64>>> = (config.coverage_lambda > 0.0).then(|| {
        let (penalty, grads) = coverage_regularizer(&fwd.attention, config.coverage_lambda);
        loss += penalty * sentence_weight;
        grads.into_iter().map(|g| g * sentence_weight).collect()
    });
    let grads = backward(params, &fwd, &d_logits, d_attention.as_deref())?;
    Ok((loss, grads))
}

/// Loss of a batch — mean token cross-entropy over all target tokens plus the
/// coverage penalty averaged over sentences — and its gradient. Sentences are
/// processed in parallel; partial results are summed in row order so the
/// outcome does not depend on scheduling.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    rows: &[(Vec<usize>, Vec<usize>)],
    config: &TrainConfig,
) -> Result<(f64, ModelParams)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("empty batch"));
    }
    let tokens: usize = rows.iter().map(|(_, t)| t.len().saturating_sub(1)).sum();
    if tokens == 0 {
        return Err(Error::EmptyInput("batch has no target tokens"));
    }
    let token_weight = 1.0 / tokens as f64;
    let sentence_weight = 1.0 / rows.len() as f64;
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(rows.len());
    let chunk = rows.len().div_ceil(workers);
    let parts: Vec<Result<Vec<(f64, ModelParams)>>> = thread::scope(|s| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|(src, trg)| sample_loss_and_grad(params, src, trg, config, token_weight, sentence_weight))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
    });
    let mut loss = 0.0;
    let mut grads = params.zeros_like();
    for part in parts {
        for (l, g) in part? {
            loss += l;
            grads.add_scaled(1.0, &g)?;
        }
    }
    Ok((loss, grads))
}

/// Translates every source sentence, fanning out over worker threads.
pub fn translate_corpus(
    params: &ModelParams,
    source: &TextCodec,
    target: &TextCodec,
    sentences: &[&str],
    beam: &BeamConfig,
) -> Result<Vec<String>> {
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(sentences.len());
    let chunk = sentences.len().div_ceil(workers);
    let parts: Vec<Result<Vec<String>>> = thread::scope(|s| {
        let handles: Vec<_> = sentences
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|sentence| {
                            let mut out = translate(&[params], source, target, sentence, beam, None)?;
                            Ok(out.swap_remove(0).text)
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("decoding worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(sentences.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Corpus BLEU of the model's translations of `corpus`.
pub fn corpus_bleu(
    params: &ModelParams,
    source: &TextCodec,
    target: &TextCodec,
    corpus: &ParallelCorpus,
    beam: &BeamConfig,
) -> Result<f64> {
    let sources: Vec<&str> = corpus.sources().collect();
    let references: Vec<&str> = corpus.targets().collect();
    bleu(&translate_corpus(params, source, target, &sources, beam)?, &references)
}

/// Everything `train` produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best dev-BLEU evaluation.
    pub params: ModelParams,
    /// Parameters after the last update.
    pub last: ModelParams,
    pub optimizer: OptimizerState,
    pub log: TrainLog,
}

/// Data and vocabularies for a training run.
pub struct TrainData<'a> {
    pub train: &'a ParallelCorpus,
    pub dev: &'a ParallelCorpus,
    pub source: &'a TextCodec,
    pub target: &'a TextCodec,
}

/// Minibatch training with periodic dev-BLEU evaluation and early stopping.
///
/// Stops after `patience` consecutive evaluations without improvement, once
/// the dev BLEU reaches 100 (it cannot improve further), or after
/// `max_epochs`. Every record is also written to `sink` as a JSON line.
pub fn train(
    data: &TrainData<'_>,
    model: ModelConfig,
    config: &TrainConfig,
    beam: &BeamConfig,
    mut sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    config.validate()?;
    beam.validate()?;
    model.validate()?;
    if data.train.is_empty() || data.dev.is_empty() {
        return Err(Error::EmptyInput("training needs non-empty train and dev splits"));
    }
    if model.src_vocab != data.source.vocab.len() || model.trg_vocab != data.target.vocab.len() {
        return Err(Error::Config("model vocabulary sizes do not match the codecs".into()));
    }

    let mut params = ModelParams::init(model, config.seed)?;
    let mut optimizer = OptimizerState::new();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut bad_evals = 0usize;
    let mut step = 0u64;
    let mut last_eval = 0u64;

    let mut record = |log: &mut TrainLog, r: LogRecord| -> Result<()> {
        if let Some(w) = sink.as_deref_mut() {
            w.write_all(serde_json::to_string(&r)?.as_bytes())?;
            w.write_all(b"\n")?;
        }
        log.records.push(r);
        Ok(())
    };

    'epochs: for epoch in 0..config.max_epochs {
        let batches = make_batches(data.train, data.source, data.target, config.batch_size, config.seed + epoch as u64)?;
        for batch in batches {
            let rows: Vec<_> = batch.rows().collect();
            let (loss, mut grads) = batch_loss_and_grad(&params, &rows, config)?;
            clip_gradients(&mut grads, config.clip_norm);
            let lr = optimizer_step(&mut params, &grads, &mut optimizer, config)?;
            step += 1;
            record(&mut log, LogRecord::Update { step, epoch, loss, lr })?;

            if step % config.eval_every as u64 == 0 {
                last_eval = step;
                let score = corpus_bleu(&params, data.source, data.target, data.dev, beam)?;
                record(&mut log, LogRecord::Eval { step, bleu: score })?;
                if best.as_ref().is_none_or(|(b, _)| score > *b) {
                    best = Some((score, params.clone()));
                    log.best_step = Some(step);
                    log.best_bleu = Some(score);
                    bad_evals = 0;
                    if score >= 100.0 {
                        break 'epochs;
                    }
                } else {
                    bad_evals += 1;
                    if bad_evals > config.patience {
                        break 'epochs;
                    }
                }
            }
        }
    }
    if last_eval != step {
        let score = corpus_bleu(&params, data.source, data.target, data.dev, beam)?;
        record(&mut log, LogRecord::Eval { step, bleu: score })?;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, params.clone()));
            log.best_step = Some(step);
            log.best_bleu = Some(score);
        }
    }
    let (_, best_params) = best.expect("at least one evaluation ran");
    Ok(TrainOutcome {
        params: best_params,
        last: params,
        optimizer,
        log,
    })
}
