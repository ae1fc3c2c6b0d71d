use super::config::TrainConfig;
use super::optim::{clip_gradients, optimizer_step, OptimizerState};
use super::trainer::sample_loss_and_grad;
use crate::corpus::TextCodec;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Per-sample loss of a text pair under the training objective.
pub fn sample_loss(
    params: &ModelParams,
    source: &TextCodec,
    target: &TextCodec,
    source_text: &str,
    target_text: &str,
    config: &TrainConfig,
) -> Result<f64> {
    let (src, trg) = (source.encode(source_text), target.encode(target_text));
    let weight = 1.0 / (trg.len() - 1) as f64;
    Ok(sample_loss_and_grad(params, &src, &trg, config, weight, 1.0)?.0)
}

/// Applies `steps` optimizer updates on the loss of one validated pair and
/// returns the loss measured before each update. Out-of-vocabulary target
/// words train the unk token.
#[allow(clippy::too_many_arguments)]
pub fn online_update(
    params: &mut ModelParams,
    state: &mut OptimizerState,
    source: &TextCodec,
    target: &TextCodec,
    source_text: &str,
    target_text: &str,
    steps: usize,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    if target.tokenize(target_text).is_empty() {
        return Err(Error::EmptyInput("validated target is empty"));
    }
    if source.tokenize(source_text).is_empty() {
        return Err(Error::EmptyInput("source sentence is empty"));
    }
    let (src, trg) = (source.encode(source_text), target.encode(target_text));
    let weight = 1.0 / (trg.len() - 1) as f64;
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (loss, mut grads) = sample_loss_and_grad(params, &src, &trg, config, weight, 1.0)?;
        clip_gradients(&mut grads, config.clip_norm);
        optimizer_step(params, &grads, state, config)?;
        losses.push(loss);
    }
    Ok(losses)
}
