use ndarray::Array1;

use super::constraint::{PrefixConstraint, PrefixState};
use super::{BeamConfig, Hypothesis};
use crate::corpus::{BOS, EOS, PAD, UNK};
use crate::error::{Error, Result};
use crate::model::{decoder_step, encode_source, init_decoder_state, log_softmax, Annotations, DecoderState, ModelParams};

struct Live {
    tokens: Vec<usize>,
    surfaces: Vec<Option<String>>,
    log_prob: f64,
    states: Vec<DecoderState>,
    attention: Vec<Array1<f64>>,
    coverage: Array1<f64>,
    prefix: PrefixState,
}

struct Expansion {
    states: Vec<DecoderState>,
    alpha: Array1<f64>,
    coverage: Array1<f64>,
}

struct Candidate {
    parent: usize,
    token: usize,
    surface: Option<String>,
    log_prob: f64,
    score: f64,
    prefix: PrefixState,
}

/// Log of the arithmetic mean of the models' probabilities, computed as a
/// running mean in log space so that identical models reproduce a single
/// model's values exactly.
pub(crate) fn mean_log_probs(per_model: &[Array1<f64>]) -> Array1<f64> {
    let mut mean = per_model[0].clone();
    for (i, lp) in per_model.iter().enumerate().skip(1) {
        let k = (i + 1) as f64;
        mean.zip_mut_with(lp, |m, &l| {
            *m = if *m == f64::NEG_INFINITY {
                l - k.ln()
            } else {
                *m + (((l - *m).exp() - 1.0) / k).ln_1p()
            };
        });
    }
    mean
}

fn mean_attention(per_model: &[&Array1<f64>]) -> Array1<f64> {
    let mut mean = per_model[0].clone();
    for (i, a) in per_model.iter().enumerate().skip(1) {
        let k = (i + 1) as f64;
        mean.zip_mut_with(a, |m, &x| *m += (x - *m) / k);
    }
    mean
}

fn length_penalty(len: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        ((5.0 + len as f64) / 6.0).powf(alpha)
    }
}

fn coverage_penalty(coverage: &Array1<f64>, beta: f64) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        beta * coverage.iter().map(|&c| c.min(1.0).ln()).sum::<f64>()
    }
}

/// `s(Y) = log P(Y) / lp(Y) + cp(Y)`
pub fn normalized_score(log_prob: f64, len: usize, coverage: &Array1<f64>, config: &BeamConfig) -> f64 {
    log_prob / length_penalty(len, config.length_alpha) + coverage_penalty(coverage, config.coverage_beta)
}

fn check_models(models: &[&ModelParams]) -> Result<()> {
    let first = models.first().ok_or(Error::EmptyInput("no models given"))?;
    for m in &models[1..] {
        if m.config.src_vocab != first.config.src_vocab || m.config.trg_vocab != first.config.trg_vocab {
            return Err(Error::Config("ensemble members must share vocabularies".into()));
        }
    }
    Ok(())
}

/// Number of real source tokens in an encoded `bos .. eos` sequence.
pub(crate) fn source_len(source: &[usize]) -> usize {
    source.iter().filter(|&&id| id != BOS && id != EOS && id != PAD).count()
}

pub(crate) fn search(
    models: &[&ModelParams],
    source: &[usize],
    config: &BeamConfig,
    constraint: Option<&PrefixConstraint>,
) -> Result<Vec<Hypothesis>> {
    check_models(models)?;
    config.validate()?;
    if source.is_empty() {
        return Err(Error::EmptyInput("source sentence is empty"));
    }
    let max_len = config.max_len(source_len(source)) + constraint.map_or(0, PrefixConstraint::len);
    let min_len = config.min_len;
    let anns: Vec<Annotations> = models.iter().map(|m| encode_source(m, source)).collect::<Result<_>>()?;
    let states = models.iter().zip(&anns).map(|(m, a)| init_decoder_state(m, a)).collect();

    let mut live = vec![Live {
        tokens: Vec::new(),
        surfaces: Vec::new(),
        log_prob: 0.0,
        states,
        attention: Vec::new(),
        coverage: Array1::zeros(anns[0].len()),
        prefix: PrefixState::default(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() {
        let mut expansions = Vec::with_capacity(live.len());
        let mut candidates = Vec::new();
        for (i, h) in live.iter().enumerate() {
            let prev = h.tokens.last().copied().unwrap_or(BOS);
            let mut next_states = Vec::with_capacity(models.len());
            let mut log_probs = Vec::with_capacity(models.len());
            for ((m, ann), st) in models.iter().zip(&anns).zip(&h.states) {
                let (state, logits) = decoder_step(m, prev, st, ann)?;
                log_probs.push(log_softmax(logits.view()));
                next_states.push(state);
            }
            let lp = mean_log_probs(&log_probs);
            let alpha = mean_attention(&next_states.iter().map(|s| &s.attention).collect::<Vec<_>>());
            let coverage = &h.coverage + &alpha;
            let len = h.tokens.len() + 1;
            let lpen = length_penalty(len, config.length_alpha);
            let cp = coverage_penalty(&coverage, config.coverage_beta);
            let mut push = |token: usize, surface: Option<String>, prefix: PrefixState| {
                let log_prob = h.log_prob + lp[token];
                candidates.push(Candidate {
                    parent: i,
                    token,
                    surface,
                    log_prob,
                    score: log_prob / lpen + cp,
                    prefix,
                });
            };

            match constraint {
                Some(c) if !c.done(&h.prefix) => {
                    let allowed = c.allowed(&h.prefix);
                    if allowed.is_empty() {
                        let (segment, st) = c.forced(&h.prefix);
                        push(UNK, Some(segment), st);
                    } else {
                        for (token, st) in allowed {
                            push(token, None, st);
                        }
                    }
                }
                Some(c) if c.complete() => push(EOS, None, h.prefix),
                _ => {
                    for token in 0..lp.len() {
                        if token == PAD || token == BOS || (token == EOS && h.tokens.len() < min_len) {
                            continue;
                        }
                        push(token, None, h.prefix);
                    }
                }
            }
            expansions.push(Expansion {
                states: next_states,
                alpha,
                coverage,
            });
        }

        candidates.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then_with(|| {
                let (ta, tb) = (&live[a.parent].tokens, &live[b.parent].tokens);
                ta.iter()
                    .chain(std::iter::once(&a.token))
                    .cmp(tb.iter().chain(std::iter::once(&b.token)))
            })
        });
        candidates.truncate(config.beam_size);

        let mut next = Vec::with_capacity(candidates.len());
        for c in candidates {
            let parent = &live[c.parent];
            let exp = &expansions[c.parent];
            let mut tokens = parent.tokens.clone();
            tokens.push(c.token);
            let mut surfaces = parent.surfaces.clone();
            surfaces.push(c.surface);
            let mut attention = parent.attention.clone();
            attention.push(exp.alpha.clone());
            if c.token == EOS || tokens.len() >= max_len {
                finished.push(Hypothesis {
                    finished: c.token == EOS,
                    tokens,
                    surfaces,
                    log_prob: c.log_prob,
                    score: c.score,
                    attention,
                });
            } else {
                next.push(Live {
                    tokens,
                    surfaces,
                    log_prob: c.log_prob,
                    states: exp.states.clone(),
                    attention,
                    coverage: exp.coverage.clone(),
                    prefix: c.prefix,
                });
            }
        }
        live = next;
    }

    finished.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens)));
    finished.truncate(config.beam_size);
    Ok(finished)
}
