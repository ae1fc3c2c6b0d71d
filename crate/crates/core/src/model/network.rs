//! Forward and backward passes of the attentional encoder-decoder.
//!
//! Encoder: bidirectional GRU over source embeddings; annotation row `j` is
//! `[forward state after x_1..x_j ; backward state after x_J..x_j]`.
//!
//! Decoder step, given the previous target token and state `s`:
//!
//! ```text
//! s̃      = GRU1(E_trg[y_prev], s)
//! (c, α) = attend(s̃, H)
//! s'     = GRU2(c, s̃)
//! o      = tanh(R_s s' + R_c c + R_e E_trg[y_prev] + b_r)
//! logits = W_out o + b_out
//! ```

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::gru::{self, add_outer, GruStep};
use super::params::{AttentionKind, ModelParams};
use crate::error::{Error, Result};

/// Source annotations plus the attention keys derived from them once per sentence.
#[derive(Debug, Clone)]
pub struct Annotations {
    /// `J × 2·state_dim`
    pub h: Array2<f64>,
    /// `U_a h_j` rows for additive attention, `P h_j` rows for dot attention.
    keys: Array2<f64>,
}

impl Annotations {
    /// Wraps an explicit annotation matrix, deriving the attention keys.
    pub fn from_matrix(params: &ModelParams, h: Array2<f64>) -> Self {
        let keys = match params.config.attention {
            AttentionKind::Additive => h.dot(&params.att_u.t()),
            AttentionKind::Dot => h.dot(&params.att_proj.t()),
        };
        Self { h, keys }
    }

    pub fn len(&self) -> usize {
        self.h.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub hidden: Array1<f64>,
    /// Attention weights of the step that produced this state (empty initially).
    pub attention: Array1<f64>,
}

pub fn softmax(v: ArrayView1<f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let e = v.mapv(|x| (x - max).exp());
    let z = e.sum();
    e / z
}

pub fn log_softmax(v: ArrayView1<f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    v.mapv(|x| x - lse)
}

struct EncoderCache {
    fwd: Vec<GruStep>,
    bwd: Vec<GruStep>,
}

fn check_ids(ids: &[usize], size: usize) -> Result<()> {
    match ids.iter().find(|&&id| id >= size) {
        Some(&id) => Err(Error::IdOutOfRange { id, size }),
        None => Ok(()),
    }
}

fn encode_cached(params: &ModelParams, ids: &[usize]) -> Result<(Annotations, EncoderCache)> {
    if ids.is_empty() {
        return Err(Error::EmptyInput("source sequence is empty"));
    }
    check_ids(ids, params.config.src_vocab)?;
    let n = params.config.state_dim;
    let len = ids.len();

    let mut fwd = Vec::with_capacity(len);
    let mut state = Array1::zeros(n);
    for &id in ids {
        let step = gru::forward(&params.enc_fwd, params.src_emb.row(id), state.view());
        state = step.out.clone();
        fwd.push(step);
    }
    let mut bwd = Vec::with_capacity(len);
    let mut state = Array1::zeros(n);
    for &id in ids.iter().rev() {
        let step = gru::forward(&params.enc_bwd, params.src_emb.row(id), state.view());
        state = step.out.clone();
        bwd.push(step);
    }
    bwd.reverse();

    let mut h = Array2::zeros((len, 2 * n));
    for j in 0..len {
        h.slice_mut(s![j, ..n]).assign(&fwd[j].out);
        h.slice_mut(s![j, n..]).assign(&bwd[j].out);
    }
    Ok((Annotations::from_matrix(params, h), EncoderCache { fwd, bwd }))
}

/// Runs the bidirectional encoder over `ids`.
pub fn encode_source(params: &ModelParams, ids: &[usize]) -> Result<Annotations> {
    encode_cached(params, ids).map(|(a, _)| a)
}

struct AttentionCache {
    /// `tanh(W_a s + U_a h_j + b_a)` rows; empty for dot attention.
    act: Array2<f64>,
    weights: Array1<f64>,
    context: Array1<f64>,
}

fn attend_cached(params: &ModelParams, state: ArrayView1<f64>, ann: &Annotations) -> AttentionCache {
    let (act, scores) = match params.config.attention {
        AttentionKind::Additive => {
            let ws = params.att_w.dot(&state) + &params.att_b;
            let act = (&ann.keys + &ws).mapv(f64::tanh);
            let scores = act.dot(&params.att_v);
            (act, scores)
        }
        AttentionKind::Dot => (Array2::zeros((0, 0)), ann.keys.dot(&state)),
    };
    let weights = softmax(scores.view());
    let context = ann.h.t().dot(&weights);
    AttentionCache {
        act,
        weights,
        context,
    }
}

/// Attention of `state` over the annotations: `(context, weights)`.
pub fn attend(
    params: &ModelParams,
    state: ArrayView1<f64>,
    ann: &Annotations,
) -> (Array1<f64>, Array1<f64>) {
    let c = attend_cached(params, state, ann);
    (c.context, c.weights)
}

/// `tanh(W_init · mean_j h_j + b_init)`
pub fn init_decoder_state(params: &ModelParams, ann: &Annotations) -> DecoderState {
    let mean = ann.h.mean_axis(Axis(0)).expect("annotations are non-empty");
    DecoderState {
        hidden: (params.init_w.dot(&mean) + &params.init_b).mapv(f64::tanh),
        attention: Array1::zeros(0),
    }
}

struct StepCache {
    prev: usize,
    gru1: GruStep,
    att: AttentionCache,
    gru2: GruStep,
    readout: Array1<f64>,
    logits: Array1<f64>,
}

fn step_cached(
    params: &ModelParams,
    prev: usize,
    hidden: ArrayView1<f64>,
    ann: &Annotations,
) -> StepCache {
    let emb = params.trg_emb.row(prev);
    let gru1 = gru::forward(&params.dec1, emb, hidden);
    let att = attend_cached(params, gru1.out.view(), ann);
    let gru2 = gru::forward(&params.dec2, att.context.view(), gru1.out.view());
    let readout = (params.readout_state.dot(&gru2.out)
        + params.readout_context.dot(&att.context)
        + params.readout_embed.dot(&emb)
        + &params.readout_b)
        .mapv(f64::tanh);
    let logits = params.output_w.dot(&readout) + &params.output_b;
    StepCache {
        prev,
        gru1,
        att,
        gru2,
        readout,
        logits,
    }
}

/// One autoregressive step; returns the next state and unnormalized scores over
/// the target vocabulary.
pub fn decoder_step(
    params: &ModelParams,
    prev: usize,
    state: &DecoderState,
    ann: &Annotations,
) -> Result<(DecoderState, Array1<f64>)> {
    check_ids(&[prev], params.config.trg_vocab)?;
    let c = step_cached(params, prev, state.hidden.view(), ann);
    Ok((
        DecoderState {
            hidden: c.gru2.out,
            attention: c.att.weights,
        },
        c.logits,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    Keep,
    Discard,
}

struct Cache {
    source: Vec<usize>,
    encoder: EncoderCache,
    ann: Annotations,
    mean: Array1<f64>,
    init: Array1<f64>,
    steps: Vec<StepCache>,
}

/// Teacher-forced pass over one pair.
pub struct Forward {
    /// `log p(y_t | y_<t, x)` for every target token after bos.
    pub log_probs: Vec<f64>,
    pub logits: Vec<Array1<f64>>,
    pub attention: Vec<Array1<f64>>,
    cache: Option<Cache>,
}

impl Forward {
    pub fn total_log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

/// `source` and `target` are full encoded sequences; `target` starts with bos.
pub fn forward_logprob(
    params: &ModelParams,
    source: &[usize],
    target: &[usize],
    mode: CacheMode,
) -> Result<Forward> {
    if target.len() < 2 {
        return Err(Error::EmptyInput("target needs bos and at least one token"));
    }
    check_ids(target, params.config.trg_vocab)?;
    let (ann, encoder) = encode_cached(params, source)?;
    let mean = ann.h.mean_axis(Axis(0)).expect("non-empty");
    let init = (params.init_w.dot(&mean) + &params.init_b).mapv(f64::tanh);

    let mut steps = Vec::with_capacity(target.len() - 1);
    let mut log_probs = Vec::with_capacity(target.len() - 1);
    let mut hidden = init.clone();
    for w in target.windows(2) {
        let step = step_cached(params, w[0], hidden.view(), &ann);
        log_probs.push(log_softmax(step.logits.view())[w[1]]);
        hidden = step.gru2.out.clone();
        steps.push(step);
    }
    let logits = steps.iter().map(|s| s.logits.clone()).collect();
    let attention = steps.iter().map(|s| s.att.weights.clone()).collect();
    let cache = (mode == CacheMode::Keep).then(|| Cache {
        source: source.to_vec(),
        encoder,
        ann,
        mean,
        init,
        steps,
    });
    Ok(Forward {
        log_probs,
        logits,
        attention,
        cache,
    })
}

/// Reverse-mode gradients of a loss whose partial derivatives with respect to
/// each step's logits (and optionally attention weights) are given.
pub fn backward(
    params: &ModelParams,
    fwd: &Forward,
    d_logits: &[Array1<f64>],
    d_attention: Option<&[Array1<f64>]>,
) -> Result<ModelParams> {
    let cache = fwd
        .cache
        .as_ref()
        .ok_or(Error::Usage("backward needs a forward pass run with CacheMode::Keep"))?;
    if d_logits.len() != cache.steps.len()
        || d_attention.is_some_and(|d| d.len() != cache.steps.len())
    {
        return Err(Error::Usage("gradient count must match the number of decoder steps"));
    }

    let n = params.config.state_dim;
    let len = cache.ann.len();
    let mut g = params.zeros_like();
    let mut d_h = Array2::<f64>::zeros(cache.ann.h.raw_dim());
    let mut d_keys = Array2::<f64>::zeros(cache.ann.keys.raw_dim());
    let mut d_state = Array1::<f64>::zeros(n);

    for (t, step) in cache.steps.iter().enumerate().rev() {
        let dl = &d_logits[t];
        let emb = params.trg_emb.row(step.prev);

        add_outer(&mut g.output_w, dl, step.readout.view());
        g.output_b += dl;
        let d_read = params.output_w.t().dot(dl);
        let d_pre = &d_read * &step.readout.mapv(|o| 1.0 - o * o);
        add_outer(&mut g.readout_state, &d_pre, step.gru2.out.view());
        add_outer(&mut g.readout_context, &d_pre, step.att.context.view());
        add_outer(&mut g.readout_embed, &d_pre, emb);
        g.readout_b += &d_pre;

        let d_s2 = &d_state + &params.readout_state.t().dot(&d_pre);
        let mut d_ctx = params.readout_context.t().dot(&d_pre);
        let mut d_emb = params.readout_embed.t().dot(&d_pre);

        let (dx2, mut d_s1) = gru::backward(&params.dec2, &step.gru2, &d_s2, &mut g.dec2);
        d_ctx += &dx2;

        // attention
        let att = &step.att;
        let mut d_w = cache.ann.h.dot(&d_ctx);
        if let Some(da) = d_attention {
            d_w += &da[t];
        }
        for (j, &a) in att.weights.iter().enumerate() {
            d_h.row_mut(j).scaled_add(a, &d_ctx);
        }
        let dot = att.weights.dot(&d_w);
        let d_score = &att.weights * &d_w.mapv(|v| v - dot);
        match params.config.attention {
            AttentionKind::Additive => {
                g.att_v += &att.act.t().dot(&d_score);
                let mut d_pre = Array2::zeros(att.act.raw_dim());
                for j in 0..len {
                    let row = att.act.row(j).mapv(|a| 1.0 - a * a) * &params.att_v * d_score[j];
                    d_pre.row_mut(j).assign(&row);
                }
                d_keys += &d_pre;
                let d_ws = d_pre.sum_axis(Axis(0));
                g.att_b += &d_ws;
                add_outer(&mut g.att_w, &d_ws, step.gru1.out.view());
                d_s1 += &params.att_w.t().dot(&d_ws);
            }
            AttentionKind::Dot => {
                d_s1 += &cache.ann.keys.t().dot(&d_score);
                add_outer(&mut d_keys, &d_score, step.gru1.out.view());
            }
        }

        let (dx1, d_prev) = gru::backward(&params.dec1, &step.gru1, &d_s1, &mut g.dec1);
        d_emb += &dx1;
        g.trg_emb.row_mut(step.prev).scaled_add(1.0, &d_emb);
        d_state = d_prev;
    }

    // decoder init from the mean annotation
    let d_pre = &d_state * &cache.init.mapv(|v| 1.0 - v * v);
    add_outer(&mut g.init_w, &d_pre, cache.mean.view());
    g.init_b += &d_pre;
    let d_mean = params.init_w.t().dot(&d_pre) / len as f64;
    for mut row in d_h.rows_mut() {
        row += &d_mean;
    }

    match params.config.attention {
        AttentionKind::Additive => {
            g.att_u += &d_keys.t().dot(&cache.ann.h);
            d_h += &d_keys.dot(&params.att_u);
        }
        AttentionKind::Dot => {
            g.att_proj += &d_keys.t().dot(&cache.ann.h);
            d_h += &d_keys.dot(&params.att_proj);
        }
    }

    let mut carry = Array1::<f64>::zeros(n);
    for j in (0..len).rev() {
        let d = &carry + &d_h.slice(s![j, ..n]);
        let (dx, dh) = gru::backward(&params.enc_fwd, &cache.encoder.fwd[j], &d, &mut g.enc_fwd);
        g.src_emb.row_mut(cache.source[j]).scaled_add(1.0, &dx);
        carry = dh;
    }
    let mut carry = Array1::<f64>::zeros(n);
    for j in 0..len {
        let d = &carry + &d_h.slice(s![j, n..]);
        let (dx, dh) = gru::backward(&params.enc_bwd, &cache.encoder.bwd[j], &d, &mut g.enc_bwd);
        g.src_emb.row_mut(cache.source[j]).scaled_add(1.0, &dx);
        carry = dh;
    }

    Ok(g)
}
