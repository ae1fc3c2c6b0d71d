//! Attentional GRU encoder-decoder with hand-written reverse-mode gradients.

pub mod checkpoint;
mod gru;
mod network;
mod params;

pub use network::{
    attend, backward, decoder_step, encode_source, forward_logprob, init_decoder_state,
    log_softmax, softmax, Annotations, CacheMode, DecoderState, Forward,
};
pub use params::{is_bias, AttentionKind, GruParams, ModelConfig, ModelParams};
