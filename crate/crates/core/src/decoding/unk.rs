use super::constraint::render;
use super::{Hypothesis, StatDict};
use crate::corpus::{TextCodec, UNK, UNK_TOKEN};

/// Source word most attended at output step `t`, skipping the bos/eos slots
/// of the encoded source (annotation `j` belongs to `source_tokens[j − 1]`).
fn attended_word<'a>(hyp: &Hypothesis, t: usize, source_tokens: &'a [String]) -> Option<&'a str> {
    let weights = hyp.attention.get(t)?;
    let n = source_tokens.len().min(weights.len().saturating_sub(1));
    let mut best: Option<(usize, f64)> = None;
    for j in 1..=n {
        if best.is_none_or(|(_, w)| weights[j] > w) {
            best = Some((j, weights[j]));
        }
    }
    best.map(|(j, _)| source_tokens[j - 1].as_str())
}

fn replacement(word: &str, dict: Option<&StatDict>) -> String {
    dict.and_then(|d| d.get(word)).map_or_else(|| word.to_string(), |e| e.target.clone())
}

/// Output tokens (without eos) with every unk replaced through the attention
/// model: the most attended source word's dictionary entry, or the word itself.
pub fn replace_unknowns(
    hyp: &Hypothesis,
    target: &TextCodec,
    source_tokens: &[String],
    dict: Option<&StatDict>,
) -> Vec<String> {
    hypothesis_pieces(hyp, target, source_tokens, dict)
        .into_iter()
        .zip(hyp.content())
        .map(|((piece, glue), &id)| {
            if glue && id != UNK {
                format!("{piece}{}", target.marker())
            } else {
                piece
            }
        })
        .collect()
}

/// `(surface, glues_to_next)` for every output token without eos.
pub fn hypothesis_pieces(
    hyp: &Hypothesis,
    target: &TextCodec,
    source_tokens: &[String],
    dict: Option<&StatDict>,
) -> Vec<(String, bool)> {
    hyp.content()
        .iter()
        .enumerate()
        .map(|(t, &id)| {
            if let Some(Some(surface)) = hyp.surfaces.get(t) {
                return (surface.clone(), false);
            }
            if id == UNK {
                let word = attended_word(hyp, t, source_tokens).unwrap_or(UNK_TOKEN);
                return (replacement(word, dict), false);
            }
            let (piece, glue) = target.piece(id);
            (piece.to_string(), glue)
        })
        .collect()
}

/// Detokenized output text.
pub fn hypothesis_text(
    hyp: &Hypothesis,
    target: &TextCodec,
    source_tokens: &[String],
    dict: Option<&StatDict>,
) -> String {
    render(&hypothesis_pieces(hyp, target, source_tokens, dict))
}
