//! Text data pipeline: parallel corpora, vocabularies, BPE and batching.

mod batch;
mod bpe;
mod vocab;

use std::path::Path;

pub use batch::{make_batches, Batch};
pub use bpe::{join_pieces, BpeModel, DEFAULT_MARKER};
pub use vocab::{
    is_special, Vocabulary, BOS, BOS_TOKEN, EOS, EOS_TOKEN, PAD, PAD_TOKEN, UNK, UNK_TOKEN,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<(String, String)>,
    pub split: Split,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(String, String)>, split: Split) -> Self {
        Self { pairs, split }
    }

    pub fn from_lines<S: AsRef<str>>(source: &[S], target: &[S], split: Split) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::Format(format!(
                "source has {} lines but target has {}",
                source.len(),
                target.len()
            )));
        }
        Ok(Self::new(
            source
                .iter()
                .zip(target)
                .map(|(s, t)| (s.as_ref().to_string(), t.as_ref().to_string()))
                .collect(),
            split,
        ))
    }

    /// Reads two line-aligned UTF-8 files.
    pub fn load(source: impl AsRef<Path>, target: impl AsRef<Path>, split: Split) -> Result<Self> {
        let src = std::fs::read_to_string(source)?;
        let trg = std::fs::read_to_string(target)?;
        let src: Vec<&str> = src.lines().collect();
        let trg: Vec<&str> = trg.lines().collect();
        Self::from_lines(&src, &trg, split)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(s, _)| s.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(_, t)| t.as_str())
    }
}

/// Whitespace split, then optional BPE segmentation.
pub fn tokenize(sentence: &str, bpe: Option<&BpeModel>) -> Vec<String> {
    match bpe {
        Some(bpe) => bpe.segment(sentence),
        None => sentence.split_whitespace().map(String::from).collect(),
    }
}

/// `[bos] ++ ids ++ [eos]`, with unknown tokens mapped to unk.
pub fn encode(sentence: &str, vocab: &Vocabulary, bpe: Option<&BpeModel>) -> Vec<usize> {
    let mut ids = vec![BOS];
    ids.extend(tokenize(sentence, bpe).iter().map(|t| vocab.id(t)));
    ids.push(EOS);
    ids
}

/// Inverse of [`encode`]: drops pad/bos/eos and undoes BPE continuation markers.
pub fn decode(ids: &[usize], vocab: &Vocabulary, bpe: Option<&BpeModel>) -> Result<String> {
    let mut pieces = Vec::with_capacity(ids.len());
    for &id in ids {
        let tok = vocab.token(id)?;
        if matches!(id, PAD | BOS | EOS) {
            continue;
        }
        pieces.push(tok);
    }
    let marker = bpe.map_or(DEFAULT_MARKER, |b| b.marker());
    Ok(if bpe.is_some() {
        join_pieces(&pieces, marker)
    } else {
        pieces.join(" ")
    })
}

/// A vocabulary together with its optional subword model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextCodec {
    pub vocab: Vocabulary,
    pub bpe: Option<BpeModel>,
}

impl TextCodec {
    pub fn new(vocab: Vocabulary, bpe: Option<BpeModel>) -> Self {
        Self { vocab, bpe }
    }

    /// Learns BPE (when `merges > 0`) and a vocabulary from raw sentences.
    pub fn fit<S: AsRef<str>>(
        sentences: &[S],
        max_size: usize,
        min_freq: usize,
        merges: usize,
    ) -> Result<Self> {
        let bpe = (merges > 0).then(|| BpeModel::learn_from_sentences(sentences, merges));
        let tokenized: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| tokenize(s.as_ref(), bpe.as_ref()))
            .collect();
        Ok(Self::new(Vocabulary::build(&tokenized, max_size, min_freq)?, bpe))
    }

    pub fn tokenize(&self, sentence: &str) -> Vec<String> {
        tokenize(sentence, self.bpe.as_ref())
    }

    pub fn encode(&self, sentence: &str) -> Vec<usize> {
        encode(sentence, &self.vocab, self.bpe.as_ref())
    }

    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        decode(ids, &self.vocab, self.bpe.as_ref())
    }

    pub fn marker(&self) -> &str {
        self.bpe.as_ref().map_or(DEFAULT_MARKER, |b| b.marker())
    }

    /// Surface piece of a token and whether it glues onto the following one.
    pub fn piece(&self, id: usize) -> (&str, bool) {
        let tok = self.vocab.token(id).unwrap_or(UNK_TOKEN);
        if self.bpe.is_some() {
            if let Some(stem) = tok.strip_suffix(self.marker()) {
                return (stem, true);
            }
        }
        (tok, false)
    }
}
