//! Small synthetic corpora for tests, demos and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelDims;
use crate::corpus::{ParallelCorpus, Split, TextCodec};
use crate::decoding::BeamConfig;
use crate::engine::Engine;
use crate::error::Result;
use crate::model::AttentionKind;
use crate::training::{train, TrainConfig, TrainData, TrainLog};

pub const DIGIT_WORDS: [&str; 10] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

/// Digit sequence → spelled-out digits, e.g. `"4 0 7 2"` → `"four zero seven two"`.
pub fn digit_pair(digits: &[u8]) -> (String, String) {
    let source = digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
    let target = digits.iter().map(|&d| DIGIT_WORDS[d as usize]).collect::<Vec<_>>().join(" ");
    (source, target)
}

/// `n` distinct digit pairs of length `min_len..=max_len`, excluding any
/// source listed in `exclude`.
pub fn digit_pairs(n: usize, min_len: usize, max_len: usize, seed: u64, exclude: &[(String, String)]) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: std::collections::HashSet<String> = exclude.iter().map(|(s, _)| s.clone()).collect();
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let len = rng.gen_range(min_len..=max_len);
        let digits: Vec<u8> = (0..len).map(|_| rng.gen_range(0..10)).collect();
        let pair = digit_pair(&digits);
        if seen.insert(pair.0.clone()) {
            pairs.push(pair);
        }
    }
    pairs
}

/// Disjoint train/dev/test splits of the digit task.
pub struct DigitTask {
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub test: ParallelCorpus,
}

pub fn digit_task(train: usize, dev: usize, test: usize, seed: u64) -> DigitTask {
    let train_pairs = digit_pairs(train, 4, 7, seed, &[]);
    let dev_pairs = digit_pairs(dev, 4, 7, seed + 1, &train_pairs);
    let mut seen = train_pairs.clone();
    seen.extend(dev_pairs.iter().cloned());
    let test_pairs = digit_pairs(test, 4, 7, seed + 2, &seen);
    DigitTask {
        train: ParallelCorpus::new(train_pairs, Split::Train),
        dev: ParallelCorpus::new(dev_pairs, Split::Dev),
        test: ParallelCorpus::new(test_pairs, Split::Test),
    }
}

/// The demo interactive session: an initial translation, one character
/// correction and the resulting hypothesis.
pub const FIG1_SOURCE: &str = "They are lost forever .";
pub const FIG1_INITIAL: &str = "Ils sont perdus pour toujours .";
pub const FIG1_REFERENCE: &str = "Ils sont perdus à jamais .";
pub const FIG1_CORRECTION_POSITION: usize = 16;
pub const FIG1_CORRECTION: char = 'à';
pub const FIG1_PREFIX: &str = "Ils sont perdus à";

/// English→French sentences in which "lost forever" is rendered "perdus pour
/// toujours" but "à" is always followed by "jamais", also after "perdus".
pub fn fig1_pairs() -> Vec<(String, String)> {
    [
        ("They are lost forever .", "Ils sont perdus pour toujours ."),
        ("We are lost forever .", "Nous sommes perdus pour toujours ."),
        ("You are lost forever .", "Vous êtes perdus pour toujours ."),
        ("They are here forever .", "Ils sont ici pour toujours ."),
        ("We are here forever .", "Nous sommes ici pour toujours ."),
        ("They are gone forever .", "Ils sont partis à jamais ."),
        ("We are gone forever .", "Nous sommes partis à jamais ."),
        ("It is gone forever .", "C' est parti à jamais ."),
        ("They are lost .", "Ils sont perdus ."),
        ("We are lost .", "Nous sommes perdus ."),
        ("You are here .", "Vous êtes ici ."),
        ("They are gone .", "Ils sont partis ."),
        ("It is lost forever .", "C' est perdu pour toujours ."),
        ("It is here .", "C' est ici ."),
        ("You are gone forever .", "Vous êtes partis à jamais ."),
        ("They are closed forever .", "Ils sont fermés à jamais ."),
        ("It is closed forever .", "C' est fermé à jamais ."),
        ("We are closed forever .", "Nous sommes fermés à jamais ."),
        ("Gone and lost forever .", "Partis et perdus à jamais ."),
        ("Closed and lost forever .", "Fermés et perdus à jamais ."),
    ]
    .into_iter()
    .map(|(s, t)| (s.to_string(), t.to_string()))
    .collect()
}

pub fn fig1_corpus() -> ParallelCorpus {
    ParallelCorpus::new(fig1_pairs(), Split::Train)
}

/// Network sizes that fit the toy tasks in seconds.
pub fn toy_dims() -> ModelDims {
    ModelDims {
        emb_dim: 16,
        state_dim: 32,
        att_dim: 32,
        attention: AttentionKind::Additive,
    }
}

/// Word-level codecs covering every sentence of `corpus`.
pub fn fit_codecs(corpus: &ParallelCorpus) -> Result<(TextCodec, TextCodec)> {
    let sources: Vec<&str> = corpus.sources().collect();
    let targets: Vec<&str> = corpus.targets().collect();
    Ok((TextCodec::fit(&sources, 1000, 1, 0)?, TextCodec::fit(&targets, 1000, 1, 0)?))
}

/// Fits word-level codecs on `train_set` and trains a toy-sized model.
pub fn train_toy_engine(train_set: &ParallelCorpus, dev: &ParallelCorpus, config: &TrainConfig) -> Result<(Engine, TrainLog)> {
    let (source, target) = fit_codecs(train_set)?;
    let model = toy_dims().with_vocabularies(source.vocab.len(), target.vocab.len());
    let beam = BeamConfig::default();
    let data = TrainData {
        train: train_set,
        dev,
        source: &source,
        target: &target,
    };
    let outcome = train(&data, model, config, &beam, None)?;
    Ok((Engine::new(source, target, outcome.params, beam)?, outcome.log))
}

/// Trains on the digit task with early stopping on its dev split.
pub fn train_digit_engine(task: &DigitTask, seed: u64) -> Result<(Engine, TrainLog)> {
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: 10,
        eval_every: 50,
        patience: 20,
        max_epochs: 500,
        seed,
        ..TrainConfig::default()
    };
    train_toy_engine(&task.train, &task.dev, &config)
}

/// Fits the demo corpus for a fixed budget of 150 epochs; stopping at the
/// first perfect evaluation leaves the "à jamais" continuation unlearned.
pub fn train_fig1_engine(seed: u64) -> Result<Engine> {
    let corpus = fig1_corpus();
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: 6,
        eval_every: usize::MAX,
        max_epochs: 150,
        seed,
        ..TrainConfig::default()
    };
    Ok(train_toy_engine(&corpus, &corpus, &config)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_pairs_are_distinct_and_disjoint() {
        let task = digit_task(100, 20, 100, 7);
        let mut all: Vec<&str> = task.train.sources().chain(task.dev.sources()).chain(task.test.sources()).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
        assert_eq!(digit_pair(&[4, 0, 7]), ("4 0 7".into(), "four zero seven".into()));
    }

    #[test]
    fn fig1_constants_are_consistent() {
        assert_eq!(FIG1_REFERENCE.chars().count(), 26);
        let first_diff = FIG1_INITIAL.chars().zip(FIG1_REFERENCE.chars()).position(|(a, b)| a != b).unwrap();
        assert_eq!(first_diff, FIG1_CORRECTION_POSITION);
        assert_eq!(FIG1_REFERENCE.chars().nth(first_diff), Some(FIG1_CORRECTION));
        assert_eq!(FIG1_PREFIX.chars().count(), 17);
        assert!(FIG1_REFERENCE.starts_with(FIG1_PREFIX));
    }
}
