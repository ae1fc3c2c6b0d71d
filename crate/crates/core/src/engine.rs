//! A loaded translation system: codecs, parameters, search settings and the
//! online learner, with on-disk persistence as a model directory.

use std::path::Path;

use crate::corpus::{BpeModel, TextCodec, Vocabulary};
use crate::decoding::{translate, BeamConfig, StatDict, Translation};
use crate::error::{Error, Result};
use crate::model::{checkpoint, ModelParams};
use crate::training::{online_update, OptimizerState, TrainConfig};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SOURCE_VOCAB_FILE: &str = "source.vocab.json";
pub const TARGET_VOCAB_FILE: &str = "target.vocab.json";
pub const SOURCE_BPE_FILE: &str = "source.bpe";
pub const TARGET_BPE_FILE: &str = "target.bpe";
pub const DICT_FILE: &str = "dict.json";

#[derive(Debug, Clone)]
pub struct Engine {
    pub source: TextCodec,
    pub target: TextCodec,
    pub params: ModelParams,
    pub beam: BeamConfig,
    pub dict: Option<StatDict>,
    /// Optimizer settings of the online update after accepted translations.
    pub online: TrainConfig,
    pub online_steps: usize,
    /// Continues across online updates (and from training when handed over).
    pub optimizer: OptimizerState,
}

impl Engine {
    pub fn new(source: TextCodec, target: TextCodec, params: ModelParams, beam: BeamConfig) -> Result<Self> {
        if params.config.src_vocab != source.vocab.len() || params.config.trg_vocab != target.vocab.len() {
            return Err(Error::Config(format!(
                "model expects vocabularies of {} and {} entries, codecs have {} and {}",
                params.config.src_vocab,
                params.config.trg_vocab,
                source.vocab.len(),
                target.vocab.len()
            )));
        }
        beam.validate()?;
        Ok(Self {
            source,
            target,
            params,
            beam,
            dict: None,
            online: TrainConfig::online_default(),
            online_steps: 1,
            optimizer: OptimizerState::new(),
        })
    }

    /// Up to `nbest` translations (at most the beam size), best first.
    pub fn translate(&self, sentence: &str, nbest: usize) -> Result<Vec<Translation>> {
        let mut out = translate(&[&self.params], &self.source, &self.target, sentence, &self.beam, self.dict.as_ref())?;
        out.truncate(nbest.max(1));
        Ok(out)
    }

    /// Online update on one validated pair; returns the loss before each step.
    pub fn learn(&mut self, source: &str, target: &str) -> Result<Vec<f64>> {
        online_update(
            &mut self.params,
            &mut self.optimizer,
            &self.source,
            &self.target,
            source,
            target,
            self.online_steps,
            &self.online,
        )
    }

    /// Writes checkpoint, vocabularies, subword models and dictionary.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        checkpoint::save(&self.params, dir.join(CHECKPOINT_FILE), checkpoint::Dtype::F64)?;
        self.source.vocab.save(dir.join(SOURCE_VOCAB_FILE))?;
        self.target.vocab.save(dir.join(TARGET_VOCAB_FILE))?;
        for (bpe, file) in [(&self.source.bpe, SOURCE_BPE_FILE), (&self.target.bpe, TARGET_BPE_FILE)] {
            match bpe {
                Some(b) => b.save(dir.join(file))?,
                None => remove_if_present(&dir.join(file))?,
            }
        }
        match &self.dict {
            Some(d) => d.save(dir.join(DICT_FILE))?,
            None => remove_if_present(&dir.join(DICT_FILE))?,
        }
        Ok(())
    }

    /// Loads a model directory written by [`Engine::save`].
    pub fn load(dir: impl AsRef<Path>, beam: BeamConfig) -> Result<Self> {
        let dir = dir.as_ref();
        let codec = |vocab: &str, bpe: &str| -> Result<TextCodec> {
            let bpe_path = dir.join(bpe);
            let bpe = if bpe_path.exists() { Some(BpeModel::load(bpe_path)?) } else { None };
            Ok(TextCodec::new(Vocabulary::load(dir.join(vocab))?, bpe))
        };
        let source = codec(SOURCE_VOCAB_FILE, SOURCE_BPE_FILE)?;
        let target = codec(TARGET_VOCAB_FILE, TARGET_BPE_FILE)?;
        let params = checkpoint::load(dir.join(CHECKPOINT_FILE), None)?;
        let mut engine = Self::new(source, target, params, beam)?;
        let dict_path = dir.join(DICT_FILE);
        if dict_path.exists() {
            engine.dict = Some(StatDict::load(dict_path)?);
        }
        Ok(engine)
    }
}

fn remove_if_present(path: &Path) -> Result<()> {
    match std::fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}
