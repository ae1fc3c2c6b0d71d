use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};

pub const EM_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictEntry {
    pub target: String,
    pub score: f64,
}

/// Best lexical translation of every source word seen in training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatDict {
    pub entries: BTreeMap<String, DictEntry>,
}

impl StatDict {
    pub fn get(&self, source: &str) -> Option<&DictEntry> {
        self.entries.get(source)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dictionary serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dict: Self = serde_json::from_str(s)?;
        if let Some((word, e)) = dict.entries.iter().find(|(_, e)| !(e.score > 0.0 && e.score <= 1.0)) {
            return Err(Error::Format(format!("score {} of `{word}` is outside (0, 1]", e.score)));
        }
        Ok(dict)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Lexical translation table `t(target | source)` after `iterations` rounds of
/// EM under the word-to-word alignment model, starting from a uniform table.
pub fn lexical_table(corpus: &ParallelCorpus, iterations: usize) -> Result<BTreeMap<(String, String), f64>> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus has no sentence pairs"));
    }
    let mut src_ids = BTreeMap::new();
    let mut trg_ids = BTreeMap::new();
    let intern = |map: &mut BTreeMap<String, usize>, w: &str| {
        let next = map.len();
        *map.entry(w.to_string()).or_insert(next)
    };
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .pairs
        .iter()
        .map(|(s, t)| {
            (
                s.split_whitespace().map(|w| intern(&mut src_ids, w)).collect(),
                t.split_whitespace().map(|w| intern(&mut trg_ids, w)).collect(),
            )
        })
        .collect();

    let uniform = 1.0 / trg_ids.len().max(1) as f64;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    for (src, trg) in &pairs {
        for &s in src {
            for &t in trg {
                table.insert((s, t), uniform);
            }
        }
    }
    for _ in 0..iterations {
        let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
        let mut totals = vec![0.0; src_ids.len()];
        for (src, trg) in &pairs {
            for &t in trg {
                let z: f64 = src.iter().map(|&s| table[&(s, t)]).sum();
                for &s in src {
                    let c = table[&(s, t)] / z;
                    *counts.entry((s, t)).or_insert(0.0) += c;
                    totals[s] += c;
                }
            }
        }
        for (key, value) in table.iter_mut() {
            *value = counts.get(key).copied().unwrap_or(0.0) / totals[key.0];
        }
    }

    let src_words: Vec<&String> = invert(&src_ids);
    let trg_words: Vec<&String> = invert(&trg_ids);
    Ok(table
        .into_iter()
        .map(|((s, t), p)| ((src_words[s].clone(), trg_words[t].clone()), p))
        .collect())
}

fn invert(map: &BTreeMap<String, usize>) -> Vec<&String> {
    let mut words = vec![None; map.len()];
    for (w, &i) in map {
        words[i] = Some(w);
    }
    words.into_iter().map(|w| w.expect("dense ids")).collect()
}

/// Statistical dictionary from whitespace-tokenized parallel text: for every
/// source word, the target word with the highest lexical probability (ties go
/// to the lexicographically smallest target).
pub fn build_stat_dict(corpus: &ParallelCorpus) -> Result<StatDict> {
    let table = lexical_table(corpus, EM_ITERATIONS)?;
    let mut entries: BTreeMap<String, DictEntry> = BTreeMap::new();
    // keys are visited in (source, target) order, so a strict `>` keeps the
    // smallest target among equal scores
    for ((s, t), p) in table {
        if p <= 0.0 {
            continue;
        }
        match entries.get(&s) {
            Some(best) if best.score >= p => {}
            _ => {
                entries.insert(
                    s,
                    DictEntry {
                        target: t,
                        score: p.min(1.0),
                    },
                );
            }
        }
    }
    Ok(StatDict { entries })
}
