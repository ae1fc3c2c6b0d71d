//! Byte-pair encoding over characters with a suffix continuation marker.
//!
//! Merges are learned greedily: at every round the most frequent adjacent
//! symbol pair wins, ties going to the lexicographically smallest pair. A
//! segmented word keeps the marker on every piece but the last, so
//! `low@@ e@@ s@@ t` joins back to `lowest`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MARKER: &str = "@@";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    marker: String,
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, pair) in merges.iter().enumerate() {
            if ranks.insert(pair.clone(), i).is_some() {
                return Err(Error::Format(format!(
                    "duplicate merge `{} {}`",
                    pair.0, pair.1
                )));
            }
        }
        Ok(Self {
            merges,
            ranks,
            marker: DEFAULT_MARKER.to_string(),
        })
    }

    /// Learns up to `num_merges` merges from `(word, frequency)` entries.
    pub fn learn<'a, I>(words: I, num_merges: usize) -> Self
    where
        I: IntoIterator<Item = (&'a str, usize)>,
    {
        let mut vocab: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for (word, freq) in words {
            if word.is_empty() || freq == 0 {
                continue;
            }
            let symbols = word.chars().map(String::from).collect();
            *vocab.entry(symbols).or_default() += freq;
        }

        let mut merges = Vec::new();
        while merges.len() < num_merges {
            let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for (symbols, &freq) in &vocab {
                for w in symbols.windows(2) {
                    *counts.entry((w[0].as_str(), w[1].as_str())).or_default() += freq;
                }
            }
            // BTreeMap iterates pairs in lexicographic order, so the first
            // maximum found is the tie-break winner.
            let mut best: Option<((&str, &str), usize)> = None;
            for (&pair, &count) in &counts {
                if best.is_none_or(|(_, c)| count > c) {
                    best = Some((pair, count));
                }
            }
            let Some(((left, right), _)) = best else { break };
            let pair = (left.to_string(), right.to_string());

            vocab = vocab
                .into_iter()
                .map(|(symbols, f)| (merge_pair(&symbols, &pair), f))
                .fold(BTreeMap::new(), |mut acc, (s, f)| {
                    *acc.entry(s).or_default() += f;
                    acc
                });
            merges.push(pair);
        }

        Self::new(merges).expect("learned merges are unique")
    }

    /// Convenience for learning directly from whitespace-tokenized sentences.
    pub fn learn_from_sentences<S: AsRef<str>>(sentences: &[S], num_merges: usize) -> Self {
        let mut freqs: BTreeMap<&str, usize> = BTreeMap::new();
        for s in sentences {
            for w in s.as_ref().split_whitespace() {
                *freqs.entry(w).or_default() += 1;
            }
        }
        Self::learn(freqs, num_merges)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Segments one word; every piece except the last carries the marker.
    pub fn apply(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            symbols = merge_pair(&symbols, &self.merges[rank]);
        }
        let n = symbols.len();
        symbols
            .into_iter()
            .enumerate()
            .map(|(i, s)| if i + 1 < n { s + &self.marker } else { s })
            .collect()
    }

    pub fn segment(&self, sentence: &str) -> Vec<String> {
        sentence
            .split_whitespace()
            .flat_map(|w| self.apply(w))
            .collect()
    }

    pub fn to_merges_file(&self) -> String {
        let mut out = String::new();
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_merges_file(text: &str) -> Result<Self> {
        let mut merges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() || (n == 0 && line.starts_with("#version")) {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(Error::Format(format!(
                        "merges line {}: expected `left right`, got `{line}`",
                        n + 1
                    )))
                }
            }
        }
        Self::new(merges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_merges_file())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_merges_file(&std::fs::read_to_string(path)?)
    }
}

fn merge_pair(symbols: &[String], pair: &(String, String)) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(format!("{}{}", pair.0, pair.1));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Undoes segmentation: pieces ending with `marker` glue to the next piece.
pub fn join_pieces<S: AsRef<str>>(pieces: &[S], marker: &str) -> String {
    let mut out = String::new();
    let mut glue = false;
    for (i, p) in pieces.iter().enumerate() {
        let p = p.as_ref();
        if i > 0 && !glue {
            out.push(' ');
        }
        match p.strip_suffix(marker) {
            Some(stem) if !marker.is_empty() => {
                out.push_str(stem);
                glue = true;
            }
            _ => {
                out.push_str(p);
                glue = false;
            }
        }
    }
    out
}
