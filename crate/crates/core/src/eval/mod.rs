//! Corpus BLEU, TER and KSMR.

mod ter;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ter::{edit_distance, ter, ter_edits, wer};

pub const BLEU_ORDER: usize = 4;

fn ngram_counts<'s, 'a>(tokens: &'s [&'a str], n: usize) -> HashMap<&'s [&'a str], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram statistics of one sentence pair: `(matches[n], totals[n])`.
fn sentence_stats(hyp: &[&str], reference: &[&str]) -> ([usize; BLEU_ORDER], [usize; BLEU_ORDER]) {
    let mut matches = [0; BLEU_ORDER];
    let mut totals = [0; BLEU_ORDER];
    for n in 1..=BLEU_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
        totals[n - 1] = hyp.len().saturating_sub(n - 1);
    }
    (matches, totals)
}

/// Corpus-level BLEU-4 (percentage) over whitespace tokens, single reference,
/// without smoothing: any zero n-gram precision gives 0.
pub fn bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Usage("hypothesis and reference counts differ"));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("no sentences to score"));
    }
    let mut matches = [0usize; BLEU_ORDER];
    let mut totals = [0usize; BLEU_ORDER];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let h: Vec<&str> = h.as_ref().split_whitespace().collect();
        let r: Vec<&str> = r.as_ref().split_whitespace().collect();
        let (m, t) = sentence_stats(&h, &r);
        for n in 0..BLEU_ORDER {
            matches[n] += m[n];
            totals[n] += t[n];
        }
        hyp_len += h.len();
        ref_len += r.len();
    }
    if matches.contains(&0) {
        return Ok(0.0);
    }
    let log_precision: f64 = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / BLEU_ORDER as f64;
    let brevity = if hyp_len > ref_len {
        0.0
    } else {
        1.0 - ref_len as f64 / hyp_len as f64
    };
    Ok((100.0 * (log_precision + brevity).exp()).min(100.0))
}

/// Effort spent on one sentence of an interactive session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SentenceEffort {
    pub keystrokes: usize,
    pub mouse_actions: usize,
    pub ref_chars: usize,
    pub iterations: usize,
}

/// `(Σ keystrokes + Σ mouse actions) / Σ reference characters × 100`
pub fn ksmr(efforts: &[SentenceEffort]) -> Result<f64> {
    if efforts.is_empty() {
        return Err(Error::EmptyInput("no effort reports"));
    }
    let chars: usize = efforts.iter().map(|e| e.ref_chars).sum();
    if chars == 0 {
        return Err(Error::EmptyInput("references have no characters"));
    }
    let actions: usize = efforts.iter().map(|e| e.keystrokes + e.mouse_actions).sum();
    Ok(100.0 * actions as f64 / chars as f64)
}

/// A corpus-level metric with optional per-sentence values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sentence: Option<Vec<f64>>,
}

impl MetricReport {
    pub fn new(metric: &str, value: f64, per_sentence: Option<Vec<f64>>) -> Self {
        Self {
            metric: metric.to_string(),
            value,
            per_sentence,
        }
    }

    /// `"BLEU = 53.73"`
    pub fn line(&self) -> String {
        format!("{} = {:.2}", self.metric, self.value)
    }
}

/// Plain-text report, one `NAME = xx.xx` line per metric.
pub fn format_report(reports: &[MetricReport]) -> String {
    reports.iter().map(|r| r.line() + "\n").collect()
}

/// BLEU and TER reports for a translated corpus.
pub fn evaluate<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<Vec<MetricReport>> {
    let b = bleu(hypotheses, references)?;
    let mut edits = 0usize;
    let mut words = 0usize;
    let mut per_sentence = Vec::with_capacity(hypotheses.len());
    for (h, r) in hypotheses.iter().zip(references) {
        let h: Vec<&str> = h.as_ref().split_whitespace().collect();
        let r: Vec<&str> = r.as_ref().split_whitespace().collect();
        let e = ter_edits(&h, &r);
        per_sentence.push(if r.is_empty() { 0.0 } else { 100.0 * e as f64 / r.len() as f64 });
        edits += e;
        words += r.len();
    }
    if words == 0 {
        return Err(Error::EmptyInput("references have no words"));
    }
    Ok(vec![
        MetricReport::new("BLEU", b, None),
        MetricReport::new("TER", 100.0 * edits as f64 / words as f64, Some(per_sentence)),
    ])
}
