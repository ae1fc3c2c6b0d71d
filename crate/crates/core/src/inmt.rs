//! Prefix-based interactive translation: sessions, character feedback, the
//! simulated user and effort accounting.

use serde::{Deserialize, Serialize};

use crate::decoding::{constrained_search, hypothesis_text, replace_unknowns, PrefixConstraint, Translation};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::eval::{ksmr, SentenceEffort};

/// One user correction. `character: None` marks the end of the sentence at
/// `position`: the hypothesis is truncated there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub position: usize,
    pub character: Option<char>,
}

impl Feedback {
    pub fn character(position: usize, character: char) -> Self {
        Self {
            position,
            character: Some(character),
        }
    }

    pub fn end(position: usize) -> Self {
        Self {
            position,
            character: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub source: String,
    pub hypothesis: String,
    pub validated_prefix: String,
    pub iterations: usize,
    pub keystrokes: usize,
    pub mouse_actions: usize,
    pub closed: bool,
    /// Position of the previous correction, for mouse-action accounting.
    pub last_correction: Option<usize>,
}

impl Session {
    /// Length of the validated prefix in characters.
    pub fn validated_prefix_len(&self) -> usize {
        self.validated_prefix.chars().count()
    }

    pub fn effort(&self, reference_chars: usize) -> SentenceEffort {
        SentenceEffort {
            keystrokes: self.keystrokes,
            mouse_actions: self.mouse_actions,
            ref_chars: reference_chars,
            iterations: self.iterations,
        }
    }
}

/// Best translation whose text starts with `prefix`. With `complete`, the
/// translation ends right after the prefix.
pub fn prefix_constrained_search(engine: &Engine, source: &str, prefix: &str, complete: bool) -> Result<Translation> {
    let source_tokens = engine.source.tokenize(source);
    if source_tokens.is_empty() {
        return Err(Error::EmptyInput("source sentence is empty"));
    }
    let ids = engine.source.encode(source);
    let constraint = PrefixConstraint::new(prefix, complete, &engine.target);
    let hypothesis = constrained_search(&[&engine.params], &ids, &engine.beam, &constraint)?
        .into_iter()
        .next()
        .ok_or(Error::EmptyInput("search produced no hypothesis"))?;
    let dict = engine.dict.as_ref();
    let text = hypothesis_text(&hypothesis, &engine.target, &source_tokens, dict);
    if !text.starts_with(prefix) {
        return Err(Error::Format(format!("hypothesis `{text}` does not extend prefix `{prefix}`")));
    }
    Ok(Translation {
        tokens: replace_unknowns(&hypothesis, &engine.target, &source_tokens, dict).join(" "),
        text,
        hypothesis,
    })
}

/// Opens a session with the unconstrained translation of `source`.
pub fn start_session(engine: &Engine, id: String, source: &str) -> Result<Session> {
    let hypothesis = prefix_constrained_search(engine, source, "", false)?.text;
    Ok(Session {
        id,
        source: source.to_string(),
        hypothesis,
        validated_prefix: String::new(),
        iterations: 0,
        keystrokes: 0,
        mouse_actions: 0,
        closed: false,
        last_correction: None,
    })
}

/// Validates the hypothesis up to `feedback.position`, applies the correction
/// and re-decodes the rest of the sentence.
pub fn apply_feedback(session: &mut Session, feedback: Feedback, engine: &Engine) -> Result<()> {
    if session.closed {
        return Err(Error::SessionClosed);
    }
    let len = session.hypothesis.chars().count();
    if feedback.position > len {
        return Err(Error::PositionOutOfRange {
            position: feedback.position,
            len,
        });
    }
    let mut prefix: String = session.hypothesis.chars().take(feedback.position).collect();
    if let Some(c) = feedback.character {
        prefix.push(c);
    }
    let translation = prefix_constrained_search(engine, &session.source, &prefix, feedback.character.is_none())?;

    session.hypothesis = translation.text;
    session.validated_prefix = prefix;
    session.iterations += 1;
    session.keystrokes += 1;
    if session.last_correction.is_none_or(|p| feedback.position != p + 1) {
        session.mouse_actions += 1;
    }
    session.last_correction = Some(feedback.position);
    Ok(())
}

/// Closes the session (one mouse action for the accept button) and returns the
/// final translation.
pub fn close_session(session: &mut Session) -> Result<String> {
    if session.closed {
        return Err(Error::SessionClosed);
    }
    session.closed = true;
    session.mouse_actions += 1;
    Ok(session.hypothesis.clone())
}

/// Accepts the translation; with `learn`, the engine is updated on the pair
/// before returning.
pub fn accept_session(session: &mut Session, learn: bool, engine: &mut Engine) -> Result<String> {
    let text = close_session(session)?;
    if learn {
        engine.learn(&session.source, &text)?;
    }
    Ok(text)
}

/// Trace of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub effort: SentenceEffort,
    pub final_text: String,
    /// Hypothesis after start and after every correction.
    pub hypotheses: Vec<String>,
    /// Validated prefix after every correction.
    pub prefixes: Vec<String>,
}

/// The correction a user aiming at `reference` makes on `hypothesis`, if any:
/// the first differing character, or end-of-sentence when the hypothesis runs
/// past the reference.
pub fn next_correction(hypothesis: &str, reference: &str) -> Option<Feedback> {
    let mut h = hypothesis.chars();
    for (i, r) in reference.chars().enumerate() {
        match h.next() {
            Some(c) if c == r => {}
            _ => return Some(Feedback::character(i, r)),
        }
    }
    h.next().map(|_| Feedback::end(reference.chars().count()))
}

/// Simulates a user who corrects one character per iteration until the
/// hypothesis equals `reference`, then accepts (learning from it if `learn`).
pub fn simulate_user(engine: &mut Engine, source: &str, reference: &str, learn: bool) -> Result<Simulation> {
    let ref_chars = reference.chars().count();
    if ref_chars == 0 {
        return Err(Error::EmptyInput("reference is empty"));
    }
    let mut session = start_session(engine, String::new(), source)?;
    let mut hypotheses = vec![session.hypothesis.clone()];
    let mut prefixes = Vec::new();
    while let Some(feedback) = next_correction(&session.hypothesis, reference) {
        // every correction extends the correct validated prefix by one character
        if session.iterations > ref_chars {
            return Err(Error::Format(format!("simulation of `{source}` did not converge")));
        }
        apply_feedback(&mut session, feedback, engine)?;
        hypotheses.push(session.hypothesis.clone());
        prefixes.push(session.validated_prefix.clone());
    }
    let final_text = accept_session(&mut session, learn, engine)?;
    Ok(Simulation {
        effort: session.effort(ref_chars),
        final_text,
        hypotheses,
        prefixes,
    })
}

/// Per-sentence effort and the corpus KSMR (acceptance clicks included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortReport {
    pub sentences: Vec<SentenceEffort>,
    pub ksmr: f64,
}

impl EffortReport {
    pub fn new(sentences: Vec<SentenceEffort>) -> Result<Self> {
        let ksmr = ksmr(&sentences)?;
        Ok(Self { sentences, ksmr })
    }
}

/// Simulates every `(source, reference)` pair in order.
pub fn simulate_corpus<S: AsRef<str>>(engine: &mut Engine, pairs: &[(S, S)], learn: bool) -> Result<EffortReport> {
    let sentences = pairs
        .iter()
        .map(|(s, r)| simulate_user(engine, s.as_ref(), r.as_ref(), learn).map(|sim| sim.effort))
        .collect::<Result<Vec<_>>>()?;
    EffortReport::new(sentences)
}

/// Effort of ignoring the system: reject the hypothesis, type the reference
/// and accept (two mouse actions).
pub fn baseline_effort(reference: &str) -> SentenceEffort {
    let chars = reference.chars().count();
    SentenceEffort {
        keystrokes: chars,
        mouse_actions: 2,
        ref_chars: chars,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference_rule() {
        assert_eq!(next_correction("abc", "abd"), Some(Feedback::character(2, 'd')));
        assert_eq!(next_correction("ab", "abd"), Some(Feedback::character(2, 'd')));
        assert_eq!(next_correction("abcd", "abc"), Some(Feedback::end(3)));
        assert_eq!(next_correction("abc", "abc"), None);
        assert_eq!(next_correction("", "a"), Some(Feedback::character(0, 'a')));
        assert_eq!(next_correction("perdus pour", "perdus à"), Some(Feedback::character(7, 'à')));
    }

    #[test]
    fn baseline() {
        let b = baseline_effort("abc d");
        assert_eq!((b.keystrokes, b.mouse_actions, b.ref_chars), (5, 2, 5));
    }
}
