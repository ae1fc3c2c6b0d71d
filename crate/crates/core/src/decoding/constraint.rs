//! Character-prefix constraint for beam search.
//!
//! A hypothesis renders to text by concatenating token pieces, inserting a
//! single space before every piece unless the previous piece glues onto it
//! (BPE continuation). While part of the prefix remains unconsumed, a token is
//! allowed only if its emission (separator plus piece) agrees with the
//! remaining characters and leaves the search at a position the next emission
//! can continue from. When no vocabulary token fits, the text up to the next
//! space is forced verbatim as an out-of-vocabulary token.

use crate::corpus::{TextCodec, BOS, EOS, PAD, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct PrefixState {
    consumed: usize,
    glue: bool,
    started: bool,
}

#[derive(Debug, Clone)]
pub struct PrefixConstraint {
    chars: Vec<char>,
    /// Force eos as soon as the prefix is consumed, without overshooting it.
    complete: bool,
    pieces: Vec<(Vec<char>, bool)>,
}

impl PrefixConstraint {
    pub fn new(prefix: &str, complete: bool, target: &TextCodec) -> Self {
        let pieces = (0..target.vocab.len())
            .map(|id| {
                let (piece, glue) = target.piece(id);
                (piece.chars().collect(), glue)
            })
            .collect();
        Self {
            chars: prefix.chars().collect(),
            complete,
            pieces,
        }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn complete(&self) -> bool {
        self.complete
    }

    pub(crate) fn done(&self, st: &PrefixState) -> bool {
        st.consumed >= self.chars.len()
    }

    /// State after emitting a piece, or `None` if it contradicts the prefix.
    fn advance(&self, st: &PrefixState, piece: &[char], glue: bool) -> Option<PrefixState> {
        let rest = &self.chars[st.consumed..];
        let sep = st.started && !st.glue;
        let emission_len = piece.len() + usize::from(sep);
        let emitted = |i: usize| if sep { if i == 0 { ' ' } else { piece[i - 1] } } else { piece[i] };

        if emission_len >= rest.len() {
            if self.complete && emission_len > rest.len() {
                return None;
            }
            if (0..rest.len()).all(|i| emitted(i) == rest[i]) {
                return Some(PrefixState {
                    consumed: self.chars.len(),
                    glue,
                    started: true,
                });
            }
            return None;
        }
        if !(0..emission_len).all(|i| emitted(i) == rest[i]) {
            return None;
        }
        let next = rest[emission_len];
        let boundary_ok = if glue { !next.is_whitespace() } else { next == ' ' };
        boundary_ok.then_some(PrefixState {
            consumed: st.consumed + emission_len,
            glue,
            started: true,
        })
    }

    /// Regular vocabulary tokens consistent with the remaining prefix.
    pub(crate) fn allowed(&self, st: &PrefixState) -> Vec<(usize, PrefixState)> {
        self.pieces
            .iter()
            .enumerate()
            .filter(|&(id, _)| !matches!(id, PAD | UNK | BOS | EOS))
            .filter_map(|(id, (piece, glue))| self.advance(st, piece, *glue).map(|s| (id, s)))
            .collect()
    }

    /// Verbatim fallback: the remaining text up to the next space.
    pub(crate) fn forced(&self, st: &PrefixState) -> (String, PrefixState) {
        let rest = &self.chars[st.consumed..];
        let skip = usize::from(st.started && !st.glue && rest.first() == Some(&' '));
        let body = &rest[skip..];
        let end = body
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, &c)| c == ' ')
            .map_or(body.len(), |(i, _)| i);
        (
            body[..end].iter().collect(),
            PrefixState {
                consumed: st.consumed + skip + end,
                glue: false,
                started: true,
            },
        )
    }
}

/// Joins `(piece, glues_to_next)` pairs the same way the constraint assumes.
pub fn render<S: AsRef<str>>(pieces: &[(S, bool)]) -> String {
    let mut out = String::new();
    let mut glue = true;
    for (piece, g) in pieces {
        if !glue {
            out.push(' ');
        }
        out.push_str(piece.as_ref());
        glue = *g;
    }
    out
}
