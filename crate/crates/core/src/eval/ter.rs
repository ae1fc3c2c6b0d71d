use crate::error::{Error, Result};

/// Longest block considered for a greedy shift.
const MAX_SHIFT_LEN: usize = 10;
/// Hypotheses up to this many words get the exact minimum number of edits.
pub const EXACT_SHIFT_LIMIT: usize = 6;

/// Word-level Levenshtein distance (insert, delete, substitute; cost 1 each).
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag } else { 1 + diag.min(up).min(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// `words` with the block `[start, start + len)` moved so that it begins at
/// index `to` of the result.
pub(crate) fn shift<T: Clone>(words: &[T], start: usize, len: usize, to: usize) -> Vec<T> {
    let mut rest: Vec<T> = words[..start].to_vec();
    rest.extend_from_slice(&words[start + len..]);
    let mut out = rest[..to].to_vec();
    out.extend_from_slice(&words[start..start + len]);
    out.extend_from_slice(&rest[to..]);
    out
}

/// Edit count under TER: block shifts plus the word edits that remain.
///
/// Shifts are first applied greedily, each time taking the shift with the
/// largest edit-distance reduction (ties: leftmost block, then longest, then
/// earliest destination) while the reduction is positive. Short hypotheses
/// are then searched exhaustively, with the greedy count as the bound, so
/// their edit count is the true minimum.
pub fn ter_edits<T: PartialEq + Clone>(hypothesis: &[T], reference: &[T]) -> usize {
    let greedy = greedy_edits(hypothesis, reference);
    if hypothesis.len() <= EXACT_SHIFT_LIMIT {
        exact_edits(hypothesis, reference, greedy)
    } else {
        greedy
    }
}

/// Breadth-first search over word orders reachable by shifts, pruned by the
/// order-independent lower bound `max(|h|, |r|) − |bag overlap|` on word edits.
fn exact_edits<T: PartialEq + Clone>(hypothesis: &[T], reference: &[T], upper: usize) -> usize {
    let mut unused: Vec<&T> = reference.iter().collect();
    let mut overlap = 0;
    for w in hypothesis {
        if let Some(i) = unused.iter().position(|r| *r == w) {
            unused.swap_remove(i);
            overlap += 1;
        }
    }
    let floor = hypothesis.len().max(reference.len()) - overlap;
    let mut best = upper;
    let mut seen = vec![hypothesis.to_vec()];
    let mut frontier = vec![hypothesis.to_vec()];
    let mut shifts = 0;
    while !frontier.is_empty() && shifts + floor < best {
        let mut next = Vec::new();
        for words in &frontier {
            best = best.min(shifts + edit_distance(words, reference));
            if shifts + 1 + floor >= best {
                continue;
            }
            let n = words.len();
            for start in 0..n {
                for len in 1..=n - start {
                    for to in (0..=n - len).filter(|&to| to != start) {
                        let candidate = shift(words, start, len, to);
                        if !seen.contains(&candidate) {
                            seen.push(candidate.clone());
                            next.push(candidate);
                        }
                    }
                }
            }
        }
        frontier = next;
        shifts += 1;
    }
    best
}

fn greedy_edits<T: PartialEq + Clone>(hypothesis: &[T], reference: &[T]) -> usize {
    let mut current = hypothesis.to_vec();
    let mut distance = edit_distance(&current, reference);
    let mut shifts = 0;
    loop {
        let n = current.len();
        // key: (distance ↑, start ↑, len ↓, to ↑)
        let mut best: Option<((usize, usize, std::cmp::Reverse<usize>, usize), Vec<T>)> = None;
        for start in 0..n {
            for len in 1..=MAX_SHIFT_LEN.min(n - start) {
                for to in 0..=(n - len) {
                    if to == start {
                        continue;
                    }
                    let candidate = shift(&current, start, len, to);
                    let d = edit_distance(&candidate, reference);
                    let key = (d, start, std::cmp::Reverse(len), to);
                    if d < distance && best.as_ref().is_none_or(|(k, _)| key < *k) {
                        best = Some((key, candidate));
                    }
                }
            }
        }
        match best {
            Some(((d, ..), candidate)) => {
                current = candidate;
                distance = d;
                shifts += 1;
            }
            None => return shifts + distance,
        }
    }
}

/// Translation edit rate (percentage of reference words).
pub fn ter<T: PartialEq + Clone>(hypothesis: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference is empty"));
    }
    Ok(100.0 * ter_edits(hypothesis, reference) as f64 / reference.len() as f64)
}

/// Word error rate (percentage of reference words).
pub fn wer<T: PartialEq>(hypothesis: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference is empty"));
    }
    Ok(100.0 * edit_distance(hypothesis, reference) as f64 / reference.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn examples() {
        assert_eq!(ter(&w("a b c d"), &w("a b c d")).unwrap(), 0.0);
        assert_eq!(ter(&w(""), &w("a b c d e")).unwrap(), 100.0);
        assert_eq!(ter(&w("b a c d"), &w("a b c d")).unwrap(), 25.0);
        assert!(ter(&w("a"), &w("")).is_err());
    }

    #[test]
    fn shift_moves_block() {
        assert_eq!(shift(&[1, 2, 3, 4, 5], 1, 2, 3), [1, 4, 5, 2, 3]);
        assert_eq!(shift(&[1, 2, 3, 4, 5], 3, 2, 0), [4, 5, 1, 2, 3]);
    }

    #[test]
    fn levenshtein() {
        assert_eq!(edit_distance(&w("a b c"), &w("a c")), 1);
        assert_eq!(edit_distance(&w("kitten"), &w("sitting")), 1);
        assert_eq!(edit_distance::<&str>(&[], &w("a b")), 2);
    }
}
