use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParallelCorpus, TextCodec, PAD};
use crate::error::{Error, Result};

/// Padded id matrices for one minibatch. Each row is `bos .. eos` followed by pad.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub source: Array2<usize>,
    pub target: Array2<usize>,
    pub source_mask: Array2<u8>,
    pub target_mask: Array2<u8>,
    /// Corpus indices of the pairs in row order.
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Unpadded `(source, target)` id rows.
    pub fn rows(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
        (0..self.size()).map(move |r| (unpad(&self.source, r), unpad(&self.target, r)))
    }
}

fn unpad(m: &Array2<usize>, r: usize) -> Vec<usize> {
    m.row(r).iter().copied().take_while(|&id| id != PAD).collect()
}

fn pad_rows(rows: &[Vec<usize>]) -> (Array2<usize>, Array2<u8>) {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut ids = Array2::from_elem((rows.len(), width), PAD);
    let mut mask = Array2::zeros((rows.len(), width));
    for (r, row) in rows.iter().enumerate() {
        for (c, &id) in row.iter().enumerate() {
            ids[[r, c]] = id;
            mask[[r, c]] = 1;
        }
    }
    (ids, mask)
}

/// Shuffles the corpus under `seed` and cuts it into batches of `batch_size`.
pub fn make_batches(
    corpus: &ParallelCorpus,
    source: &TextCodec,
    target: &TextCodec,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus has no sentence pairs"));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    Ok(order
        .chunks(batch_size)
        .map(|chunk| {
            let src: Vec<Vec<usize>> = chunk
                .iter()
                .map(|&i| source.encode(&corpus.pairs[i].0))
                .collect();
            let trg: Vec<Vec<usize>> = chunk
                .iter()
                .map(|&i| target.encode(&corpus.pairs[i].1))
                .collect();
            let (source, source_mask) = pad_rows(&src);
            let (target, target_mask) = pad_rows(&trg);
            Batch {
                source,
                target,
                source_mask,
                target_mask,
                indices: chunk.to_vec(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, BOS, EOS};

    fn corpus() -> (ParallelCorpus, TextCodec, TextCodec) {
        let c = ParallelCorpus::from_lines(
            &["a b c", "b", "c a"],
            &["x", "y y z", "z x y w"],
            Split::Train,
        )
        .unwrap();
        let s = TextCodec::fit(&c.sources().collect::<Vec<_>>(), 50, 1, 0).unwrap();
        let t = TextCodec::fit(&c.targets().collect::<Vec<_>>(), 50, 1, 0).unwrap();
        (c, s, t)
    }

    #[test]
    fn sizes_and_coverage() {
        let (c, s, t) = corpus();
        let batches = make_batches(&c, &s, &t, 2, 7).unwrap();
        assert_eq!(batches.iter().map(Batch::size).collect::<Vec<_>>(), [2, 1]);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort();
        assert_eq!(seen, [0, 1, 2]);
    }

    #[test]
    fn deterministic_under_seed() {
        let (c, s, t) = corpus();
        assert_eq!(
            make_batches(&c, &s, &t, 2, 11).unwrap(),
            make_batches(&c, &s, &t, 2, 11).unwrap()
        );
    }

    #[test]
    fn masks_count_non_pad_tokens() {
        let (c, s, t) = corpus();
        let batches = make_batches(&c, &s, &t, 2, 3).unwrap();
        let mask_total: usize = batches
            .iter()
            .map(|b| b.source_mask.iter().map(|&m| m as usize).sum::<usize>()
                + b.target_mask.iter().map(|&m| m as usize).sum::<usize>())
            .sum();
        // independent count: words + bos + eos on both sides
        let direct: usize = c
            .pairs
            .iter()
            .map(|(a, b)| a.split_whitespace().count() + b.split_whitespace().count() + 4)
            .sum();
        assert_eq!(mask_total, direct);
        for b in &batches {
            for (src, trg) in b.rows() {
                for row in [src, trg] {
                    assert_eq!(row[0], BOS);
                    assert_eq!(*row.last().unwrap(), EOS);
                    assert_eq!(row.iter().filter(|&&i| i == EOS).count(), 1);
                }
            }
        }
    }

    #[test]
    fn empty_corpus() {
        let (_, s, t) = corpus();
        let empty = ParallelCorpus::new(vec![], Split::Train);
        assert!(matches!(
            make_batches(&empty, &s, &t, 2, 0),
            Err(Error::EmptyInput(_))
        ));
    }
}
