use std::path::Path;

use rand::seq::SliceRandom;

use super::bpe::pretokenize;
use super::vocab::Tokenizer;
use super::PAD;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Splits UTF-8 corpus text into lines (`\n` or `\r\n`), dropping one
/// trailing empty line.
pub fn parse_lines(bytes: &[u8]) -> Result<Vec<String>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::format("corpus file", format!("invalid UTF-8: {e}")))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_lines(&bytes)
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Keeps line pairs whose both sides have between `min` and `max` words.
pub fn length_filter(
    src: &[String],
    tgt: &[String],
    min: usize,
    max: usize,
) -> Result<(Vec<String>, Vec<String>)> {
    if src.len() != tgt.len() {
        return Err(Error::invalid(format!(
            "parallel sides differ: {} vs {} lines",
            src.len(),
            tgt.len()
        )));
    }
    let ok = |l: &str| (min..=max).contains(&pretokenize(l).len());
    Ok(src
        .iter()
        .zip(tgt)
        .filter(|(s, t)| ok(s) && ok(t))
        .map(|(s, t)| (s.clone(), t.clone()))
        .unzip())
}

/// Aligned id sequences for the two sides of a translation corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub src: Vec<Vec<usize>>,
    pub tgt: Vec<Vec<usize>>,
}

impl ParallelCorpus {
    pub fn new(src: Vec<Vec<usize>>, tgt: Vec<Vec<usize>>) -> Result<Self> {
        if src.len() != tgt.len() {
            return Err(Error::invalid(format!(
                "parallel sides differ: {} vs {} sentences",
                src.len(),
                tgt.len()
            )));
        }
        if let Some(i) = src.iter().zip(&tgt).position(|(s, t)| s.is_empty() || t.is_empty()) {
            return Err(Error::invalid(format!("sentence pair {} is empty", i + 1)));
        }
        Ok(Self { src, tgt })
    }

    pub fn encode<S: AsRef<str>>(
        src_tok: &Tokenizer,
        tgt_tok: &Tokenizer,
        src: &[S],
        tgt: &[S],
    ) -> Result<Self> {
        Self::new(
            src.iter().map(|l| src_tok.encode(l.as_ref())).collect(),
            tgt.iter().map(|l| tgt_tok.encode(l.as_ref())).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Largest id on each side, for checking against model vocabularies.
    pub fn max_ids(&self) -> (usize, usize) {
        let m = |side: &[Vec<usize>]| side.iter().flatten().copied().max().unwrap_or(0);
        (m(&self.src), m(&self.tgt))
    }

    /// Mean sentence lengths in tokens, `(source, target)`.
    pub fn mean_lengths(&self) -> (f64, f64) {
        let m = |side: &[Vec<usize>]| {
            side.iter().map(Vec::len).sum::<usize>() as f64 / side.len().max(1) as f64
        };
        (m(&self.src), m(&self.tgt))
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            src: idx.iter().map(|&i| self.src[i].clone()).collect(),
            tgt: idx.iter().map(|&i| self.tgt[i].clone()).collect(),
        }
    }

    /// `n` pairs drawn without replacement, kept in corpus order. Samples for
    /// the same seed are nested: a smaller `n` yields a subset.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self> {
        if n > self.len() {
            return Err(Error::invalid(format!(
                "cannot sample {n} pairs from a corpus of {}",
                self.len()
            )));
        }
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.shuffle(&mut seeded(seed));
        let mut idx = perm[..n].to_vec();
        idx.sort_unstable();
        Ok(self.select(&idx))
    }
}

/// Right-padded `[rows, width]` id matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Padded {
    pub ids: Vec<usize>,
    pub lengths: Vec<usize>,
    pub width: usize,
}

impl Padded {
    pub fn new(seqs: &[&[usize]]) -> Self {
        let width = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = vec![PAD; seqs.len() * width];
        for (r, s) in seqs.iter().enumerate() {
            ids[r * width..r * width + s.len()].copy_from_slice(s);
        }
        Self {
            ids,
            lengths: seqs.iter().map(|s| s.len()).collect(),
            width,
        }
    }

    pub fn rows(&self) -> usize {
        self.lengths.len()
    }

    /// Ids at position `t` of every row (`<pad>` past the end).
    pub fn column(&self, t: usize) -> Vec<usize> {
        (0..self.rows()).map(|r| self.ids[r * self.width + t]).collect()
    }

    pub fn is_pad(&self, row: usize, t: usize) -> bool {
        t >= self.lengths[row]
    }

    pub fn pad_count(&self) -> usize {
        self.ids.len() - self.lengths.iter().sum::<usize>()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.ids[r * self.width..r * self.width + self.lengths[r]]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    /// Corpus positions of the rows.
    pub indices: Vec<usize>,
    pub src: Padded,
    pub tgt: Padded,
}

/// Groups pairs of similar length into batches of at most `batch_size`;
/// the final partial batch is kept.
pub fn make_batches(corpus: &ParallelCorpus, batch_size: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by_key(|&i| (corpus.src[i].len(), corpus.tgt[i].len()));
    Ok(order
        .chunks(batch_size)
        .map(|idx| {
            let src: Vec<&[usize]> = idx.iter().map(|&i| corpus.src[i].as_slice()).collect();
            let tgt: Vec<&[usize]> = idx.iter().map(|&i| corpus.tgt[i].as_slice()).collect();
            Batch {
                indices: idx.to_vec(),
                src: Padded::new(&src),
                tgt: Padded::new(&tgt),
            }
        })
        .collect())
}
