use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Single-character words: a-z, 0-9 and lowercase Greek (final sigma left
/// out so lowercasing is stable).
pub const SYNTH_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789αβγδεζηθικλμνξοπρστυφχψω";

/// Toy translation task: Zipf-distributed words, a fixed word-for-word
/// substitution, then adjacent words swapped pairwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthTranslation {
    pub min_len: usize,
    pub max_len: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthTranslation {
    fn default() -> Self {
        Self {
            min_len: 5,
            max_len: 15,
            zipf_exponent: 1.0,
            seed: 0,
        }
    }
}

/// Parallel lines, `(source, target)` per split.
pub type Split = (Vec<String>, Vec<String>);

impl SynthTranslation {
    /// Substitution table: source word `i` becomes target word `map[i]`.
    pub fn mapping(&self) -> Vec<usize> {
        let mut map: Vec<usize> = (0..alphabet().len()).collect();
        map.shuffle(&mut seeded(self.seed ^ 0x5eed_0f_7a61));
        map
    }

    /// The reference translation of a source line.
    pub fn translate(&self, source: &str) -> String {
        let words = alphabet();
        let map = self.mapping();
        let mut out: Vec<char> = source
            .split_whitespace()
            .map(|w| {
                let c = w.chars().next().unwrap_or('?');
                words.iter().position(|&a| a == c).map_or(c, |i| words[map[i]])
            })
            .collect();
        for pair in out.chunks_exact_mut(2) {
            pair.swap(0, 1);
        }
        join(&out)
    }

    /// Draws `sizes.len()` disjointly sampled splits from one stream.
    pub fn generate(&self, sizes: &[usize]) -> Result<Vec<Split>> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::invalid("synthetic sentence lengths must satisfy 0 < min <= max"));
        }
        let words = alphabet();
        let zipf = Zipf::new(words.len() as f64, self.zipf_exponent)
            .map_err(|e| Error::invalid(format!("zipf exponent: {e}")))?;
        let mut rng = seeded(self.seed);
        Ok(sizes
            .iter()
            .map(|&n| {
                let src: Vec<String> = (0..n)
                    .map(|_| {
                        let len = rng.random_range(self.min_len..=self.max_len);
                        let s: Vec<char> = (0..len)
                            .map(|_| words[zipf.sample(&mut rng) as usize - 1])
                            .collect();
                        join(&s)
                    })
                    .collect();
                let tgt = src.iter().map(|s| self.translate(s)).collect();
                (src, tgt)
            })
            .collect())
    }
}

fn alphabet() -> Vec<char> {
    SYNTH_ALPHABET.chars().collect()
}

fn join(words: &[char]) -> String {
    let mut s = String::with_capacity(words.len() * 3);
    for (i, c) in words.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push(*c);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textdata::Tokenizer;

    #[test]
    fn alphabet_fills_a_64_token_vocabulary() {
        assert_eq!(alphabet().len(), 60);
        let (src, tgt) = SynthTranslation::default().generate(&[5000]).unwrap().remove(0);
        assert_eq!(Tokenizer::learn(&src, 10).unwrap().vocab_size(), 64);
        assert_eq!(Tokenizer::learn(&tgt, 10).unwrap().vocab_size(), 64);
    }

    #[test]
    fn target_is_substitution_then_pair_swap() {
        let g = SynthTranslation::default();
        let map = g.mapping();
        let w = alphabet();
        let expect = format!("{} {} {}", w[map[1]], w[map[0]], w[map[2]]);
        assert_eq!(g.translate("a b c"), expect);
        let (src, tgt) = g.generate(&[50]).unwrap().remove(0);
        for (s, t) in src.iter().zip(&tgt) {
            let n = s.split(' ').count();
            assert!((5..=15).contains(&n));
            assert_eq!(t.split(' ').count(), n);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let g = SynthTranslation { seed: 4, ..Default::default() };
        assert_eq!(g.generate(&[20, 5]).unwrap(), g.generate(&[20, 5]).unwrap());
        assert_ne!(g.generate(&[20]).unwrap(), SynthTranslation::default().generate(&[20]).unwrap());
    }
}
