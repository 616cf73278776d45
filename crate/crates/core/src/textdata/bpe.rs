use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Suffix carried by the last symbol of every word.
pub const END_OF_WORD: &str = "</w>";
const HEADER: &str = "#ecmt-bpe v1";
/// Pairs seen fewer times than this are never merged.
const MIN_PAIR_FREQ: usize = 2;

/// Lowercases and splits into words: whitespace separates words, and every
/// character that is neither alphanumeric nor whitespace becomes its own word.
pub fn pretokenize(line: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    for c in line.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        if !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            words.push(c.to_string());
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// Normalized form of a line: pretokenized words joined by single spaces.
pub fn normalize(line: &str) -> String {
    pretokenize(line).join(" ")
}

/// Learned merge list. Symbols never contain whitespace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    /// SHA-256 over the normalized training lines.
    pub fingerprint: String,
}

fn word_symbols(word: &str) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = syms.last_mut() {
        last.push_str(END_OF_WORD);
    }
    syms
}

fn fingerprint<S: AsRef<str>>(lines: &[S]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(normalize(l.as_ref()).as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl BpeModel {
    fn from_merges(merges: Vec<(String, String)>, fingerprint: String) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, m) in merges.iter().enumerate() {
            if ranks.insert(m.clone(), i).is_some() {
                return Err(Error::format(
                    "BPE model",
                    format!("duplicate merge `{} {}`", m.0, m.1),
                ));
            }
        }
        Ok(Self {
            merges,
            ranks,
            fingerprint,
        })
    }

    /// Greedy most-frequent-pair merging over word types. Equal counts are
    /// broken by the lexicographically smallest pair.
    pub fn learn<S: AsRef<str>>(lines: &[S], num_merges: usize) -> Result<Self> {
        if num_merges < 1 {
            return Err(Error::invalid("num_merges must be at least 1"));
        }
        if lines.is_empty() {
            return Err(Error::invalid("cannot learn BPE from an empty corpus"));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for l in lines {
            for w in pretokenize(l.as_ref()) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(Vec<String>, usize)> = counts
            .into_iter()
            .map(|(w, c)| (word_symbols(&w), c))
            .collect();

        let mut merges = Vec::new();
        while merges.len() < num_merges {
            let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
            for (syms, c) in &words {
                for p in syms.windows(2) {
                    *pairs.entry((&p[0], &p[1])).or_default() += c;
                }
            }
            let best = pairs
                .into_iter()
                .filter(|&(_, c)| c >= MIN_PAIR_FREQ)
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
            let Some(((a, b), _)) = best else { break };
            let pair = (a.to_string(), b.to_string());
            for (syms, _) in &mut words {
                apply_merge(syms, &pair.0, &pair.1);
            }
            merges.push(pair);
        }
        Self::from_merges(merges, fingerprint(lines))
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Segments one pretokenized word, applying merges in rank order.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut syms = word_symbols(word);
        loop {
            let best = syms
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0].clone(), p[1].clone())))
                .min();
            let Some(&rank) = best else { break };
            let (a, b) = &self.merges[rank];
            apply_merge(&mut syms, a, b);
        }
        syms
    }

    /// Subword tokens of a line (lowercased and pretokenized first).
    pub fn segment(&self, line: &str) -> Vec<String> {
        pretokenize(line)
            .iter()
            .flat_map(|w| self.segment_word(w))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} {}\n", self.fingerprint);
        for (a, b) in &self.merges {
            out.push_str(a);
            out.push(' ');
            out.push_str(b);
            out.push('\n');
        }
        out
    }

    /// Parses the text format: a version header line, then one merge per
    /// line as two space-separated symbols.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::format("BPE model", msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fp = header
            .strip_prefix(HEADER)
            .ok_or_else(|| bad(format!("unexpected header `{header}`")))?
            .trim()
            .to_string();
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    merges.push((a.to_string(), b.to_string()))
                }
                _ => return Err(bad(format!("line {}: expected two symbols", i + 2))),
            }
        }
        Self::from_merges(merges, fp)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn apply_merge(syms: &mut Vec<String>, a: &str, b: &str) {
    let mut i = 0;
    while i + 1 < syms.len() {
        if syms[i] == a && syms[i + 1] == b {
            let right = syms.remove(i + 1);
            syms[i].push_str(&right);
        }
        i += 1;
    }
}

/// Joins subword tokens back into words separated by single spaces.
pub fn merge_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for t in tokens {
        let t = t.as_ref();
        match t.strip_suffix(END_OF_WORD) {
            Some(stem) => {
                out.push_str(stem);
                out.push(' ');
            }
            None => out.push_str(t),
        }
    }
    let trimmed = out.trim_end().len();
    out.truncate(trimmed);
    out
}
