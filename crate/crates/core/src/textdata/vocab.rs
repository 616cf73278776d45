use std::collections::HashMap;
use std::path::Path;

use super::bpe::{merge_tokens, BpeModel};
use super::{BOS, EOS, NUM_RESERVED, PAD, UNK};
use crate::error::{Error, Result};

pub const RESERVED_TOKENS: [&str; NUM_RESERVED] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token/id maps. Ids `0..4` are the reserved tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let bad = |msg: String| Error::format("vocabulary file", msg);
        if tokens.len() < NUM_RESERVED || tokens[..NUM_RESERVED] != RESERVED_TOKENS {
            return Err(bad(format!(
                "must start with {}",
                RESERVED_TOKENS.join(", ")
            )));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(bad(format!("token {i} is empty or contains whitespace")));
            }
            if ids.insert(t.clone(), i).is_some() {
                return Err(bad(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self { tokens, ids })
    }

    /// Reserved tokens followed by every subword the model produces on
    /// `lines`, most frequent first (ties in token order).
    pub fn build<S: AsRef<str>>(model: &BpeModel, lines: &[S]) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for l in lines {
            for t in model.segment(l.as_ref()) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut seen: Vec<(String, usize)> = counts.into_iter().collect();
        seen.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        let tokens = RESERVED_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(seen.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens).expect("segmented tokens are well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ids of a line; subwords missing from the vocabulary map to `<unk>`.
    pub fn encode(&self, model: &BpeModel, line: &str) -> Vec<usize> {
        model.segment(line).iter().map(|t| self.id(t)).collect()
    }

    /// Text for ids, stopping at `<eos>` and skipping `<pad>`/`<bos>`.
    pub fn decode(&self, ids: &[usize]) -> String {
        let toks: Vec<&str> = ids
            .iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i != PAD && i != BOS)
            .map(|&i| match self.token(i) {
                Some(t) if i != UNK => t,
                _ => "<unk></w>",
            })
            .collect();
        merge_tokens(&toks)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// A BPE model with the vocabulary built over its training side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tokenizer {
    pub bpe: BpeModel,
    pub vocab: Vocab,
}

impl Tokenizer {
    pub fn learn<S: AsRef<str>>(lines: &[S], num_merges: usize) -> Result<Self> {
        let bpe = BpeModel::learn(lines, num_merges)?;
        let vocab = Vocab::build(&bpe, lines);
        Ok(Self { bpe, vocab })
    }

    pub fn encode(&self, line: &str) -> Vec<usize> {
        self.vocab.encode(&self.bpe, line)
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        self.vocab.decode(ids)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}
