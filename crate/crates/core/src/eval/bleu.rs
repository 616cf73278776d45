use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corpus-level BLEU-4 with its components. Precisions are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub bleu: f64,
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn ngram_counts<'a, 'b>(toks: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut m = HashMap::new();
    for w in toks.windows(n) {
        *m.entry(w).or_default() += 1;
    }
    m
}

/// Unsmoothed corpus BLEU-4 over whitespace-tokenized lines, one reference
/// per hypothesis.
pub fn bleu4<S: AsRef<str>, R: AsRef<str>>(hypotheses: &[S], references: &[R]) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c, mut r) = (0, 0);
    for (h, rf) in hypotheses.iter().zip(references) {
        let h: Vec<&str> = h.as_ref().split_whitespace().collect();
        let rf: Vec<&str> = rf.as_ref().split_whitespace().collect();
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&rf, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
            matches[n - 1] += hc
                .iter()
                .map(|(g, &k)| k.min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    let precisions = std::array::from_fn(|i| {
        if totals[i] == 0 {
            0.0
        } else {
            100.0 * matches[i] as f64 / totals[i] as f64
        }
    });
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let bleu = if matches.contains(&0) {
        0.0
    } else {
        let log_mean = (0..4)
            .map(|i| (matches[i] as f64 / totals[i] as f64).ln())
            .sum::<f64>()
            / 4.0;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuReport {
        bleu,
        precisions,
        brevity_penalty,
        hyp_len: c,
        ref_len: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_hundred() {
        let lines = ["a b c d e", "the cat is on the mat"];
        assert_eq!(bleu4(&lines, &lines).unwrap().bleu, 100.0);
    }

    #[test]
    fn no_four_gram_is_zero() {
        let r = bleu4(&["a b c d"], &["a b c e"]).unwrap();
        assert_eq!(r.bleu, 0.0);
        assert!(r.precisions[0] > 0.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(bleu4(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn report_json_round_trips() {
        let r = bleu4(&["a b c d e"], &["a b c d e f"]).unwrap();
        let back: BleuReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
