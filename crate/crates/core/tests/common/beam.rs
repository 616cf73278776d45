use ecmt::nmt::StepScorer;
use ecmt::Result;
use rand::Rng;

/// Bigram model over four tokens; token 0 ends a sequence.
pub struct Bigram {
    start: Vec<f64>,
    trans: Vec<Vec<f64>>,
}

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let z = x.iter().map(|v| v.exp()).sum::<f64>().ln();
    x.iter().map(|v| v - z).collect()
}

impl Bigram {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut row = || log_softmax(&(0..4).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>());
        Self {
            start: row(),
            trans: (0..4).map(|_| row()).collect(),
        }
    }

    pub fn log_prob(&self, seq: &[usize]) -> f64 {
        let mut lp = self.start[seq[0]];
        for w in seq.windows(2) {
            lp += self.trans[w[0]][w[1]];
        }
        lp
    }
}

impl StepScorer for Bigram {
    type State = usize;

    fn start(&self) -> Result<(usize, Vec<f64>)> {
        Ok((usize::MAX, self.start.clone()))
    }

    fn step(&self, _: &[usize], tokens: &[usize]) -> Result<Vec<(usize, Vec<f64>)>> {
        Ok(tokens.iter().map(|&t| (t, self.trans[t].clone())).collect())
    }
}

/// Every sequence of length 1..=max_len whose only end token is the last.
pub fn exhaustive(m: &Bigram, max_len: usize) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut stack: Vec<Vec<usize>> = (0..4).map(|t| vec![t]).collect();
    while let Some(seq) = stack.pop() {
        let ended = seq[seq.len() - 1] == 0;
        if ended || seq.len() == max_len {
            let score = m.log_prob(&seq) / seq.len() as f64;
            if score > best.1 {
                best = (seq, score);
            }
            continue;
        }
        for t in 0..4 {
            let mut next = seq.clone();
            next.push(t);
            stack.push(next);
        }
    }
    best
}
