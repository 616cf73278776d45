use crate::error::Result;

/// An autoregressive scorer: given the states of several partial hypotheses
/// and the token just appended to each, returns their successor states and
/// next-token log-probabilities.
pub trait StepScorer {
    type State: Clone;

    /// Initial state and first-token log-probabilities.
    fn start(&self) -> Result<(Self::State, Vec<f64>)>;

    fn step(&self, states: &[Self::State], tokens: &[usize]) -> Result<Vec<(Self::State, Vec<f64>)>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens, including the final `eos` when there is one.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
}

impl Hypothesis {
    /// Log-probability divided by the number of tokens.
    pub fn score(&self) -> f64 {
        self.log_prob / self.tokens.len().max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub width: usize,
    pub max_len: usize,
    pub eos: usize,
    /// Tokens never emitted (e.g. padding).
    pub banned: Vec<usize>,
}

/// Beam search ranked by length-normalized log-probability.
///
/// Each step keeps the `width` best expansions of the open hypotheses;
/// expansions ending in `eos` are set aside as finished, the rest stay open.
/// Hypotheses still open at `max_len` are finished as they are. The best
/// finished hypothesis by [`Hypothesis::score`] is returned.
pub fn beam_search<S: StepScorer>(scorer: &S, cfg: &BeamConfig) -> Result<Hypothesis> {
    let width = cfg.width.max(1);
    let (s0, lp0) = scorer.start()?;
    let mut open: Vec<(Hypothesis, S::State, Vec<f64>)> = vec![(
        Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
        },
        s0,
        lp0,
    )];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for t in 0..cfg.max_len {
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (i, (h, _, lp)) in open.iter().enumerate() {
            for (tok, &l) in lp.iter().enumerate() {
                if !cfg.banned.contains(&tok) && l.is_finite() {
                    cands.push((h.log_prob + l, i, tok));
                }
            }
        }
        // Highest log-probability first; ties keep the earlier expansion.
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        cands.truncate(width);

        let mut keep = Vec::new();
        for &(lp, i, tok) in &cands {
            let mut tokens = open[i].0.tokens.clone();
            tokens.push(tok);
            let h = Hypothesis {
                tokens,
                log_prob: lp,
            };
            if tok == cfg.eos || t + 1 == cfg.max_len {
                finished.push(h);
            } else {
                keep.push((h, i, tok));
            }
        }
        if keep.is_empty() {
            break;
        }
        let states: Vec<S::State> = keep.iter().map(|(_, i, _)| open[*i].1.clone()).collect();
        let tokens: Vec<usize> = keep.iter().map(|(_, _, tok)| *tok).collect();
        let next = scorer.step(&states, &tokens)?;
        open = keep
            .into_iter()
            .zip(next)
            .map(|((h, _, _), (s, lp))| (h, s, lp))
            .collect();
    }

    Ok(finished
        .into_iter()
        .fold(None::<Hypothesis>, |best, h| match best {
            Some(b) if b.score() >= h.score() => Some(b),
            _ => Some(h),
        })
        .unwrap_or(Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
        }))
}

/// Greedy decoding: the most probable token at every step.
pub fn greedy<S: StepScorer>(scorer: &S, cfg: &BeamConfig) -> Result<Hypothesis> {
    let (mut state, mut lp) = scorer.start()?;
    let mut h = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    };
    for _ in 0..cfg.max_len {
        let (tok, l) = lp
            .iter()
            .enumerate()
            .filter(|(t, l)| !cfg.banned.contains(t) && l.is_finite())
            .fold((usize::MAX, f64::NEG_INFINITY), |(bt, bl), (t, &l)| {
                if l > bl {
                    (t, l)
                } else {
                    (bt, bl)
                }
            });
        if tok == usize::MAX {
            break;
        }
        h.tokens.push(tok);
        h.log_prob += l;
        if tok == cfg.eos {
            break;
        }
        let mut next = scorer.step(std::slice::from_ref(&state), &[tok])?;
        (state, lp) = next.pop().expect("one state in, one out");
    }
    Ok(h)
}

