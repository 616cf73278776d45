use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::game::{FeatureSet, GameRound};
use crate::nn::{gumbel_softmax, Activation, Embedding, Graph, GruCell, Mlp, ParamStore};
use crate::rng::RunRng;
use crate::tensor::{Element, Tape, Var};
use crate::textdata::{BOS, EOS};

/// Floor applied to squared distances before they are inverted into scores.
pub const MIN_SQ_DIST: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Maximum message length.
    pub max_len: usize,
    pub temperature: f64,
    pub dropout: f64,
    /// Straight-through one-hot tokens (true) or relaxed soft tokens.
    pub hard_messages: bool,
}

impl AgentConfig {
    pub fn new(vocab_size: usize, feature_dim: usize, max_len: usize) -> Self {
        Self {
            vocab_size,
            feature_dim,
            embed_dim: 256,
            hidden_dim: 512,
            max_len,
            temperature: 1.0,
            dropout: 0.1,
            hard_messages: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= EOS {
            return Err(Error::invalid(format!(
                "vocabulary of {} cannot hold the reserved tokens",
                self.vocab_size
            )));
        }
        if self.feature_dim == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("agent dimensions must be positive"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("maximum message length must be at least 1"));
        }
        if !(self.temperature > 0.0) || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("temperature must be > 0 and dropout in [0, 1)"));
        }
        Ok(())
    }
}

/// Layer layout of one agent. Parameters live in a separate [`ParamStore`]
/// so the same layout can run over `f32` training weights or an `f64` copy.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentArch {
    pub config: AgentConfig,
    pub image_proj: Mlp,
    pub speaker_embed: Embedding,
    pub speaker_gru: GruCell,
    pub speaker_out: Mlp,
    pub listener_embed: Embedding,
    pub listener_gru: GruCell,
}

/// Tokens emitted by the speaker for a batch of images.
#[derive(Clone, Debug)]
pub struct SpokenBatch {
    /// Per step `[b, vocab]`: what the listener consumes.
    pub tokens: Vec<Var>,
    /// Per step relaxed distributions.
    pub soft: Vec<Var>,
    /// Per image hard token ids, truncated after the first `<eos>`.
    pub ids: Vec<Vec<usize>>,
}

impl SpokenBatch {
    pub fn lengths(&self) -> Vec<usize> {
        self.ids.iter().map(Vec::len).collect()
    }
}

/// A single message with plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub hard_tokens: Vec<usize>,
    pub soft_tokens: Vec<Vec<f32>>,
}

impl Message {
    pub fn len(&self) -> usize {
        self.hard_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hard_tokens.is_empty()
    }
}

/// Loss and bookkeeping for one batch of game rounds.
#[derive(Clone, Debug)]
pub struct GameOutput {
    pub loss: Var,
    /// `[rounds, k + 1]` compatibility scores.
    pub scores: Var,
    pub correct: usize,
    pub message_lengths: Vec<usize>,
}

/// Runs `gru` over per-step inputs `[b, in]`, holding each row's state fixed
/// once its length is exhausted, and returns the state after the last real
/// step of every row.
pub(crate) fn run_masked<T: Element>(
    g: &mut Graph<T>,
    gru: &GruCell,
    inputs: &[Var],
    lengths: &[usize],
    h0: Var,
) -> Result<Var> {
    let mut h = h0;
    for (t, &x) in inputs.iter().enumerate() {
        if lengths.iter().all(|&l| l <= t) {
            break;
        }
        let next = gru.step(g, x, h)?;
        h = if lengths.iter().all(|&l| l > t) {
            next
        } else {
            let alive = lengths
                .iter()
                .map(|&l| if l > t { T::one() } else { T::zero() })
                .collect();
            let alive = g.constant(&[lengths.len()], alive)?;
            let delta = g.tape.sub(next, h)?;
            let delta = g.tape.scale_rows(delta, alive)?;
            g.tape.add(h, delta)?
        };
    }
    Ok(h)
}

/// `||h_b - p_{b,c}||^-2` for listener states `h: [b, hid]` against projected
/// candidates `cands: [b * c, hid]`, laid out `[b, c]`.
pub fn compatibility_scores<T: Element>(
    tape: &mut Tape<T>,
    h: Var,
    cands: Var,
    per_round: usize,
) -> Result<Var> {
    let (hs, cs) = (tape.shape(h).to_vec(), tape.shape(cands).to_vec());
    if hs.len() != 2 || cs.len() != 2 || hs[1] != cs[1] || cs[0] != hs[0] * per_round {
        return Err(Error::shape("compatibility_scores", &[&hs, &cs]));
    }
    let rows: Vec<usize> = (0..hs[0])
        .flat_map(|b| std::iter::repeat_n(b, per_round))
        .collect();
    let h_rep = tape.embedding_lookup(h, &rows)?;
    let diff = tape.sub(h_rep, cands)?;
    let sq = tape.mul(diff, diff)?;
    let d2 = tape.row_sum(sq)?;
    let d2 = tape.clamp_min(d2, T::from_f64_lossy(MIN_SQ_DIST));
    let scores = tape.recip(d2);
    tape.reshape(scores, &[hs[0], per_round])
}

/// Mean over rounds of `-log softmax(scores)[target]`.
pub fn game_loss<T: Element>(tape: &mut Tape<T>, scores: Var, targets: &[usize]) -> Result<Var> {
    let s = tape.shape(scores).to_vec();
    if s.len() != 2 || s[0] != targets.len() || targets.iter().any(|&t| t >= s[1]) {
        return Err(Error::Shape {
            op: "game_loss",
            shapes: format!("{s:?} with targets {targets:?}"),
        });
    }
    let logp = tape.log_softmax(scores)?;
    let mut pick = vec![T::zero(); s[0] * s[1]];
    for (r, &t) in targets.iter().enumerate() {
        pick[r * s[1] + t] = T::one();
    }
    let pick = tape.constant(&s, pick)?;
    let picked = tape.mul(logp, pick)?;
    let total = tape.sum(picked);
    Ok(tape.scale(total, T::from_f64_lossy(-1.0 / targets.len() as f64)))
}

/// Index of the first maximum of every row of a `[rows, n]` value buffer.
pub(crate) fn row_argmax<T: Element>(values: &[T], n: usize) -> Vec<usize> {
    values
        .chunks(n)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

impl AgentArch {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        Ok(Self {
            image_proj: Mlp::new(
                "image_proj",
                &[c.feature_dim, c.hidden_dim],
                Activation::Identity,
            )?,
            speaker_embed: Embedding::new("speaker.embed", c.vocab_size, c.embed_dim),
            speaker_gru: GruCell::new("speaker.gru", c.embed_dim, c.hidden_dim),
            speaker_out: Mlp::new(
                "speaker.out",
                &[c.hidden_dim, c.vocab_size],
                Activation::Identity,
            )?,
            listener_embed: Embedding::new("listener.embed", c.vocab_size, c.embed_dim),
            listener_gru: GruCell::new("listener.gru", c.embed_dim, c.hidden_dim),
            config,
        })
    }

    /// Fresh parameters; draws happen in layer declaration order.
    pub fn init_params<T: Element>(&self, rng: &mut RunRng) -> ParamStore<T> {
        let mut store = ParamStore::new();
        self.image_proj.init(&mut store, rng);
        self.speaker_embed.init(&mut store, rng);
        self.speaker_gru.init(&mut store, rng);
        self.speaker_out.init(&mut store, rng);
        self.listener_embed.init(&mut store, rng);
        self.listener_gru.init(&mut store, rng);
        store
    }

    /// Projects feature rows `[n, d]` into the recurrent state space.
    pub fn project<T: Element>(&self, g: &mut Graph<T>, images: Var) -> Result<Var> {
        self.image_proj.forward(g, images)
    }

    /// Message generation from initial speaker contexts `[b, hidden]`
    /// (the projected images). `<eos>` is masked out at the first step.
    pub fn speak<T: Element>(&self, g: &mut Graph<T>, context: Var) -> Result<SpokenBatch> {
        let c = &self.config;
        let b = g.tape.shape(context)[0];
        let v = c.vocab_size;
        let bos = self.speaker_embed.lookup(g, &vec![BOS; b])?;
        let bos = g.dropout(bos)?;
        let mut h = self.speaker_gru.step(g, bos, context)?;

        let mut eos_mask = vec![T::zero(); b * v];
        for r in 0..b {
            eos_mask[r * v + EOS] = T::neg_infinity();
        }
        let eos_mask = g.constant(&[b, v], eos_mask)?;

        let mut out = SpokenBatch {
            tokens: Vec::with_capacity(c.max_len),
            soft: Vec::with_capacity(c.max_len),
            ids: vec![Vec::new(); b],
        };
        let mut done = vec![false; b];
        for t in 0..c.max_len {
            let mut logits = self.speaker_out.forward(g, h)?;
            if t == 0 {
                logits = g.tape.add(logits, eos_mask)?;
            }
            let sample = gumbel_softmax(g, logits, c.temperature, c.hard_messages)?;
            for (r, &tok) in sample.index.iter().enumerate() {
                if !done[r] {
                    out.ids[r].push(tok);
                    done[r] = tok == EOS;
                }
            }
            out.tokens.push(sample.out);
            out.soft.push(sample.soft);
            if t + 1 == c.max_len || done.iter().all(|&d| d) {
                break;
            }
            let x = self.speaker_embed.soft_lookup(g, sample.out)?;
            let x = g.dropout(x)?;
            h = self.speaker_gru.step(g, x, h)?;
        }
        Ok(out)
    }

    /// Listener pass over per-step token distributions; returns the state
    /// after each row's last real token.
    pub fn listen<T: Element>(
        &self,
        g: &mut Graph<T>,
        tokens: &[Var],
        lengths: &[usize],
    ) -> Result<Var> {
        if tokens.is_empty() || lengths.contains(&0) {
            return Err(Error::invalid("listener needs a non-empty message"));
        }
        let b = lengths.len();
        let mut inputs = Vec::with_capacity(tokens.len());
        for &tok in tokens {
            let x = self.listener_embed.soft_lookup(g, tok)?;
            inputs.push(g.dropout(x)?);
        }
        let h0 = g.constant(&[b, self.config.hidden_dim], vec![T::zero(); b * self.config.hidden_dim])?;
        run_masked(g, &self.listener_gru, &inputs, lengths, h0)
    }

    /// Listener pass over hard token ids.
    pub fn listen_ids<T: Element>(&self, g: &mut Graph<T>, messages: &[Vec<usize>]) -> Result<Var> {
        let tokens = one_hot_steps(g, messages, self.config.vocab_size)?;
        let lengths: Vec<usize> = messages.iter().map(Vec::len).collect();
        self.listen(g, &tokens, &lengths)
    }

    /// Plays a batch of rounds (all with the same number of confounders).
    pub fn play<T: Element>(
        &self,
        g: &mut Graph<T>,
        features: &FeatureSet,
        rounds: &[GameRound],
    ) -> Result<GameOutput> {
        let per_round = rounds
            .first()
            .ok_or_else(|| Error::invalid("no game rounds"))?
            .k()
            + 1;
        if rounds.iter().any(|r| r.k() + 1 != per_round) {
            return Err(Error::invalid("rounds in a batch must share k"));
        }
        if features.dim() != self.config.feature_dim {
            return Err(Error::Shape {
                op: "play",
                shapes: format!(
                    "features of dim {} vs agent input {}",
                    features.dim(),
                    self.config.feature_dim
                ),
            });
        }

        // Project each distinct image once and gather rows from the pool.
        let mut pool: BTreeMap<usize, usize> = BTreeMap::new();
        for r in rounds {
            pool.entry(r.target).or_insert(0);
            for &c in &r.confounders {
                pool.entry(c).or_insert(0);
            }
        }
        let ids: Vec<usize> = pool.keys().copied().collect();
        for (pos, slot) in pool.values_mut().enumerate() {
            *slot = pos;
        }
        let data = features
            .gather(&ids)
            .into_iter()
            .map(|v| T::from_f64_lossy(v as f64))
            .collect();
        let images = g.constant(&[ids.len(), features.dim()], data)?;
        let proj = self.project(g, images)?;

        let targets: Vec<usize> = rounds.iter().map(|r| pool[&r.target]).collect();
        let context = g.tape.embedding_lookup(proj, &targets)?;
        let spoken = self.speak(g, context)?;
        let lengths = spoken.lengths();
        let h = self.listen(g, &spoken.tokens, &lengths)?;

        let cand_rows: Vec<usize> = rounds
            .iter()
            .flat_map(|r| r.candidates().into_iter().map(|c| pool[&c]))
            .collect();
        let cands = g.tape.embedding_lookup(proj, &cand_rows)?;
        let scores = compatibility_scores(&mut g.tape, h, cands, per_round)?;
        let positions: Vec<usize> = rounds.iter().map(|r| r.target_position).collect();
        let loss = game_loss(&mut g.tape, scores, &positions)?;
        let correct = row_argmax(g.tape.value(scores), per_round)
            .iter()
            .zip(&positions)
            .filter(|(a, b)| a == b)
            .count();
        Ok(GameOutput {
            loss,
            scores,
            correct,
            message_lengths: lengths,
        })
    }
}

/// Per-step one-hot `[b, vocab]` constants for a batch of id sequences;
/// rows that have ended are zero-filled.
pub(crate) fn one_hot_steps<T: Element>(
    g: &mut Graph<T>,
    messages: &[Vec<usize>],
    vocab: usize,
) -> Result<Vec<Var>> {
    let steps = messages.iter().map(Vec::len).max().unwrap_or(0);
    let b = messages.len();
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut data = vec![T::zero(); b * vocab];
        for (r, m) in messages.iter().enumerate() {
            if let Some(&tok) = m.get(t) {
                if tok >= vocab {
                    return Err(Error::VocabMismatch(format!(
                        "token {tok} outside vocabulary of {vocab}"
                    )));
                }
                data[r * vocab + tok] = T::one();
            }
        }
        out.push(g.constant(&[b, vocab], data)?);
    }
    Ok(out)
}

/// An agent: layer layout plus its `f32` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub arch: AgentArch,
    pub params: ParamStore,
}

impl Agent {
    pub fn new(config: AgentConfig, rng: &mut RunRng) -> Result<Self> {
        let arch = AgentArch::new(config)?;
        let params = arch.init_params(rng);
        Ok(Self { arch, params })
    }

    /// Wraps loaded weights, checking that they match `config` exactly.
    pub fn from_params(config: AgentConfig, params: ParamStore) -> Result<Self> {
        let arch = AgentArch::new(config)?;
        let expected: ParamStore = arch.init_params(&mut crate::rng::seeded(0));
        check_layout(&expected, &params)?;
        Ok(Self { arch, params })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.arch.config
    }

    /// Generates one message for a single feature vector. With `rng` the
    /// tokens are Gumbel samples (with dropout); without, pure argmax.
    pub fn generate_message(&self, image: &[f32], rng: Option<&mut RunRng>) -> Result<Message> {
        let c = &self.arch.config;
        if image.len() != c.feature_dim {
            return Err(Error::Shape {
                op: "generate_message",
                shapes: format!("image of {} vs {}", image.len(), c.feature_dim),
            });
        }
        let mut g = match rng {
            Some(rng) => Graph::train(&self.params, rng, c.dropout),
            None => Graph::eval(&self.params),
        };
        let x = g.constant(&[1, c.feature_dim], image.to_vec())?;
        let ctx = self.arch.project(&mut g, x)?;
        let spoken = self.arch.speak(&mut g, ctx)?;
        let hard_tokens = spoken.ids[0].clone();
        let soft_tokens = spoken.soft[..hard_tokens.len()]
            .iter()
            .map(|&s| g.tape.value(s).to_vec())
            .collect();
        Ok(Message {
            hard_tokens,
            soft_tokens,
        })
    }

    /// Final listener state for a message (eval mode).
    pub fn listen(&self, message: &Message) -> Result<Vec<f32>> {
        if message.is_empty() {
            return Err(Error::invalid("listener needs a non-empty message"));
        }
        let mut g = Graph::eval(&self.params);
        let h = self
            .arch
            .listen_ids(&mut g, std::slice::from_ref(&message.hard_tokens))?;
        Ok(g.tape.value(h).to_vec())
    }

    /// `MLP1(image)` in eval mode.
    pub fn project(&self, image: &[f32]) -> Result<Vec<f32>> {
        let mut g = Graph::eval(&self.params);
        let x = g.constant(&[1, image.len()], image.to_vec())?;
        let p = self.arch.project(&mut g, x)?;
        Ok(g.tape.value(p).to_vec())
    }
}

/// Errors unless `actual` holds exactly the tensors of `expected`, with the
/// same shapes.
pub(crate) fn check_layout(expected: &ParamStore, actual: &ParamStore) -> Result<()> {
    for (name, t) in expected.iter() {
        let a = actual
            .get(name)
            .map_err(|_| Error::format("checkpoint", format!("missing tensor `{name}`")))?;
        if a.shape() != t.shape() {
            return Err(Error::shape("checkpoint", &[a.shape(), t.shape()]));
        }
    }
    if let Some(extra) = actual.names().find(|n| !expected.contains(n)) {
        return Err(Error::format("checkpoint", format!("unexpected tensor `{extra}`")));
    }
    Ok(())
}

/// Inverse squared distance between a listener state and a projected image,
/// with the distance floored at [`MIN_SQ_DIST`].
pub fn compatibility_score(h_final: &[f32], projected: &[f32]) -> Result<f64> {
    if h_final.len() != projected.len() {
        return Err(Error::shape(
            "compatibility_score",
            &[&[h_final.len()], &[projected.len()]],
        ));
    }
    let d2: f64 = h_final
        .iter()
        .zip(projected)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(1.0 / d2.max(MIN_SQ_DIST))
}
