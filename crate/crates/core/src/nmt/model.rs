use crate::error::{Error, Result};
use crate::game::{check_layout, run_masked, Agent, AgentArch};
use crate::nn::{Activation, Embedding, Graph, GruCell, Linear, Mlp, ParamStore};
use crate::rng::RunRng;
use crate::tensor::{Element, Tensor, Var};
use crate::textdata::{Padded, BOS};

/// Which pretrained tensors are copied into (and regularized toward) w★.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferScope {
    /// GRU weights only.
    RnnOnly,
    /// GRU weights, embeddings and the decoder output projection.
    AllMatching,
}

impl std::str::FromStr for TransferScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn_only" => Ok(Self::RnnOnly),
            "all_matching" => Ok(Self::AllMatching),
            _ => Err(Error::Config(format!("unknown transfer scope `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdapterConfig {
    pub bottleneck: usize,
    pub dropout: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            bottleneck: 256,
            dropout: 0.2,
        }
    }
}

/// Residual bottleneck between encoder and decoder:
/// `x + up(relu(down(dropout(x))))`. The up-projection starts at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Adapter {
    pub down: Linear,
    pub up: Linear,
}

impl Adapter {
    pub fn new(hidden: usize, cfg: AdapterConfig) -> Self {
        Self {
            down: Linear::new("adapter.down", hidden, cfg.bottleneck),
            up: Linear::new("adapter.up", cfg.bottleneck, hidden),
        }
    }

    pub fn init<T: Element>(&self, store: &mut ParamStore<T>, rng: &mut RunRng) {
        self.down.init(store, rng);
        store.insert(
            self.up.weight_name(),
            Tensor::zeros(&[self.up.in_dim, self.up.out_dim]),
        );
        store.insert(self.up.bias_name(), Tensor::zeros(&[self.up.out_dim]));
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let d = g.dropout(x)?;
        let d = self.down.forward(g, d)?;
        let d = g.tape.relu(d);
        let d = self.up.forward(g, d)?;
        g.tape.add(x, d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub adapter: Option<AdapterConfig>,
    pub scope: TransferScope,
}

impl ModelConfig {
    pub fn new(src_vocab: usize, tgt_vocab: usize) -> Self {
        Self {
            src_vocab,
            tgt_vocab,
            embed_dim: 256,
            hidden_dim: 512,
            adapter: Some(AdapterConfig::default()),
            scope: TransferScope::AllMatching,
        }
    }
}

/// GRU encoder-decoder layout. The encoder mirrors a listener, the decoder a
/// speaker whose initial context is the (adapted) encoder state.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq2SeqArch {
    pub config: ModelConfig,
    pub enc_embed: Embedding,
    pub enc_gru: GruCell,
    pub dec_embed: Embedding,
    pub dec_gru: GruCell,
    pub dec_out: Mlp,
    pub adapter: Option<Adapter>,
}

impl Seq2SeqArch {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let c = &config;
        if c.src_vocab <= BOS + 1 || c.tgt_vocab <= BOS + 1 || c.embed_dim == 0 || c.hidden_dim == 0 {
            return Err(Error::invalid("translation model sizes too small"));
        }
        Ok(Self {
            enc_embed: Embedding::new("encoder.embed", c.src_vocab, c.embed_dim),
            enc_gru: GruCell::new("encoder.gru", c.embed_dim, c.hidden_dim),
            dec_embed: Embedding::new("decoder.embed", c.tgt_vocab, c.embed_dim),
            dec_gru: GruCell::new("decoder.gru", c.embed_dim, c.hidden_dim),
            dec_out: Mlp::new(
                "decoder.out",
                &[c.hidden_dim, c.tgt_vocab],
                Activation::Identity,
            )?,
            adapter: c.adapter.map(|a| Adapter::new(c.hidden_dim, a)),
            config,
        })
    }

    pub fn init_params<T: Element>(&self, rng: &mut RunRng) -> ParamStore<T> {
        let mut s = ParamStore::new();
        self.enc_embed.init(&mut s, rng);
        self.enc_gru.init(&mut s, rng);
        self.dec_embed.init(&mut s, rng);
        self.dec_gru.init(&mut s, rng);
        self.dec_out.init(&mut s, rng);
        if let Some(a) = &self.adapter {
            a.init(&mut s, rng);
        }
        s
    }

    /// Final encoder states `[b, hidden]` for padded source ids.
    pub fn encode<T: Element>(&self, g: &mut Graph<T>, src: &Padded) -> Result<Var> {
        if src.rows() == 0 || src.lengths.contains(&0) {
            return Err(Error::invalid("empty source sentence"));
        }
        let mut inputs = Vec::with_capacity(src.width);
        for t in 0..src.width {
            let x = self.enc_embed.lookup(g, &src.column(t))?;
            inputs.push(g.dropout(x)?);
        }
        let (b, h) = (src.rows(), self.config.hidden_dim);
        let h0 = g.constant(&[b, h], vec![T::zero(); b * h])?;
        run_masked(g, &self.enc_gru, &inputs, &src.lengths, h0)
    }

    /// Encoder state passed through the adapter when there is one.
    pub fn bridge<T: Element>(&self, g: &mut Graph<T>, enc: Var) -> Result<Var> {
        match &self.adapter {
            Some(a) => a.forward(g, enc),
            None => Ok(enc),
        }
    }

    /// First decoder state: one GRU step on `<bos>` from the bridged context.
    pub fn decoder_start<T: Element>(&self, g: &mut Graph<T>, context: Var) -> Result<Var> {
        let b = g.tape.shape(context)[0];
        let x = self.dec_embed.lookup(g, &vec![BOS; b])?;
        let x = g.dropout(x)?;
        self.dec_gru.step(g, x, context)
    }

    pub fn decoder_step<T: Element>(&self, g: &mut Graph<T>, h: Var, prev: &[usize]) -> Result<Var> {
        let x = self.dec_embed.lookup(g, prev)?;
        let x = g.dropout(x)?;
        self.dec_gru.step(g, x, h)
    }

    /// Teacher-forced logits `[b, tgt_vocab]` for every target position.
    pub fn logits<T: Element>(&self, g: &mut Graph<T>, src: &Padded, tgt: &Padded) -> Result<Vec<Var>> {
        if src.rows() != tgt.rows() {
            return Err(Error::invalid("source and target batch sizes differ"));
        }
        let enc = self.encode(g, src)?;
        let ctx = self.bridge(g, enc)?;
        let mut h = self.decoder_start(g, ctx)?;
        let mut out = Vec::with_capacity(tgt.width);
        for t in 0..tgt.width {
            if t > 0 {
                h = self.decoder_step(g, h, &tgt.column(t - 1))?;
            }
            out.push(self.dec_out.forward(g, h)?);
        }
        Ok(out)
    }

    /// Mean over non-pad target tokens of `-log P(y_t | y_<t, x)`.
    pub fn sequence_loss<T: Element>(&self, g: &mut Graph<T>, src: &Padded, tgt: &Padded) -> Result<Var> {
        let tokens: usize = tgt.lengths.iter().sum();
        if tokens == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let v = self.config.tgt_vocab;
        let logits = self.logits(g, src, tgt)?;
        let mut total: Option<Var> = None;
        for (t, l) in logits.into_iter().enumerate() {
            let mut pick = vec![T::zero(); tgt.rows() * v];
            for r in 0..tgt.rows() {
                if !tgt.is_pad(r, t) {
                    let id = tgt.ids[r * tgt.width + t];
                    if id >= v {
                        return Err(Error::VocabMismatch(format!(
                            "target id {id} outside vocabulary of {v}"
                        )));
                    }
                    pick[r * v + id] = T::one();
                }
            }
            let logp = g.tape.log_softmax(l)?;
            let pick = g.constant(&[tgt.rows(), v], pick)?;
            let picked = g.tape.mul(logp, pick)?;
            let s = g.tape.sum(picked);
            total = Some(match total {
                Some(acc) => g.tape.add(acc, s)?,
                None => s,
            });
        }
        let total = total.expect("at least one target step");
        Ok(g.tape.scale(total, T::from_f64_lossy(-1.0 / tokens as f64)))
    }
}

/// `(model tensor, agent tensor, from source agent, recurrent core)` for
/// everything that can be transferred.
fn transfer_map(arch: &Seq2SeqArch, src: &AgentArch, tgt: &AgentArch) -> Vec<(String, String, bool, bool)> {
    let mut m = Vec::new();
    for (d, s) in arch.enc_gru.param_names().into_iter().zip(src.listener_gru.param_names()) {
        m.push((d, s, true, true));
    }
    for (d, s) in arch.dec_gru.param_names().into_iter().zip(tgt.speaker_gru.param_names()) {
        m.push((d, s, false, true));
    }
    m.push((arch.enc_embed.table_name(), src.listener_embed.table_name(), true, false));
    m.push((arch.dec_embed.table_name(), tgt.speaker_embed.table_name(), false, false));
    for (d, s) in arch.dec_out.layers().iter().zip(tgt.speaker_out.layers()) {
        m.push((d.weight_name(), s.weight_name(), false, false));
        m.push((d.bias_name(), s.bias_name(), false, false));
    }
    m
}

/// A translation model with its pretrained reference point w★ (empty when
/// nothing was transferred).
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationModel {
    pub arch: Seq2SeqArch,
    pub params: ParamStore,
    pub w_star: ParamStore,
}

impl TranslationModel {
    /// Randomly initialized model (the no-transfer baseline).
    pub fn random(config: ModelConfig, rng: &mut RunRng) -> Result<Self> {
        let arch = Seq2SeqArch::new(config)?;
        let params = arch.init_params(rng);
        Ok(Self {
            arch,
            params,
            w_star: ParamStore::new(),
        })
    }

    /// Source listener as encoder, target speaker as decoder. Everything not
    /// transferred (including the adapter) is freshly initialized; the image
    /// projection is dropped.
    pub fn assemble(src: &Agent, tgt: &Agent, config: ModelConfig, rng: &mut RunRng) -> Result<Self> {
        let (sc, tc) = (src.config(), tgt.config());
        if sc.vocab_size != config.src_vocab || tc.vocab_size != config.tgt_vocab {
            return Err(Error::VocabMismatch(format!(
                "agents speak {}/{} tokens, model expects {}/{}",
                sc.vocab_size, tc.vocab_size, config.src_vocab, config.tgt_vocab
            )));
        }
        let mut model = Self::random(config, rng)?;
        let scope = model.arch.config.scope;
        let mut w_star = ParamStore::new();
        for (dst, name, from_src, core) in transfer_map(&model.arch, &src.arch, &tgt.arch) {
            if scope == TransferScope::RnnOnly && !core {
                continue;
            }
            let from = if from_src { src } else { tgt };
            let value = from.params.get(&name)?;
            let slot = model.params.get_mut(&dst)?;
            if slot.shape() != value.shape() {
                return Err(Error::shape("assemble", &[slot.shape(), value.shape()]));
            }
            slot.data_mut().copy_from_slice(value.data());
            w_star.insert(dst, value.clone());
        }
        w_star.zero_grads();
        model.w_star = w_star;
        Ok(model)
    }

    /// Wraps loaded weights (no reference point), checking their layout.
    pub fn from_params(config: ModelConfig, params: ParamStore, w_star: ParamStore) -> Result<Self> {
        let arch = Seq2SeqArch::new(config)?;
        let expected: ParamStore = arch.init_params(&mut crate::rng::seeded(0));
        check_layout(&expected, &params)?;
        for (name, t) in w_star.iter() {
            if params.get(name)?.shape() != t.shape() {
                return Err(Error::shape("reference weights", &[params.get(name)?.shape(), t.shape()]));
            }
        }
        Ok(Self { arch, params, w_star })
    }

    pub fn transferred(&self) -> bool {
        !self.w_star.is_empty()
    }

    /// `||w - w★||²` over the transferred tensors.
    pub fn drift(&self) -> Result<f64> {
        self.params.sq_dist(&self.w_star)
    }
}
