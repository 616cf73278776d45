use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{AgentConfig, EcTrainConfig};
use crate::nmt::{AdapterConfig, FinetuneConfig, ModelConfig, RegKind, RegularizerConfig, TransferScope};
use crate::nn::AdamConfig;

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $key:ident : $ty:ty = $default:expr;)*) => {
        /// Every tunable of a pipeline run. Serialized as flat `key=value`
        /// lines; see [`RunConfig::KEYS`] for the accepted keys.
        #[derive(Clone, Debug, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $key: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => {
                        self.$key = parse_value(key, value)?;
                        Ok(())
                    })*
                    _ => Err(Error::Config(format!("unknown key `{key}`"))),
                }
            }

            /// `(key, value)` pairs in declaration order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($key), self.$key.to_string()),)*]
            }
        }
    };
}

run_config! {
    embed_dim: usize = 256;
    hidden_dim: usize = 512;
    lr: f64 = 1e-3;
    beta1: f64 = 0.9;
    beta2: f64 = 0.999;
    eps: f64 = 1e-8;
    dropout_ec: f64 = 0.1;
    dropout_mt: f64 = 0.2;
    /// Gumbel-Softmax temperature.
    temperature: f64 = 1.0;
    k_train: usize = 31;
    k_eval: usize = 31;
    /// Maximum message length.
    l_max: usize = 10;
    ec_batch: usize = 32;
    ec_steps: usize = 3000;
    eval_every: usize = 50;
    eval_rounds: usize = 400;
    /// Stop pretraining once evaluation accuracy reaches this (0 disables).
    ec_stop_accuracy: f64 = 0.0;
    /// Sweeps flag a checkpoint whose accuracy is further than this from
    /// the requested target.
    accuracy_band: f64 = 0.05;
    alpha: f64 = 5.0;
    lambda: f64 = 0.998;
    reg: RegName = RegName(RegKind::RegA);
    transfer: bool = true;
    scope: ScopeName = ScopeName(TransferScope::AllMatching);
    adapter: bool = true;
    bottleneck: usize = 256;
    batch: usize = 128;
    epochs: usize = 60;
    beam: usize = 12;
    max_len: usize = 80;
    bpe_merges: usize = 4000;
    ec_seed: u64 = 1;
    data_seed: u64 = 1;
    ft_seed: u64 = 1;
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// Regularizer names as written in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegName(pub RegKind);

impl FromStr for RegName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Self)
    }
}

impl std::fmt::Display for RegName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self.0 {
            RegKind::Off => "off",
            RegKind::Na => "na",
            RegKind::RegA => "reg_a",
            RegKind::RegB => "reg_b",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScopeName(pub TransferScope);

impl FromStr for ScopeName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Self)
    }
}

impl std::fmt::Display for ScopeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self.0 {
            TransferScope::RnnOnly => "rnn_only",
            TransferScope::AllMatching => "all_matching",
        })
    }
}

impl RunConfig {
    /// Parses `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped; repeated keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
            cfg.set(k, v.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(&e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides (e.g. from the command line).
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    /// Canonical text: every key, in declaration order.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Hex SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("k_train", self.k_train),
            ("k_eval", self.k_eval),
            ("l_max", self.l_max),
            ("ec_batch", self.ec_batch),
            ("eval_every", self.eval_every),
            ("eval_rounds", self.eval_rounds),
            ("bottleneck", self.bottleneck),
            ("batch", self.batch),
            ("beam", self.beam),
            ("max_len", self.max_len),
            ("bpe_merges", self.bpe_merges),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        check(self.lr > 0.0 && self.eps > 0.0, "`lr` and `eps` must be positive")?;
        check(
            (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2),
            "`beta1` and `beta2` must lie in [0, 1)",
        )?;
        check(
            (0.0..1.0).contains(&self.dropout_ec) && (0.0..1.0).contains(&self.dropout_mt),
            "dropout rates must lie in [0, 1)",
        )?;
        check(self.temperature > 0.0, "`temperature` must be positive")?;
        check(self.alpha > 0.0, "`alpha` must be positive")?;
        check(self.accuracy_band >= 0.0, "`accuracy_band` must be non-negative")?;
        check((0.0..1.0).contains(&self.lambda), "`lambda` must lie in [0, 1)")?;
        check(
            (0.0..=1.0).contains(&self.ec_stop_accuracy),
            "`ec_stop_accuracy` must lie in [0, 1]",
        )
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn agent(&self, vocab_size: usize, feature_dim: usize) -> AgentConfig {
        AgentConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            temperature: self.temperature,
            dropout: self.dropout_ec,
            ..AgentConfig::new(vocab_size, feature_dim, self.l_max)
        }
    }

    pub fn ec_train(&self) -> EcTrainConfig {
        EcTrainConfig {
            k_train: self.k_train,
            k_eval: self.k_eval,
            batch_size: self.ec_batch,
            steps: self.ec_steps,
            eval_every: self.eval_every,
            eval_rounds: self.eval_rounds,
            eval_seed: self.ec_seed,
            stop_at_accuracy: (self.ec_stop_accuracy > 0.0).then_some(self.ec_stop_accuracy),
            adam: self.adam(),
        }
    }

    pub fn model(&self, src_vocab: usize, tgt_vocab: usize) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            adapter: self.adapter.then_some(AdapterConfig {
                bottleneck: self.bottleneck,
                dropout: self.dropout_mt,
            }),
            scope: self.scope.0,
            ..ModelConfig::new(src_vocab, tgt_vocab)
        }
    }

    pub fn regularizer(&self) -> RegularizerConfig {
        RegularizerConfig {
            kind: if self.transfer { self.reg.0 } else { RegKind::Off },
            alpha: self.alpha,
            lambda: self.lambda,
        }
    }

    pub fn finetune(&self) -> FinetuneConfig {
        FinetuneConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            dropout: self.dropout_mt,
            adam: self.adam(),
            reg: self.regularizer(),
            max_len: self.max_len,
        }
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
