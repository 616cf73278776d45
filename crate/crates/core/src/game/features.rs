use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{seeded, RunRng};

const ECFV_MAGIC: &[u8; 4] = b"ECFV";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
}

/// Precomputed image feature vectors, one row per image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f32>,
    pub split: Split,
}

impl FeatureSet {
    pub fn new(dim: usize, data: Vec<f32>, split: Split) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "feature set of {} values is not a whole number of {dim}-dim rows",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature vector {}", i / dim)));
        }
        Ok(Self { dim, data, split })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major copy of the selected rows.
    pub fn gather(&self, ids: &[usize]) -> Vec<f32> {
        let mut out = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            out.extend_from_slice(self.row(i));
        }
        out
    }

    /// Rejects sets too small to hold a target plus `k` distinct distractors.
    pub fn require_rounds(&self, k: usize) -> Result<()> {
        if self.len() <= k + 1 && !(k == 0 && self.len() == 1) {
            return Err(Error::invalid(format!(
                "{} feature vectors cannot supply {k} distractors per round",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn to_ecfv(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.data.len());
        out.extend_from_slice(ECFV_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the ECFV layout: `"ECFV"`, `u32 n`, `u32 d`, then `n * d`
    /// little-endian `f32` values.
    pub fn from_ecfv(bytes: &[u8], split: Split) -> Result<Self> {
        let bad = |msg: String| Error::format("ECFV feature file", msg);
        if bytes.len() < 12 || &bytes[..4] != ECFV_MAGIC {
            return Err(bad("missing ECFV header".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = n
            .checked_mul(d)
            .and_then(|x| x.checked_mul(4))
            .and_then(|x| x.checked_add(12))
            .ok_or_else(|| bad(format!("header {n} x {d} overflows")))?;
        if n == 0 || d == 0 {
            return Err(bad(format!("empty feature set {n} x {d}")));
        }
        if bytes.len() != expected {
            return Err(bad(format!(
                "{n} x {d} floats need {expected} bytes, file has {}",
                bytes.len()
            )));
        }
        let data = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FeatureSet::new(d, data, split)
    }

    pub fn load(path: &Path, split: Split) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_ecfv(&bytes, split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ecfv()).map_err(|e| Error::io(path, e))
    }
}

/// Gaussian-cluster stand-in for CNN image features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthFeatures {
    pub dim: usize,
    pub clusters: usize,
    /// Expected norm of a cluster centre: centres are `N(0, scale^2 I / dim)`.
    pub scale: f64,
    /// Spread of points around their centre, relative to `scale`.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthFeatures {
    fn default() -> Self {
        Self {
            dim: 256,
            clusters: 32,
            scale: 3.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthFeatures {
    /// Draws `n_train` and `n_valid` vectors from the same clusters. Points
    /// are assigned to clusters round-robin, so every cluster is populated.
    pub fn generate(&self, n_train: usize, n_valid: usize) -> Result<(FeatureSet, FeatureSet)> {
        if self.dim == 0 || self.clusters == 0 || n_train == 0 || n_valid == 0 {
            return Err(Error::invalid("synthetic feature sizes must be positive"));
        }
        if !(self.scale > 0.0) || !(self.sigma >= 0.0) {
            return Err(Error::invalid("synthetic feature scale must be > 0 and sigma >= 0"));
        }
        let mut rng = seeded(self.seed);
        let unit = self.scale / (self.dim as f64).sqrt();
        let centres: Vec<f32> = normal_vec(&mut rng, self.clusters * self.dim, unit);
        let mut draw = |n: usize, split| {
            let mut data = Vec::with_capacity(n * self.dim);
            for i in 0..n {
                let c = &centres[(i % self.clusters) * self.dim..][..self.dim];
                let noise = normal_vec(&mut rng, self.dim, self.sigma * unit);
                data.extend(c.iter().zip(noise).map(|(a, b)| a + b));
            }
            FeatureSet::new(self.dim, data, split)
        };
        let train = draw(n_train, Split::Train)?;
        let valid = draw(n_valid, Split::Valid)?;
        Ok((train, valid))
    }
}

fn normal_vec(rng: &mut RunRng, n: usize, scale: f64) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (z * scale) as f32
        })
        .collect()
}
