use rand::Rng;

use super::params::Graph;
use crate::error::{Error, Result};
use crate::rng::RunRng;
use crate::tensor::{Element, Tape, Var};

const U_MIN: f64 = 1e-10;

/// A relaxed categorical draw over the rows of a `[b, v]` logit matrix.
#[derive(Clone, Debug)]
pub struct GumbelSample {
    /// `softmax((logits + g) / tau)`.
    pub soft: Var,
    /// The value downstream layers consume: `soft`, or in hard mode the
    /// one-hot argmax carrying the soft sample's gradient.
    pub out: Var,
    /// Per-row `argmax(logits + g)`.
    pub index: Vec<usize>,
}

/// `n` standard Gumbel draws, `-ln(-ln u)` with `u ~ Uniform(1e-10, 1-1e-10)`.
pub fn gumbel_noise<T: Element>(rng: &mut RunRng, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(U_MIN..1.0 - U_MIN);
            T::from_f64_lossy(-(-u.ln()).ln())
        })
        .collect()
}

/// Gumbel-Softmax with caller-supplied noise (`None` means zero noise).
pub fn gumbel_softmax_with_noise<T: Element>(
    tape: &mut Tape<T>,
    logits: Var,
    noise: Option<Vec<T>>,
    temperature: f64,
    hard: bool,
) -> Result<GumbelSample> {
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!(
            "gumbel temperature must be positive, got {temperature}"
        )));
    }
    let shape = tape.shape(logits).to_vec();
    let v = *shape
        .last()
        .ok_or_else(|| Error::shape("gumbel_softmax", &[&shape]))?;
    let perturbed = match noise {
        Some(n) => {
            let c = tape.constant(&shape, n)?;
            tape.add(logits, c)?
        }
        None => logits,
    };
    let index: Vec<usize> = tape
        .value(perturbed)
        .chunks(v)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &x)| {
                    if x > bv {
                        (i, x)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect();
    let scaled = if temperature == 1.0 {
        perturbed
    } else {
        tape.scale(perturbed, T::from_f64_lossy(1.0 / temperature))
    };
    let soft = tape.softmax(scaled)?;
    let out = if hard {
        let mut one_hot = vec![T::zero(); tape.value(soft).len()];
        for (r, &i) in index.iter().enumerate() {
            one_hot[r * v + i] = T::one();
        }
        tape.straight_through(soft, one_hot)?
    } else {
        soft
    };
    Ok(GumbelSample { soft, out, index })
}

/// Gumbel-Softmax drawing noise from the graph's generator. Eval graphs have
/// no generator and therefore take the noiseless argmax.
pub fn gumbel_softmax<T: Element>(
    g: &mut Graph<T>,
    logits: Var,
    temperature: f64,
    hard: bool,
) -> Result<GumbelSample> {
    let n = g.tape.value(logits).len();
    let noise = g.rng().map(|rng| gumbel_noise(rng, n));
    gumbel_softmax_with_noise(&mut g.tape, logits, noise, temperature, hard)
}
