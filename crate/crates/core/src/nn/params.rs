use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RunRng;
use crate::tensor::{Element, Tape, Tensor, Var};

/// Gradients keyed by parameter name.
pub type ParamGrads<T = f32> = BTreeMap<String, Vec<T>>;

/// Named collection of trainable tensors. Iteration order is the sorted name
/// order, which keeps serialization and optimizer updates deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T = f32> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) {
        self.tensors.insert(name.into(), tensor.requires_grad(true));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor<T>> {
        self.tensors.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn cast<U: Element>(&self) -> ParamStore<U> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Copy of the tensors whose names satisfy `keep`, gradients dropped.
    pub fn snapshot(&self, mut keep: impl FnMut(&str) -> bool) -> ParamStore<T> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| {
                    let mut t = v.clone();
                    t.zero_grad();
                    (k.clone(), t)
                })
                .collect(),
        }
    }

    pub fn accumulate_grads(&mut self, grads: &ParamGrads<T>) -> Result<()> {
        for (name, g) in grads {
            self.get_mut(name)?.accumulate_grad(g)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }

    /// `sum ||w - w_ref||^2` over the tensors named in `reference`.
    pub fn sq_dist(&self, reference: &ParamStore<T>) -> Result<f64> {
        let mut total = 0.0;
        for (name, r) in &reference.tensors {
            total += self.get(name)?.sq_dist(r)?;
        }
        Ok(total)
    }
}

/// Fills a tensor with `Uniform(-bound, bound)` draws.
pub fn init_uniform<T: Element>(rng: &mut RunRng, shape: &[usize], bound: f64) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(rng.random_range(-bound..bound)))
        .collect();
    Tensor::new(shape, data).expect("positive dims")
}

/// One forward/backward pass over a [`ParamStore`].
///
/// Parameters are bound lazily onto the tape the first time a layer asks for
/// them. A graph built with [`Graph::train`] applies dropout and exposes the
/// run generator for stochastic ops; [`Graph::eval`] is deterministic.
pub struct Graph<'a, T: Element = f32> {
    pub tape: Tape<T>,
    params: &'a ParamStore<T>,
    bound: HashMap<String, Var>,
    rng: Option<&'a mut RunRng>,
    dropout: f64,
}

impl<'a, T: Element> Graph<'a, T> {
    pub fn train(params: &'a ParamStore<T>, rng: &'a mut RunRng, dropout: f64) -> Self {
        Self {
            tape: Tape::new(),
            params,
            bound: HashMap::new(),
            rng: Some(rng),
            dropout,
        }
    }

    pub fn eval(params: &'a ParamStore<T>) -> Self {
        Self {
            tape: Tape::new(),
            params,
            bound: HashMap::new(),
            rng: None,
            dropout: 0.0,
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn params(&self) -> &ParamStore<T> {
        self.params
    }

    pub fn rng(&mut self) -> Option<&mut RunRng> {
        self.rng.as_deref_mut()
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let v = self.tape.leaf(self.params.get(name)?);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        self.tape.constant(shape, data)
    }

    /// Inverted dropout with the graph's rate; identity in eval mode.
    pub fn dropout(&mut self, x: Var) -> Result<Var> {
        let p = self.dropout;
        match self.rng.as_deref_mut() {
            Some(rng) if p > 0.0 => {
                let keep = T::from_f64_lossy(1.0 / (1.0 - p));
                let n = self.tape.value(x).len();
                let mask = (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < p {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect();
                self.tape.dropout_mask_apply(x, mask)
            }
            _ => Ok(x),
        }
    }

    /// Runs the reverse sweep and returns gradients for every bound parameter.
    pub fn backward(mut self, loss: Var) -> Result<ParamGrads<T>> {
        let mut grads = self.tape.backward(loss)?;
        Ok(self
            .bound
            .into_iter()
            .filter_map(|(name, v)| grads.take(v).map(|g| (name, g)))
            .collect())
    }
}

/// Worst disagreement found by [`check_param_grads`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub max_rel_dev: f64,
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Central-difference check of `loss` with respect to every parameter in
/// `store`. At most `max_coords` coordinates per tensor are probed (chosen
/// with `rng`); `None` probes all of them.
pub fn check_param_grads<F>(
    store: &ParamStore<f64>,
    loss: F,
    h: f64,
    max_coords: Option<usize>,
    rng: &mut RunRng,
) -> Result<ParamCheck>
where
    F: Fn(&mut Graph<f64>) -> Result<Var>,
{
    let mut g = Graph::eval(store);
    let out = loss(&mut g)?;
    let analytic = g.backward(out)?;

    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::eval(s);
        let out = loss(&mut g)?;
        Ok(g.tape.scalar(out))
    };

    let mut work = store.clone();
    let mut report = ParamCheck {
        max_rel_dev: 0.0,
        worst: None,
        coords_checked: 0,
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let n = store.get(&name)?.numel();
        let coords: Vec<usize> = match max_coords {
            Some(k) if k < n => rand::seq::index::sample(rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        let zeros = vec![0.0; n];
        let an = analytic.get(&name).unwrap_or(&zeros);
        for i in coords {
            let base = work.get(&name)?.data()[i];
            work.get_mut(&name)?.data_mut()[i] = base + h;
            let fp = eval(&work)?;
            work.get_mut(&name)?.data_mut()[i] = base - h;
            let fm = eval(&work)?;
            work.get_mut(&name)?.data_mut()[i] = base;
            let num = (fp - fm) / (2.0 * h);
            let dev = crate::tensor::relative_deviation(an[i], num);
            report.coords_checked += 1;
            if !(dev <= report.max_rel_dev) {
                report.max_rel_dev = if dev.is_nan() { f64::INFINITY } else { dev };
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
