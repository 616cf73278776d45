use super::params::{init_uniform, Graph, ParamStore};
use super::INIT_BOUND;
use crate::error::{Error, Result};
use crate::rng::RunRng;
use crate::tensor::{Element, Tensor, Var};

fn check_cols<T: Element>(g: &Graph<T>, op: &'static str, x: Var, cols: usize) -> Result<usize> {
    let s = g.tape.shape(x);
    if s.len() != 2 || s[1] != cols {
        return Err(Error::Shape {
            op,
            shapes: format!("{s:?} vs expected [_, {cols}]"),
        });
    }
    Ok(s[0])
}

/// Affine map `x W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(name: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        Self {
            name: name.into(),
            in_dim,
            out_dim,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.w", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.b", self.name)
    }

    pub fn init<T: Element>(&self, store: &mut ParamStore<T>, rng: &mut RunRng) {
        store.insert(
            self.weight_name(),
            init_uniform(rng, &[self.in_dim, self.out_dim], INIT_BOUND),
        );
        store.insert(self.bias_name(), Tensor::zeros(&[self.out_dim]));
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        check_cols(g, "linear", x, self.in_dim)?;
        let w = g.param(&self.weight_name())?;
        let b = g.param(&self.bias_name())?;
        let y = g.tape.matmul(x, w)?;
        g.tape.add_bias(y, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Element>(self, g: &mut Graph<T>, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.tape.relu(x),
            Activation::Tanh => g.tape.tanh(x),
        }
    }
}

/// Stack of [`Linear`] layers; `activation` and dropout are applied between
/// layers, never after the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub name: String,
    pub dims: Vec<usize>,
    pub activation: Activation,
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(name: impl Into<String>, dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("mlp dims {dims:?}")));
        }
        let name = name.into();
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(format!("{name}.{i}"), w[0], w[1]))
            .collect();
        Ok(Self {
            name,
            dims: dims.to_vec(),
            activation,
            layers,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn init<T: Element>(&self, store: &mut ParamStore<T>, rng: &mut RunRng) {
        self.layers.iter().for_each(|l| l.init(store, rng));
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = self.activation.apply(g, h);
                h = g.dropout(h)?;
            }
            h = layer.forward(g, h)?;
        }
        Ok(h)
    }
}

/// Token embedding table `[vocab, dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub name: String,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(name: impl Into<String>, vocab: usize, dim: usize) -> Self {
        Self {
            name: name.into(),
            vocab,
            dim,
        }
    }

    pub fn table_name(&self) -> String {
        format!("{}.table", self.name)
    }

    pub fn init<T: Element>(&self, store: &mut ParamStore<T>, rng: &mut RunRng) {
        store.insert(
            self.table_name(),
            init_uniform(rng, &[self.vocab, self.dim], INIT_BOUND),
        );
    }

    /// Rows of the table for hard token ids: `[ids.len(), dim]`.
    pub fn lookup<T: Element>(&self, g: &mut Graph<T>, ids: &[usize]) -> Result<Var> {
        let t = g.param(&self.table_name())?;
        g.tape.embedding_lookup(t, ids)
    }

    /// Convex combination of rows for a batch of distributions `[b, vocab]`.
    pub fn soft_lookup<T: Element>(&self, g: &mut Graph<T>, dist: Var) -> Result<Var> {
        check_cols(g, "soft_lookup", dist, self.vocab)?;
        let t = g.param(&self.table_name())?;
        g.tape.matmul(dist, t)
    }
}

/// Single-layer gated recurrent unit.
///
/// Gates are packed as `[reset | update | candidate]` along the last axis:
/// `r = s(x Wr + br + h Ur + cr)`, `z = s(x Wz + bz + h Uz + cz)`,
/// `n = tanh(x Wn + bn + r * (h Un + cn))`, `h' = (1 - z) * n + z * h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    pub name: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn new(name: impl Into<String>, input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            name: name.into(),
            input_dim,
            hidden_dim,
        }
    }

    pub fn param_names(&self) -> [String; 4] {
        ["w_ih", "w_hh", "b_ih", "b_hh"].map(|p| format!("{}.{p}", self.name))
    }

    pub fn init<T: Element>(&self, store: &mut ParamStore<T>, rng: &mut RunRng) {
        let h3 = 3 * self.hidden_dim;
        let [w_ih, w_hh, b_ih, b_hh] = self.param_names();
        store.insert(w_ih, init_uniform(rng, &[self.input_dim, h3], INIT_BOUND));
        store.insert(w_hh, init_uniform(rng, &[self.hidden_dim, h3], INIT_BOUND));
        store.insert(b_ih, Tensor::zeros(&[h3]));
        store.insert(b_hh, Tensor::zeros(&[h3]));
    }

    /// One step for a batch: `input [b, input_dim]`, `h_prev [b, hidden_dim]`.
    pub fn step<T: Element>(&self, g: &mut Graph<T>, input: Var, h_prev: Var) -> Result<Var> {
        let b = check_cols(g, "gru_step input", input, self.input_dim)?;
        let bh = check_cols(g, "gru_step hidden", h_prev, self.hidden_dim)?;
        if b != bh {
            return Err(Error::shape(
                "gru_step",
                &[g.tape.shape(input), g.tape.shape(h_prev)],
            ));
        }
        let hd = self.hidden_dim;
        let [w_ih, w_hh, b_ih, b_hh] = self.param_names();
        let (w_ih, w_hh) = (g.param(&w_ih)?, g.param(&w_hh)?);
        let (b_ih, b_hh) = (g.param(&b_ih)?, g.param(&b_hh)?);

        let gi = g.tape.matmul(input, w_ih)?;
        let gi = g.tape.add_bias(gi, b_ih)?;
        let gh = g.tape.matmul(h_prev, w_hh)?;
        let gh = g.tape.add_bias(gh, b_hh)?;

        // Reset and update gates share one sigmoid over the first 2H columns.
        let gi_rz = g.tape.slice(gi, 1, 0, 2 * hd)?;
        let gh_rz = g.tape.slice(gh, 1, 0, 2 * hd)?;
        let rz = g.tape.add(gi_rz, gh_rz)?;
        let rz = g.tape.sigmoid(rz);
        let r = g.tape.slice(rz, 1, 0, hd)?;
        let z = g.tape.slice(rz, 1, hd, hd)?;

        let gi_n = g.tape.slice(gi, 1, 2 * hd, hd)?;
        let gh_n = g.tape.slice(gh, 1, 2 * hd, hd)?;
        let rn = g.tape.mul(r, gh_n)?;
        let n = g.tape.add(gi_n, rn)?;
        let n = g.tape.tanh(n);

        // h' = n + z * (h - n)
        let diff = g.tape.sub(h_prev, n)?;
        let zd = g.tape.mul(z, diff)?;
        g.tape.add(n, zd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check_param_grads;
    use crate::rng::seeded;

    fn zero_cell_store(cell: &GruCell) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let mut rng = seeded(0);
        cell.init(&mut s, &mut rng);
        for (_, t) in s.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        s
    }

    #[test]
    fn zero_gru_halves_hidden_state() {
        let cell = GruCell::new("gru", 3, 4);
        let s = zero_cell_store(&cell);
        let mut g = Graph::eval(&s);
        let x = g.constant(&[1, 3], vec![0.7, -0.2, 0.9]).unwrap();
        let h = g.constant(&[1, 4], vec![1.0, -2.0, 0.5, 0.0]).unwrap();
        let out = cell.step(&mut g, x, h).unwrap();
        assert_eq!(g.tape.value(out), &[0.5, -1.0, 0.25, 0.0]);
        let zx = g.constant(&[1, 3], vec![0.0; 3]).unwrap();
        let zh = g.constant(&[1, 4], vec![0.0; 4]).unwrap();
        let out = cell.step(&mut g, zx, zh).unwrap();
        assert_eq!(g.tape.value(out), &[0.0; 4]);
    }

    #[test]
    fn gru_rejects_wrong_dims() {
        let cell = GruCell::new("gru", 3, 4);
        let s = zero_cell_store(&cell);
        let mut g = Graph::eval(&s);
        let x = g.constant(&[1, 2], vec![0.0; 2]).unwrap();
        let h = g.constant(&[1, 4], vec![0.0; 4]).unwrap();
        assert!(matches!(cell.step(&mut g, x, h), Err(Error::Shape { .. })));
    }

    #[test]
    fn gru_gradients_match_finite_differences() {
        let cell = GruCell::new("gru", 3, 4);
        let mut rng = seeded(11);
        let mut s = ParamStore::<f64>::new();
        cell.init(&mut s, &mut rng);
        // larger weights so every gate is away from its linear regime
        for (_, t) in s.iter_mut() {
            t.data_mut()
                .iter_mut()
                .for_each(|v| *v = *v * 5.0 + 0.05);
        }
        let report = check_param_grads(
            &s,
            |g| {
                let x = g.constant(&[2, 3], vec![0.3, -0.5, 0.8, 0.1, 0.9, -0.4])?;
                let h0 = g.constant(&[2, 4], vec![0.2, -0.1, 0.4, 0.0, -0.3, 0.6, 0.1, 0.2])?;
                let h1 = cell.step(g, x, h0)?;
                let h2 = cell.step(g, x, h1)?;
                let w = g.constant(&[2, 4], vec![1.0, -2.0, 0.5, 1.5, -1.0, 0.3, 2.0, -0.7])?;
                let p = g.tape.mul(h2, w)?;
                Ok(g.tape.sum(p))
            },
            1e-3,
            None,
            &mut rng,
        )
        .unwrap();
        assert!(report.max_rel_dev < 1e-4, "{report:?}");
    }

    #[test]
    fn soft_lookup_is_convex_combination() {
        let emb = Embedding::new("emb", 3, 2);
        let mut s = ParamStore::<f64>::new();
        s.insert(
            emb.table_name(),
            Tensor::new(&[3, 2], vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0]).unwrap(),
        );
        let mut g = Graph::eval(&s);
        let d = g.constant(&[1, 3], vec![0.5, 0.25, 0.25]).unwrap();
        let out = emb.soft_lookup(&mut g, d).unwrap();
        assert_eq!(g.tape.value(out), &[1.0, 0.75]);
        let hard = emb.lookup(&mut g, &[1]).unwrap();
        assert_eq!(g.tape.value(hard), &[0.0, 1.0]);
    }

    #[test]
    fn mlp_output_dim() {
        let mlp = Mlp::new("m", &[5, 7, 3], Activation::Relu).unwrap();
        let mut s = ParamStore::<f32>::new();
        mlp.init(&mut s, &mut seeded(1));
        let mut g = Graph::eval(&s);
        let x = g.constant(&[4, 5], vec![0.1; 20]).unwrap();
        let y = mlp.forward(&mut g, x).unwrap();
        assert_eq!(g.tape.shape(y), &[4, 3]);
        assert!(Mlp::new("bad", &[5], Activation::Relu).is_err());
    }
}
