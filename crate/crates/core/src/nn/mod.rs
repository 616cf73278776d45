//! Layers, parameter storage and the optimizer shared by both training
//! stages.

mod adam;
mod gumbel;
mod layers;
mod params;

pub use adam::{Adam, AdamConfig};
pub use gumbel::{gumbel_noise, gumbel_softmax, gumbel_softmax_with_noise, GumbelSample};
pub use layers::{Activation, Embedding, GruCell, Linear, Mlp};
pub use params::{check_param_grads, init_uniform, Graph, ParamCheck, ParamGrads, ParamStore};

/// Half-width of the uniform weight initialisation.
pub const INIT_BOUND: f64 = 0.1;
