pub mod error;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod textdata;
pub mod game;
pub mod eval;
pub mod io;
pub mod nmt;
pub mod pipeline;

pub use error::{Error, Result};
