mod checkpoint;
mod config;

pub use checkpoint::{
    decode_eckp, encode_eckp, load_checkpoint, load_stage, save_checkpoint, sidecar_path,
    CheckpointMeta, Stage, ECKP_MAGIC,
};
pub use config::{RegName, RunConfig, ScopeName};
