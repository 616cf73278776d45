mod bpe;
mod corpus;
mod synth;
mod vocab;

pub use bpe::{merge_tokens, normalize, pretokenize, BpeModel, END_OF_WORD};
pub use corpus::{
    length_filter, make_batches, parse_lines, read_lines, write_lines, Batch, Padded,
    ParallelCorpus,
};
pub use synth::{SynthTranslation, SYNTH_ALPHABET};
pub use vocab::{Tokenizer, Vocab, RESERVED_TOKENS};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const NUM_RESERVED: usize = 4;
