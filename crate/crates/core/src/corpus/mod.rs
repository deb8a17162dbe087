//! Corpus handling: vocabularies, chunk-annotated sentences, file loaders,
//! batching, and a synthetic chunk-reversal task for end-to-end checks.

mod batch;
mod chunked;
mod loader;
mod synth;
mod vocab;

pub use batch::{make_batches, Batch, ParallelExample};
pub use chunked::{parse_chunked_line, serialize_chunked, ChunkedSentence, ChunkedText, EOS_TAG};
pub use loader::{
    encode_example, load_chunked, load_jsonl, load_plain, pair_and_filter, plain_target,
    write_jsonl, RawPair,
};
pub use synth::{generate_synthetic, write_parallel, SynthConfig, SynthCorpus};
pub use vocab::{
    TagVocab, Vocab, BOS, BOS_TOKEN, EOS, EOS_CHUNK_ID, EOS_TOKEN, PAD, PAD_TOKEN, UNK,
    UNK_CHUNK_ID, UNK_TOKEN,
};
