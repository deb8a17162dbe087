use crate::SynthArgs;
use anyhow::Result;
use biscale::corpus::{generate_synthetic, write_jsonl, write_parallel, SynthConfig};

pub fn run(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: args.seed,
        sentences: args.sentences,
        chunks_per_sentence: args.chunks_per_sentence,
        chunk_len_min: args.chunk_len_min,
        chunk_len_max: args.chunk_len_max,
        reverse_chunks: args.reverse_chunks,
        tag_count: args.tag_count,
        band_size: args.band_size,
    };
    let corpus = generate_synthetic(&cfg)?;
    write_parallel(&corpus, &args.src, &args.tgt)?;
    if let Some(path) = &args.jsonl {
        write_jsonl(&corpus.pairs, path)?;
    }
    eprintln!("wrote {} pairs", corpus.pairs.len());
    Ok(())
}
