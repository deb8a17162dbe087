use crate::AlignArgs;
use anyhow::{bail, Context, Result};
use biscale::autodiff::{Scalar, Tape};
use biscale::corpus::{encode_example, load_chunked, load_plain, RawPair};
use biscale::metrics::write_alignment;
use biscale::model::{checkpoint_precision, load_checkpoint};
use std::fs;
use std::io::BufWriter;

/// Teacher-forced attention heatmaps: the model reads the gold target, so
/// every row is the weight vector the decoder actually used at that word.
pub fn run(args: AlignArgs) -> Result<()> {
    match checkpoint_precision(&args.checkpoint)?.as_str() {
        "f32" => export::<f32>(&args),
        "f64" => export::<f64>(&args),
        other => bail!("checkpoint has unsupported precision {other:?}"),
    }
}

fn export<F: Scalar>(args: &AlignArgs) -> Result<()> {
    let (model, bundle) = load_checkpoint::<F>(&args.checkpoint)?;
    let bundle = bundle.context("checkpoint carries no vocabularies")?;
    let srcs = load_plain(&args.src)?;
    let tgts = load_chunked(&args.tgt)?;
    if srcs.len() != tgts.len() {
        bail!(
            "{} has {} lines but {} has {}",
            args.src.display(),
            srcs.len(),
            args.tgt.display(),
            tgts.len()
        );
    }
    fs::create_dir_all(&args.out)?;
    fs::write(
        args.out.join("effective-config.txt"),
        format!("# invocation: {}\n", std::env::args().collect::<Vec<_>>().join(" ")),
    )?;

    for (i, (src_words, tgt)) in srcs.into_iter().zip(tgts).enumerate() {
        let pair = RawPair { src: src_words.clone(), tgt, annotated: true };
        let ex = encode_example(&pair, &bundle.src, &bundle.tgt, &bundle.tags)?;

        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let mask = vec![true; ex.src.len()];
        let ann = model.encode(&mut tape, &vars, &ex.src, &mask)?;
        let (outputs, _) = model.run_teacher_forced(
            &mut tape,
            &vars,
            &ann,
            &ex.tgt.tokens,
            &ex.tgt.boundaries,
        )?;

        let rows = &pair.tgt.tokens;
        let weights: Vec<Vec<f64>> = outputs
            .iter()
            .map(|o| o.attention.iter().map(|w| w.scalar_to_f64()).collect())
            .collect();
        let mut f =
            BufWriter::new(fs::File::create(args.out.join(format!("sent-{:04}.tsv", i + 1)))?);
        write_alignment(&mut f, &src_words, rows, &weights)?;
    }
    Ok(())
}
