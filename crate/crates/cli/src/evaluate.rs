use crate::EvaluateArgs;
use anyhow::{bail, Context, Result};
use biscale::autodiff::Scalar;
use biscale::corpus::{encode_example, load_chunked, load_plain, RawPair};
use biscale::metrics::{corpus_bleu, BleuOptions, EvalReport};
use biscale::model::{checkpoint_precision, load_checkpoint};
use biscale::training::teacher_forced_counts;
use std::fs;

pub fn run(args: EvaluateArgs) -> Result<()> {
    // Hypotheses may legitimately be empty lines; references may not.
    let hyps: Vec<Vec<String>> = fs::read_to_string(&args.hyp)
        .with_context(|| format!("cannot read hypotheses {}", args.hyp.display()))?
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    let mut refs: Vec<Vec<Vec<String>>> = vec![Vec::new(); hyps.len()];
    for path in &args.refs {
        let side: Vec<Vec<String>> = if args.ref_chunked {
            // The chunked parser appends the closing token; BLEU references
            // carry surface tokens only.
            load_chunked(path)?
                .into_iter()
                .map(|t| {
                    let mut toks = t.tokens;
                    toks.pop();
                    toks
                })
                .collect()
        } else {
            load_plain(path)?
        };
        if side.len() != hyps.len() {
            bail!(
                "{} has {} lines but {} has {}",
                path.display(),
                side.len(),
                args.hyp.display(),
                hyps.len()
            );
        }
        for (slot, sent) in refs.iter_mut().zip(side) {
            slot.push(sent);
        }
    }

    let options = BleuOptions { lowercase: !args.keep_case };
    let bleu = corpus_bleu(&hyps, &refs, &options)?;

    let (boundary, tag) = match (&args.checkpoint, &args.src, &args.annotated_ref) {
        (Some(ckpt), Some(src), Some(annotated)) => {
            match checkpoint_precision(ckpt)?.as_str() {
                "f32" => accuracies::<f32>(&args, ckpt, src, annotated)?,
                "f64" => accuracies::<f64>(&args, ckpt, src, annotated)?,
                other => bail!("checkpoint has unsupported precision {other:?}"),
            }
        }
        (None, _, _) => (None, None),
        _ => bail!("boundary/tag accuracy needs --checkpoint, --src, and --annotated-ref"),
    };

    let report = EvalReport::new(bleu.bleu, boundary, tag, hyps.len());
    if args.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", report.text());
    }
    Ok(())
}

/// Teacher-forced gate and tag accuracy of a checkpoint on an annotated
/// parallel corpus.
fn accuracies<F: Scalar>(
    _args: &EvaluateArgs,
    ckpt: &std::path::Path,
    src: &std::path::Path,
    annotated: &std::path::Path,
) -> Result<(Option<f64>, Option<f64>)> {
    let (model, bundle) = load_checkpoint::<F>(ckpt)?;
    let bundle = bundle.context("checkpoint carries no vocabularies")?;
    let srcs = load_plain(src)?;
    let tgts = load_chunked(annotated)?;
    if srcs.len() != tgts.len() {
        bail!(
            "{} has {} lines but {} has {}",
            src.display(),
            srcs.len(),
            annotated.display(),
            tgts.len()
        );
    }
    let examples = srcs
        .into_iter()
        .zip(tgts)
        .map(|(src, tgt)| {
            encode_example(
                &RawPair { src, tgt, annotated: true },
                &bundle.src,
                &bundle.tgt,
                &bundle.tags,
            )
        })
        .collect::<biscale::Result<Vec<_>>>()?;
    let counts = teacher_forced_counts(&model, &examples)?;
    // A baseline model scores no gates or tags; report nothing rather than
    // a vacuous 100%.
    let boundary = (counts.boundary_total > 0).then(|| counts.boundary_accuracy());
    let tag = (counts.tag_total > 0).then(|| counts.tag_accuracy());
    Ok((boundary, tag))
}
