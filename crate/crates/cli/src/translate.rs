use crate::TranslateArgs;
use anyhow::{bail, Context, Result};
use biscale::autodiff::Scalar;
use biscale::corpus::{load_plain, serialize_chunked, ChunkedText, EOS_TAG, EOS_TOKEN};
use biscale::inference::{beam_search, greedy_decode, DecodeConfig, GateMode, Hypothesis};
use biscale::metrics::write_alignment;
use biscale::model::{checkpoint_precision, load_checkpoint, Mode, VocabBundle};
use std::fs;
use std::io::{BufWriter, Write};

pub fn run(args: TranslateArgs) -> Result<()> {
    match checkpoint_precision(&args.checkpoint)?.as_str() {
        "f32" => decode::<f32>(&args),
        "f64" => decode::<f64>(&args),
        other => bail!("checkpoint has unsupported precision {other:?}"),
    }
}

fn parse_gate_mode(s: &str) -> Result<GateMode> {
    match s {
        "inbeam" => Ok(GateMode::Inbeam),
        "argmax" => Ok(GateMode::Argmax),
        _ => bail!("unknown gate mode {s:?} (expected inbeam or argmax)"),
    }
}

fn decode<F: Scalar>(args: &TranslateArgs) -> Result<()> {
    let (model, bundle) = load_checkpoint::<F>(&args.checkpoint)?;
    let bundle = bundle.context("checkpoint carries no vocabularies; retrain to embed them")?;

    let mut config = DecodeConfig::default();
    if let Some(b) = args.beam {
        config.beam = b;
    }
    if let Some(m) = args.max_len {
        config.max_len = m;
    }
    if let Some(g) = &args.gate_mode {
        config.gate_mode = parse_gate_mode(g)?;
    }
    if let Some(l) = args.len_norm {
        config.len_norm = l;
    }

    let sources = if fs::metadata(&args.input)?.len() == 0 {
        Vec::new()
    } else {
        load_plain(&args.input)?
    };

    if args.dump_boundaries.is_some() && model.config.mode != Mode::Biscale {
        bail!("--dump-boundaries needs a bi-scale checkpoint");
    }
    let mut out = BufWriter::new(fs::File::create(&args.output)?);
    let mut chunk_dump = args
        .dump_boundaries
        .as_ref()
        .map(|p| fs::File::create(p).map(BufWriter::new))
        .transpose()?;
    if let Some(dir) = &args.dump_attention {
        fs::create_dir_all(dir)?;
    }

    for (i, words) in sources.iter().enumerate() {
        let src = bundle.src.encode(words);
        let hyp = if args.greedy {
            greedy_decode(&model, &src, &config)?
        } else {
            beam_search(&model, &src, &config)?
                .into_iter()
                .next()
                .context("decoder returned no hypothesis")?
        };
        let surface = surface_tokens(&hyp, &model.config.eos_id, &bundle);
        writeln!(out, "{}", surface.join(" "))?;

        if let Some(dump) = &mut chunk_dump {
            writeln!(dump, "{}", bracketed(&hyp, &surface, &bundle))?;
        }
        if let Some(dir) = &args.dump_attention {
            let rows = bundle.tgt.decode(&hyp.tokens);
            let weights: Vec<Vec<f64>> = hyp.trace.iter().map(|t| t.weights.clone()).collect();
            let mut f =
                BufWriter::new(fs::File::create(dir.join(format!("sent-{:04}.tsv", i + 1)))?);
            write_alignment(&mut f, words, &rows, &weights)?;
        }
    }
    out.flush()?;

    let snapshot = args.output.with_extension(match args.output.extension() {
        Some(e) => format!("{}.config", e.to_string_lossy()),
        None => "config".to_string(),
    });
    let gate = match config.gate_mode {
        GateMode::Inbeam => "inbeam",
        GateMode::Argmax => "argmax",
    };
    fs::write(
        snapshot,
        format!(
            "# invocation: {}\ncheckpoint = {}\nbeam = {}\nmax_len = {}\ngate_mode = {gate}\nlen_norm = {}\ngreedy = {}\n",
            std::env::args().collect::<Vec<_>>().join(" "),
            args.checkpoint.display(),
            config.beam,
            config.max_len,
            config.len_norm,
            args.greedy
        ),
    )?;
    Ok(())
}

/// Hypothesis words with the terminal end-of-sentence symbol stripped.
fn surface_tokens(hyp: &Hypothesis, eos: &u32, bundle: &VocabBundle) -> Vec<String> {
    let mut ids = hyp.tokens.clone();
    if ids.last() == Some(eos) {
        ids.pop();
    }
    bundle.tgt.decode(&ids)
}

/// Bracketed form of the predicted chunking over the surface tokens.
fn bracketed(hyp: &Hypothesis, surface: &[String], bundle: &VocabBundle) -> String {
    let mut tokens: Vec<String> = surface.to_vec();
    let mut boundaries: Vec<bool> = hyp.boundaries[..surface.len()].to_vec();
    let mut tags: Vec<String> = Vec::new();
    let mut tag_iter = hyp.tags.iter();
    for &b in &boundaries {
        if b {
            let id = tag_iter.next().copied().unwrap_or(0);
            tags.push(bundle.tags.name(id).to_string());
        }
    }
    tokens.push(EOS_TOKEN.to_string());
    boundaries.push(true);
    tags.push(EOS_TAG.to_string());
    serialize_chunked(&ChunkedText { tokens, boundaries, tags })
}
