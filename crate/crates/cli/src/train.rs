use crate::settings::{parse_mode, parse_precision, Precision, Settings};
use crate::TrainArgs;
use anyhow::{bail, Context, Result};
use biscale::autodiff::Scalar;
use biscale::corpus::{
    encode_example, load_chunked, load_jsonl, load_plain, pair_and_filter, plain_target,
    ChunkedText, RawPair, TagVocab, Vocab,
};
use biscale::model::{save_checkpoint, Mode, Model, VocabBundle};
use biscale::training::{Trainer, LOG_HEADER};
use std::fs;
use std::io::Write;
use std::time::Instant;

pub fn run(args: TrainArgs) -> Result<()> {
    let settings = resolve(&args)?;
    let (pairs, dropped) = load_corpus(&args, settings.train.max_len)?;
    eprintln!(
        "loaded {} pairs, filtered {dropped} longer than {} tokens",
        pairs.len(),
        settings.train.max_len
    );
    if pairs.is_empty() {
        bail!("no training pairs left after the length filter");
    }
    if settings.mode == Mode::Biscale && pairs.iter().any(|p| !p.annotated) {
        bail!(
            "bi-scale training needs chunk annotations on the target side; \
             provide a bracketed-chunk corpus or JSON lines with boundary bits, \
             or train with --mode baseline"
        );
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create run directory {}", args.out.display()))?;
    let invocation: Vec<String> = std::env::args().collect();
    fs::write(args.out.join("effective-config.txt"), settings.render(&invocation))?;

    let cap = settings.train.vocab_cap;
    let src_vocab = Vocab::build(pairs.iter().map(|p| p.src.as_slice()), cap)?;
    let tgt_vocab = Vocab::build(pairs.iter().map(|p| p.tgt.tokens.as_slice()), cap)?;
    let tag_vocab = TagVocab::build(pairs.iter().map(|p| p.tgt.tags.as_slice()));
    eprintln!(
        "vocabularies: {} source, {} target, {} tags",
        src_vocab.len(),
        tgt_vocab.len(),
        tag_vocab.len()
    );
    let bundle = VocabBundle { src: src_vocab, tgt: tgt_vocab, tags: tag_vocab };

    match settings.precision {
        Precision::F32 => fit::<f32>(&args, &settings, &pairs, &bundle),
        Precision::F64 => fit::<f64>(&args, &settings, &pairs, &bundle),
    }
}

fn fit<F: Scalar>(
    args: &TrainArgs,
    settings: &Settings,
    pairs: &[RawPair],
    bundle: &VocabBundle,
) -> Result<()> {
    let examples = pairs
        .iter()
        .map(|p| encode_example(p, &bundle.src, &bundle.tgt, &bundle.tags))
        .collect::<biscale::Result<Vec<_>>>()?;

    let config = settings.model_config(bundle.src.len(), bundle.tgt.len(), bundle.tags.len());
    let model = Model::<F>::new(config, settings.train.seed)?;
    eprintln!("model: {} parameters", model.params.total_len());
    let mut trainer = Trainer::new(model, settings.train.clone())?;

    let mut log = fs::File::create(args.out.join("train.log"))?;
    writeln!(log, "{LOG_HEADER}")?;
    let every = settings.train.checkpoint_every;
    for epoch in 1..=settings.train.epochs {
        let clock = Instant::now();
        let stats = trainer.epoch(&examples)?;
        writeln!(log, "{}", stats.log_line(epoch))?;
        // Wallclock stays out of the log so same-seed runs are identical.
        eprintln!(
            "epoch {epoch}: loss {:.6}, grad norm {:.6}, lr {}, {:.1}s",
            stats.loss.total,
            stats.grad_norm,
            stats.learning_rate,
            clock.elapsed().as_secs_f64()
        );
        if every > 0 && epoch % every == 0 {
            let path = args.out.join(format!("checkpoint-{epoch:04}.ckpt"));
            save_checkpoint(&trainer.model, Some(bundle), &path)?;
        }
    }
    save_checkpoint(&trainer.model, Some(bundle), &args.out.join("model.ckpt"))?;
    Ok(())
}

fn resolve(args: &TrainArgs) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        s.apply_file(path)?;
    }
    if let Some(v) = &args.mode {
        s.mode = parse_mode(v)?;
    }
    if let Some(v) = &args.precision {
        s.precision = parse_precision(v)?;
    }
    macro_rules! over {
        ($($field:ident => $slot:expr),* $(,)?) => {
            $(if let Some(v) = args.$field { $slot = v; })*
        };
    }
    over! {
        embed_dim => s.embed_dim,
        encoder_dim => s.encoder_dim,
        word_dim => s.word_dim,
        chunk_dim => s.chunk_dim,
        chunk_embed_dim => s.chunk_embed_dim,
        attention_dim => s.attention_dim,
        learning_rate => s.train.learning_rate,
        batch_size => s.train.batch_size,
        epochs => s.train.epochs,
        clip_norm => s.train.clip_norm,
        lambda_word => s.train.lambda_word,
        lambda_tag => s.train.lambda_tag,
        lambda_boundary => s.train.lambda_boundary,
        seed => s.train.seed,
        max_len => s.train.max_len,
        vocab_cap => s.train.vocab_cap,
        checkpoint_every => s.train.checkpoint_every,
        halve_lr_on_plateau => s.train.halve_lr_on_plateau,
        plateau_tolerance => s.train.plateau_tolerance,
    }
    if let Some(v) = &args.attention_scale {
        s.set("attention_scale", v)?;
    }
    if let Some(v) = &args.readout {
        s.set("readout", v)?;
    }
    if let Some(v) = &args.optimizer {
        s.set("optimizer", v)?;
    }
    s.train.validate()?;
    Ok(s)
}

/// Reads the corpus from JSON lines or from a source/target file pair,
/// dropping over-length pairs.
fn load_corpus(args: &TrainArgs, max_len: usize) -> Result<(Vec<RawPair>, usize)> {
    let (srcs, tgts, plain) = match (&args.data, &args.src, &args.tgt) {
        (Some(data), None, None) => {
            let pairs = load_jsonl(data)?;
            let (srcs, tgts) = pairs.into_iter().map(|p| (p.src, p.tgt)).unzip();
            (srcs, tgts, false)
        }
        (None, Some(src), Some(tgt)) => {
            let srcs = load_plain(src)?;
            let (tgts, plain) = load_targets(tgt)?;
            (srcs, tgts, plain)
        }
        _ => bail!("provide either --data or both --src and --tgt"),
    };
    let (mut pairs, dropped) = pair_and_filter(srcs, tgts, max_len)?;
    if plain {
        for p in &mut pairs {
            p.annotated = false;
        }
    }
    Ok((pairs, dropped))
}

/// Bracketed-chunk targets when the file looks bracketed, otherwise plain
/// text wrapped in a single catch-all chunk.
fn load_targets(path: &std::path::Path) -> Result<(Vec<ChunkedText>, bool)> {
    let body = fs::read_to_string(path)
        .with_context(|| format!("cannot read target corpus {}", path.display()))?;
    let bracketed = body
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.trim_start().starts_with('('))
        .unwrap_or(true);
    if bracketed {
        return Ok((load_chunked(path)?, false));
    }
    let lines = load_plain(path)?;
    Ok((lines.into_iter().map(plain_target).collect(), true))
}
