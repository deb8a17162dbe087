//! Corpus BLEU, boundary and tag accuracy, and attention export.

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;

const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct BleuOptions {
    /// Case-fold both sides before matching.
    pub lowercase: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions { lowercase: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BleuScore {
    /// Percent scale, 0 to 100.
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hypothesis_length: usize,
    pub reference_length: usize,
}

fn fold(tokens: &[String], lowercase: bool) -> Vec<String> {
    if lowercase {
        tokens.iter().map(|t| t.to_lowercase()).collect()
    } else {
        tokens.to_vec()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *counts.entry(&tokens[i..i + n]).or_insert(0) += 1;
        }
    }
    counts
}

/// Matched and total hypothesis n-grams of one order, with clipping against
/// the best reference count.
fn clipped_matches(hyp: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts: Vec<HashMap<&[String], usize>> =
        refs.iter().map(|r| ngram_counts(r, n)).collect();
    let mut matched = 0;
    let mut total = 0;
    for (gram, count) in hyp_counts {
        total += count;
        let best = ref_counts.iter().filter_map(|rc| rc.get(gram)).max().copied();
        if let Some(best) = best {
            matched += count.min(best);
        }
    }
    (matched, total)
}

/// Reference length closest to the hypothesis length; ties go to the
/// shorter reference.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    let mut best = refs[0].len();
    for r in &refs[1..] {
        let len = r.len();
        let (d, bd) = (len.abs_diff(hyp_len), best.abs_diff(hyp_len));
        if d < bd || (d == bd && len < best) {
            best = len;
        }
    }
    best
}

/// Corpus-level BLEU with up to 4-gram clipped precisions, geometric mean,
/// and brevity penalty. Any zero precision zeroes the whole score. Each
/// hypothesis may have several references.
pub fn corpus_bleu(
    hypotheses: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    options: &BleuOptions,
) -> Result<BleuScore> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "reference sets",
            lhs: references.len(),
            rhs: hypotheses.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (hyp, refs) in hypotheses.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::Config("every hypothesis needs a reference".into()));
        }
        let hyp = fold(hyp, options.lowercase);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| fold(r, options.lowercase)).collect();
        hyp_len += hyp.len();
        ref_len += closest_ref_len(hyp.len(), &refs);
        for n in 1..=MAX_ORDER {
            let (m, t) = clipped_matches(&hyp, &refs, n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if total[n] > 0 {
            precisions[n] = matched[n] as f64 / total[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len >= ref_len || hyp_len == 0 {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let bleu = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * brevity_penalty * mean.exp()
    };
    Ok(BleuScore {
        bleu,
        precisions,
        brevity_penalty,
        hypothesis_length: hyp_len,
        reference_length: ref_len,
    })
}

/// Sentence BLEU with add-one smoothing on orders above 1, for debugging
/// single pairs; corpus scores should use `corpus_bleu`.
pub fn sentence_bleu_smoothed(
    hypothesis: &[String],
    reference: &[String],
    options: &BleuOptions,
) -> f64 {
    let hyp = fold(hypothesis, options.lowercase);
    let reference = vec![fold(reference, options.lowercase)];
    if hyp.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (m, t) = clipped_matches(&hyp, &reference, n);
        let p = if n == 1 {
            if t == 0 || m == 0 {
                return 0.0;
            }
            m as f64 / t as f64
        } else {
            (m + 1) as f64 / (t + 1) as f64
        };
        log_sum += p.ln();
    }
    let ref_len = reference[0].len();
    let bp = if hyp.len() >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp.len() as f64).exp()
    };
    100.0 * bp * (log_sum / MAX_ORDER as f64).exp()
}

/// Position-wise agreement of two boundary sequences, skipping the first
/// position (always a boundary by construction).
pub fn boundary_agreement(predicted: &[bool], gold: &[bool]) -> Result<(usize, usize)> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "boundary sequences",
            lhs: predicted.len(),
            rhs: gold.len(),
        });
    }
    let correct = predicted
        .iter()
        .zip(gold)
        .skip(1)
        .filter(|(p, g)| p == g)
        .count();
    Ok((correct, predicted.len().saturating_sub(1)))
}

/// Position-wise agreement of two tag sequences.
pub fn tag_agreement(predicted: &[u32], gold: &[u32]) -> Result<(usize, usize)> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "tag sequences",
            lhs: predicted.len(),
            rhs: gold.len(),
        });
    }
    let correct = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok((correct, predicted.len()))
}

/// Accuracy over many sentences: pairs of (predicted, gold).
pub fn boundary_accuracy(pairs: &[(&[bool], &[bool])]) -> Result<f64> {
    let mut correct = 0;
    let mut total = 0;
    for (p, g) in pairs {
        let (c, t) = boundary_agreement(p, g)?;
        correct += c;
        total += t;
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

pub fn tag_accuracy(pairs: &[(&[u32], &[u32])]) -> Result<f64> {
    let mut correct = 0;
    let mut total = 0;
    for (p, g) in pairs {
        let (c, t) = tag_agreement(p, g)?;
        correct += c;
        total += t;
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float")
}

/// Evaluation summary whose numbers are rounded once, so the text report
/// and the JSON report carry identical values.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub bleu: f64,
    pub boundary_accuracy: Option<f64>,
    pub tag_accuracy: Option<f64>,
    pub sentences: usize,
}

impl EvalReport {
    pub fn new(
        bleu: f64,
        boundary_accuracy: Option<f64>,
        tag_accuracy: Option<f64>,
        sentences: usize,
    ) -> Self {
        EvalReport {
            bleu: round6(bleu),
            boundary_accuracy: boundary_accuracy.map(round6),
            tag_accuracy: tag_accuracy.map(round6),
            sentences,
        }
    }

    pub fn text(&self) -> String {
        let mut out = format!("sentences\t{}\nbleu\t{:.6}\n", self.sentences, self.bleu);
        if let Some(b) = self.boundary_accuracy {
            out.push_str(&format!("boundary_accuracy\t{b:.6}\n"));
        }
        if let Some(t) = self.tag_accuracy {
            out.push_str(&format!("tag_accuracy\t{t:.6}\n"));
        }
        out
    }
}

/// Writes one attention matrix as TSV: a header row of source tokens, then
/// one row per target token with its weights.
pub fn write_alignment<W: Write>(
    out: &mut W,
    src_tokens: &[String],
    tgt_tokens: &[String],
    weights: &[Vec<f64>],
) -> Result<()> {
    if weights.len() != tgt_tokens.len() {
        return Err(Error::LengthMismatch {
            what: "alignment rows",
            lhs: weights.len(),
            rhs: tgt_tokens.len(),
        });
    }
    write!(out, "target\\source")?;
    for s in src_tokens {
        write!(out, "\t{s}")?;
    }
    writeln!(out)?;
    for (t, row) in tgt_tokens.iter().zip(weights) {
        if row.len() != src_tokens.len() {
            return Err(Error::LengthMismatch {
                what: "alignment columns",
                lhs: row.len(),
                rhs: src_tokens.len(),
            });
        }
        write!(out, "{t}")?;
        for w in row {
            write!(out, "\t{w:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
