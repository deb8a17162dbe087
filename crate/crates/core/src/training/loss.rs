use crate::autodiff::{Scalar, Tape, Tensor, Var};
use crate::corpus::Batch;
use crate::error::{Error, Result};
use crate::model::{Mode, Model, ModelVars};

/// Relative weights of the three objective terms. The tag and boundary
/// weights are ignored in baseline mode, which has neither output.
#[derive(Clone, Copy, Debug)]
pub struct LossWeights {
    pub word: f64,
    pub tag: f64,
    pub boundary: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { word: 1.0, tag: 1.0, boundary: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("word", self.word),
            ("tag", self.tag),
            ("boundary", self.boundary),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!(
                    "loss weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-sentence-mean values of the unweighted objective terms, plus the
/// weighted total the optimizer actually sees.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub word: f64,
    pub tag: f64,
    pub boundary: f64,
    pub tokens: usize,
}

fn sum_terms<F: Scalar>(tape: &mut Tape<F>, terms: &[Var]) -> Var {
    let mut acc = tape.leaf(Tensor::scalar(F::zero()));
    for &t in terms {
        acc = tape.add(acc, t).expect("scalar sum");
    }
    acc
}

/// Negative log-likelihood of one sentence under teacher forcing: word
/// cross-entropy at every step, boundary cross-entropy at every step after
/// the first (the first boundary is structural, not predicted), tag
/// cross-entropy at each boundary step. Returns the three unweighted sums.
pub fn sentence_loss<F: Scalar>(
    model: &Model<F>,
    tape: &mut Tape<F>,
    vars: &ModelVars,
    src: &[u32],
    src_mask: &[bool],
    tgt: &[u32],
    boundaries: &[bool],
    tags: &[u32],
) -> Result<(Var, Var, Var)> {
    let ann = model.encode(tape, vars, src, src_mask)?;
    let (outputs, _) = model.run_teacher_forced(tape, vars, &ann, tgt, boundaries)?;

    let mut word_terms = Vec::with_capacity(tgt.len());
    let mut gate_terms = Vec::new();
    let mut tag_terms = Vec::new();
    let mut chunk = 0usize;
    for (t, out) in outputs.iter().enumerate() {
        word_terms.push(tape.cross_entropy_logits(out.word_logits, tgt[t] as usize)?);
        if let Some(gate) = out.gate_logits {
            if t > 0 {
                gate_terms.push(tape.cross_entropy_logits(gate, boundaries[t] as usize)?);
            }
        }
        if let Some(tag_logits) = out.tag_logits {
            if chunk >= tags.len() {
                return Err(Error::LengthMismatch {
                    what: "chunk tags",
                    lhs: tags.len(),
                    rhs: chunk + 1,
                });
            }
            tag_terms.push(tape.cross_entropy_logits(tag_logits, tags[chunk] as usize)?);
            chunk += 1;
        }
    }
    if model.config.mode == Mode::Biscale && chunk != tags.len() {
        return Err(Error::LengthMismatch { what: "chunk tags", lhs: tags.len(), rhs: chunk });
    }

    let word = sum_terms(tape, &word_terms);
    let tag = sum_terms(tape, &tag_terms);
    let boundary = sum_terms(tape, &gate_terms);
    Ok((word, tag, boundary))
}

/// Weighted joint loss of a batch, averaged per sentence. In bi-scale mode
/// every sentence must carry gold boundaries and tags.
pub fn batch_loss<F: Scalar>(
    model: &Model<F>,
    tape: &mut Tape<F>,
    vars: &ModelVars,
    batch: &Batch,
    weights: &LossWeights,
) -> Result<(Var, LossBreakdown)> {
    if model.config.mode == Mode::Biscale && !batch.annotated {
        return Err(Error::MissingAnnotations);
    }
    let n = batch.len();
    let mut word_sums = Vec::with_capacity(n);
    let mut tag_sums = Vec::with_capacity(n);
    let mut gate_sums = Vec::with_capacity(n);
    let mut tokens = 0usize;
    for i in 0..n {
        let tgt_len = batch.tgt_len(i);
        let (w, t, b) = sentence_loss(
            model,
            tape,
            vars,
            &batch.src[i],
            &batch.src_mask[i],
            &batch.tgt[i][..tgt_len],
            &batch.boundaries[i][..tgt_len],
            &batch.tags[i],
        )?;
        word_sums.push(w);
        tag_sums.push(t);
        gate_sums.push(b);
        tokens += tgt_len;
    }
    let inv_n = F::scalar_from_f64(1.0 / n as f64);
    let word_sum = sum_terms(tape, &word_sums);
    let tag_sum = sum_terms(tape, &tag_sums);
    let gate_sum = sum_terms(tape, &gate_sums);
    let word = tape.scale(word_sum, inv_n);
    let tag = tape.scale(tag_sum, inv_n);
    let boundary = tape.scale(gate_sum, inv_n);

    let weighted_word = tape.scale(word, F::scalar_from_f64(weights.word));
    let weighted_tag = tape.scale(tag, F::scalar_from_f64(weights.tag));
    let weighted_boundary = tape.scale(boundary, F::scalar_from_f64(weights.boundary));
    let total = sum_terms(tape, &[weighted_word, weighted_tag, weighted_boundary]);

    let breakdown = LossBreakdown {
        total: tape.value(total).item().scalar_to_f64(),
        word: tape.value(word).item().scalar_to_f64(),
        tag: tape.value(tag).item().scalar_to_f64(),
        boundary: tape.value(boundary).item().scalar_to_f64(),
        tokens,
    };
    Ok((total, breakdown))
}
