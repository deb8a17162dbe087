use super::{batch_loss, clip_global_norm, Optimizer, TrainConfig};
use crate::autodiff::{Scalar, Tape};
use crate::corpus::{make_batches, ParallelExample};
use crate::error::{Error, Result};
use crate::model::{argmax, Model};

/// Teacher-forced hit counts. Boundary counts skip the first step, which is
/// structural; tag counts cover boundary steps only. Both stay zero in
/// baseline mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TfCounts {
    pub token_correct: usize,
    pub token_total: usize,
    pub boundary_correct: usize,
    pub boundary_total: usize,
    pub tag_correct: usize,
    pub tag_total: usize,
}

fn ratio(correct: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    }
}

impl TfCounts {
    pub fn token_accuracy(&self) -> f64 {
        ratio(self.token_correct, self.token_total)
    }

    pub fn boundary_accuracy(&self) -> f64 {
        ratio(self.boundary_correct, self.boundary_total)
    }

    pub fn tag_accuracy(&self) -> f64 {
        ratio(self.tag_correct, self.tag_total)
    }

    pub fn merge(&mut self, other: &TfCounts) {
        self.token_correct += other.token_correct;
        self.token_total += other.token_total;
        self.boundary_correct += other.boundary_correct;
        self.boundary_total += other.boundary_total;
        self.tag_correct += other.tag_correct;
        self.tag_total += other.tag_total;
    }
}

/// Greedy per-position accuracy under teacher forcing: every prediction is
/// made from the gold prefix.
pub fn teacher_forced_counts<F: Scalar>(
    model: &Model<F>,
    examples: &[ParallelExample],
) -> Result<TfCounts> {
    let mut counts = TfCounts::default();
    for ex in examples {
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
        let mut chunk = 0usize;
        for (t, out) in outputs.iter().enumerate() {
            counts.token_total += 1;
            if argmax(tape.value(out.word_logits).data()) == ex.tgt.tokens[t] as usize {
                counts.token_correct += 1;
            }
            if let Some(gate) = out.gate_logits {
                if t > 0 {
                    counts.boundary_total += 1;
                    let predicted = argmax(tape.value(gate).data()) == 1;
                    if predicted == ex.tgt.boundaries[t] {
                        counts.boundary_correct += 1;
                    }
                }
            }
            if let Some(tag_logits) = out.tag_logits {
                counts.tag_total += 1;
                if argmax(tape.value(tag_logits).data()) == ex.tgt.tags[chunk] as usize {
                    counts.tag_correct += 1;
                }
                chunk += 1;
            }
        }
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeReport {
    pub steps: usize,
    pub sentences: usize,
    pub final_loss: f64,
    pub token_accuracy: f64,
    pub boundary_accuracy: f64,
    pub tag_accuracy: f64,
}

/// Sanity check that the model can memorize a handful of sentences: takes
/// at most 32, runs full-batch updates for `steps` steps, then measures
/// teacher-forced accuracy. A healthy configuration drives token accuracy
/// to 1.0 quickly.
pub fn overfit_probe<F: Scalar>(
    model: &mut Model<F>,
    examples: &[ParallelExample],
    steps: usize,
    config: &TrainConfig,
) -> Result<ProbeReport> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    config.validate()?;
    let subset = &examples[..examples.len().min(32)];
    let batch = make_batches(subset, subset.len())?.remove(0);
    let weights = config.weights();
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut last = f64::NAN;
    for step in 0..steps {
        model.params.zero_grads();
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let (total, parts) = batch_loss(model, &mut tape, &vars, &batch, &weights)?;
        if !parts.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                batch: step,
                detail: format!("overfit probe, word {} tag {}", parts.word, parts.tag),
            });
        }
        tape.backward(total)?;
        tape.accumulate_into(&mut model.params);
        clip_global_norm(&mut model.params, config.clip_norm);
        optimizer.step(&mut model.params, config.learning_rate);
        last = parts.total;
    }
    let counts = teacher_forced_counts(model, subset)?;
    Ok(ProbeReport {
        steps,
        sentences: subset.len(),
        final_loss: last,
        token_accuracy: counts.token_accuracy(),
        boundary_accuracy: counts.boundary_accuracy(),
        tag_accuracy: counts.tag_accuracy(),
    })
}
