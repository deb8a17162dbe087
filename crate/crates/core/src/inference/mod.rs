//! Greedy and beam-search decoding, plus forced re-scoring.

use crate::autodiff::{Scalar, Tape};
use crate::error::{Error, Result};
use crate::model::{argmax, AttScale, BiScaleState, GateChoice, Mode, Model, StepOutput};
use serde::{Deserialize, Serialize};

/// How beam search treats the boundary gate: branch on both decisions and
/// score them, or follow the gate's argmax inside each hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Inbeam,
    Argmax,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam: usize,
    pub max_len: usize,
    pub gate_mode: GateMode,
    /// Final ranking divides scores by `len^len_norm`; 0 disables.
    pub len_norm: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam: 10, max_len: 80, gate_mode: GateMode::Inbeam, len_norm: 1.0 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam == 0 {
            return Err(Error::Config("beam must be at least 1".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if !self.len_norm.is_finite() || self.len_norm < 0.0 {
            return Err(Error::Config(format!(
                "len_norm must be non-negative, got {}",
                self.len_norm
            )));
        }
        Ok(())
    }
}

/// Source attention weights behind one emitted token.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub weights: Vec<f64>,
    pub query: AttScale,
    pub boundary: bool,
}

/// One decoded candidate. `score` is the sum of word log-probabilities,
/// plus gate log-probabilities when the gate was searched in-beam;
/// `normalized` divides by `len^len_norm`.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    pub boundaries: Vec<bool>,
    pub tags: Vec<u32>,
    pub score: f64,
    pub normalized: f64,
    pub finished: bool,
    pub trace: Vec<TraceStep>,
}

fn normalized(score: f64, len: usize, len_norm: f64) -> f64 {
    score / (len as f64).powf(len_norm)
}

fn trace_step<F: Scalar>(out: &StepOutput<F>) -> TraceStep {
    TraceStep {
        weights: out.attention.iter().map(|w| w.scalar_to_f64()).collect(),
        query: out.attention_query,
        boundary: out.boundary,
    }
}

/// Greedy decoding: argmax word and argmax gate at every step. Equivalent
/// to beam search with beam 1 and the gate on argmax.
pub fn greedy_decode<F: Scalar>(
    model: &Model<F>,
    src: &[u32],
    config: &DecodeConfig,
) -> Result<Hypothesis> {
    config.validate()?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let mask = vec![true; src.len()];
    let ann = model.encode(&mut tape, &vars, src, &mask)?;
    let mut state = model.init_state(&mut tape, &vars, &ann)?;
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        boundaries: Vec::new(),
        tags: Vec::new(),
        score: 0.0,
        normalized: 0.0,
        finished: false,
        trace: Vec::new(),
    };
    let mut y_prev = model.config.bos_id;
    for _ in 0..config.max_len {
        let (next, out) =
            model.decoder_step(&mut tape, &vars, &state, y_prev, &ann, GateChoice::Argmax)?;
        let lsm = tape.log_softmax(out.word_logits)?;
        let probs = tape.value(lsm).data();
        let word = argmax(probs);
        hyp.score += probs[word].scalar_to_f64();
        hyp.tokens.push(word as u32);
        hyp.boundaries.push(out.boundary);
        if let Some(tag_logits) = out.tag_logits {
            hyp.tags.push(argmax(tape.value(tag_logits).data()) as u32);
        }
        hyp.trace.push(trace_step(&out));
        state = next;
        y_prev = word as u32;
        if word as u32 == model.config.eos_id {
            hyp.finished = true;
            break;
        }
    }
    hyp.normalized = normalized(hyp.score, hyp.tokens.len(), config.len_norm);
    Ok(hyp)
}

struct Beam<F: Scalar> {
    state: BiScaleState<F>,
    tokens: Vec<u32>,
    boundaries: Vec<bool>,
    tags: Vec<u32>,
    trace: Vec<TraceStep>,
    score: f64,
}

impl<F: Scalar> Beam<F> {
    fn into_hypothesis(self, finished: bool, len_norm: f64) -> Hypothesis {
        let normalized = normalized(self.score, self.tokens.len(), len_norm);
        Hypothesis {
            tokens: self.tokens,
            boundaries: self.boundaries,
            tags: self.tags,
            score: self.score,
            normalized,
            finished,
            trace: self.trace,
        }
    }
}

/// One advanced state a candidate token can extend.
struct Branch<F: Scalar> {
    hyp: usize,
    state: BiScaleState<F>,
    out: StepOutput<F>,
    /// Hypothesis score plus this branch's gate term, before any word.
    base: f64,
    log_probs: Vec<f64>,
}

/// Beam search over words, with the boundary gate either searched in-beam
/// (both decisions scored and kept as separate hypotheses) or followed
/// greedily. Chunk tags are read off the tag readout's argmax at each
/// boundary; they never affect future state, so they are not searched.
/// Returns hypotheses ranked by normalized score, best first; candidates
/// still unfinished at `max_len` rank with `finished` unset.
pub fn beam_search<F: Scalar>(
    model: &Model<F>,
    src: &[u32],
    config: &DecodeConfig,
) -> Result<Vec<Hypothesis>> {
    config.validate()?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let mask = vec![true; src.len()];
    let ann = model.encode(&mut tape, &vars, src, &mask)?;
    let init = model.init_state(&mut tape, &vars, &ann)?;

    let mut live = vec![Beam {
        state: init,
        tokens: Vec::new(),
        boundaries: Vec::new(),
        tags: Vec::new(),
        trace: Vec::new(),
        score: 0.0,
    }];
    let mut done: Vec<Hypothesis> = Vec::new();

    for step in 1..=config.max_len {
        let mut branches: Vec<Branch<F>> = Vec::new();
        for (hi, beam) in live.iter().enumerate() {
            let y_prev = *beam.tokens.last().unwrap_or(&model.config.bos_id);
            let choices: Vec<(GateChoice, f64)> = if model.config.mode == Mode::Baseline {
                vec![(GateChoice::Argmax, 0.0)]
            } else if step == 1 {
                vec![(GateChoice::Forced(true), 0.0)]
            } else {
                match config.gate_mode {
                    GateMode::Argmax => vec![(GateChoice::Argmax, 0.0)],
                    GateMode::Inbeam => {
                        let lp =
                            model.gate_log_probs(&mut tape, &vars, &beam.state, y_prev)?;
                        vec![
                            (GateChoice::Forced(false), lp[0].scalar_to_f64()),
                            (GateChoice::Forced(true), lp[1].scalar_to_f64()),
                        ]
                    }
                }
            };
            for (gate, gate_term) in choices {
                let (state, out) =
                    model.decoder_step(&mut tape, &vars, &beam.state, y_prev, &ann, gate)?;
                let lsm = tape.log_softmax(out.word_logits)?;
                let log_probs =
                    tape.value(lsm).data().iter().map(|p| p.scalar_to_f64()).collect();
                branches.push(Branch {
                    hyp: hi,
                    state,
                    out,
                    base: beam.score + gate_term,
                    log_probs,
                });
            }
        }

        // (branch index, word, score); stable sort keeps generation order
        // on ties.
        let mut candidates: Vec<(usize, u32, f64)> = Vec::new();
        for (bi, branch) in branches.iter().enumerate() {
            for (w, lp) in branch.log_probs.iter().enumerate() {
                candidates.push((bi, w as u32, branch.base + lp));
            }
        }
        candidates
            .sort_by(|a, b| b.2.partial_cmp(&a.2).expect("finite scores"));
        candidates.truncate(config.beam);

        let mut next_live = Vec::new();
        for (bi, word, score) in candidates {
            let branch = &branches[bi];
            let parent = &live[branch.hyp];
            let mut tokens = parent.tokens.clone();
            tokens.push(word);
            let mut boundaries = parent.boundaries.clone();
            boundaries.push(branch.out.boundary);
            let mut tags = parent.tags.clone();
            if let Some(tag_logits) = branch.out.tag_logits {
                tags.push(argmax(tape.value(tag_logits).data()) as u32);
            }
            let mut trace = parent.trace.clone();
            trace.push(trace_step(&branch.out));
            let beam = Beam {
                state: branch.state.clone(),
                tokens,
                boundaries,
                tags,
                trace,
                score,
            };
            if word == model.config.eos_id {
                done.push(beam.into_hypothesis(true, config.len_norm));
            } else {
                next_live.push(beam);
            }
        }
        live = next_live;
        if live.is_empty() {
            break;
        }
    }

    for beam in live {
        done.push(beam.into_hypothesis(false, config.len_norm));
    }
    if done.is_empty() {
        return Err(Error::Config("beam search produced no hypotheses".into()));
    }
    done.sort_by(|a, b| b.normalized.partial_cmp(&a.normalized).expect("finite scores"));
    Ok(done)
}

/// A forced decode of a known token sequence.
#[derive(Clone, Debug)]
pub struct ScoredSequence {
    pub score: f64,
    pub normalized: f64,
    pub boundaries: Vec<bool>,
    pub tags: Vec<u32>,
}

/// Scores a fixed token sequence exactly as beam search would have: word
/// log-probabilities always, gate log-probabilities from step 2 on when the
/// gate mode is in-beam. Boundaries are either supplied or derived from the
/// gate's argmax.
pub fn score_sequence<F: Scalar>(
    model: &Model<F>,
    src: &[u32],
    tokens: &[u32],
    forced_boundaries: Option<&[bool]>,
    config: &DecodeConfig,
) -> Result<ScoredSequence> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(Error::Config("cannot score an empty sequence".into()));
    }
    if let Some(b) = forced_boundaries {
        if b.len() != tokens.len() {
            return Err(Error::LengthMismatch {
                what: "forced boundaries",
                lhs: b.len(),
                rhs: tokens.len(),
            });
        }
    }
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let mask = vec![true; src.len()];
    let ann = model.encode(&mut tape, &vars, src, &mask)?;
    let mut state = model.init_state(&mut tape, &vars, &ann)?;

    let biscale = model.config.mode == Mode::Biscale;
    let mut score = 0.0;
    let mut boundaries = Vec::with_capacity(tokens.len());
    let mut tags = Vec::new();
    for (t, &word) in tokens.iter().enumerate() {
        let y_prev = if t == 0 { model.config.bos_id } else { tokens[t - 1] };
        let gate = match forced_boundaries {
            Some(b) => GateChoice::Forced(b[t]),
            None => GateChoice::Argmax,
        };
        if biscale && t > 0 && config.gate_mode == GateMode::Inbeam {
            let lp = model.gate_log_probs(&mut tape, &vars, &state, y_prev)?;
            let taken = match gate {
                GateChoice::Forced(b) => b,
                GateChoice::Argmax => lp[1] > lp[0],
            };
            score += lp[taken as usize].scalar_to_f64();
        }
        let (next, out) = model.decoder_step(&mut tape, &vars, &state, y_prev, &ann, gate)?;
        let lsm = tape.log_softmax(out.word_logits)?;
        if word as usize >= tape.value(lsm).len() {
            return Err(Error::IndexOutOfRange {
                what: "target token id",
                index: word as usize,
                size: tape.value(lsm).len(),
            });
        }
        score += tape.value(lsm).data()[word as usize].scalar_to_f64();
        boundaries.push(out.boundary);
        if let Some(tag_logits) = out.tag_logits {
            tags.push(argmax(tape.value(tag_logits).data()) as u32);
        }
        state = next;
    }
    Ok(ScoredSequence {
        score,
        normalized: normalized(score, tokens.len(), config.len_norm),
        boundaries,
        tags,
    })
}
