//! Encoder, attention, and the two decoders (bi-scale and baseline) as pure
//! tape programs: every forward pass builds nodes on a caller-supplied
//! [`Tape`], so training, scoring, and search all share one code path.

mod checkpoint;
mod config;
mod layers;

pub use checkpoint::{
    checkpoint_precision, load_checkpoint, save_checkpoint, VocabBundle,
};
pub use config::{AttScale, Mode, ModelConfig, ReadoutKind};

use crate::autodiff::{Params, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};
use layers::{AttnIds, AttnVars, GruIds, GruVars, LinearIds, LinearVars, ReadoutIds, ReadoutVars};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn argmax<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug)]
struct BiscaleIds {
    p_init: LinearIds,
    gate: LinearIds,
    minus: crate::autodiff::ParamId,
    chunk_attn: AttnIds,
    chunk_gru: GruIds,
    tag_readout: ReadoutIds,
}

#[derive(Debug)]
struct Layout {
    src_embed: crate::autodiff::ParamId,
    tgt_embed: crate::autodiff::ParamId,
    enc_fwd: GruIds,
    enc_bwd: GruIds,
    s_init: LinearIds,
    word_attn: AttnIds,
    word_gru: GruIds,
    readout: ReadoutIds,
    bi: Option<BiscaleIds>,
}

/// A translation model: configuration plus named parameters. Forward code
/// lives in methods that take a tape and a [`ModelVars`] binding.
#[derive(Debug)]
pub struct Model<F: Scalar> {
    pub config: ModelConfig,
    pub params: Params<F>,
    ids: Layout,
}

impl<F: Scalar> Model<F> {
    /// Fresh model with Glorot-uniform weights and zero biases, drawn from a
    /// seeded stream in registration order. The stream draws in f64 and
    /// converts, so f32 and f64 models built from one seed match.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::build(config, &mut rng))
    }

    /// All-zero parameters; checkpoint loading overwrites them.
    pub(crate) fn new_zeroed(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        // Any seed works: we zero everything after layout.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::build(config, &mut rng);
        let ids: Vec<_> = model.params.ids().collect();
        for id in ids {
            let t = model.params.value_mut(id);
            for x in t.data_mut() {
                *x = F::zero();
            }
        }
        Ok(model)
    }

    fn build(config: ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = &config;
        let mut p = Params::new();
        let ann = c.annotation_dim();
        let ctx = c.context_dim();

        let src_embed = p.add("src_embed", layers::glorot(rng, c.src_vocab, c.embed_dim));
        let tgt_embed = p.add("tgt_embed", layers::glorot(rng, c.tgt_vocab, c.embed_dim));
        let enc_fwd = GruIds::new(&mut p, rng, "enc_fwd", c.embed_dim, c.encoder_dim);
        let enc_bwd = GruIds::new(&mut p, rng, "enc_bwd", c.embed_dim, c.encoder_dim);
        let s_init = LinearIds::new(&mut p, rng, "s_init", c.word_dim, c.encoder_dim);
        let word_attn = AttnIds::new(&mut p, rng, "word_attn", ann, c.word_dim, c.attention_dim);
        let word_gru = GruIds::new(&mut p, rng, "word_gru", c.embed_dim + ctx, c.word_dim);
        let readout = ReadoutIds::new(
            &mut p,
            rng,
            "readout",
            c.embed_dim + c.word_dim + ctx,
            c.word_dim,
            c.tgt_vocab,
            c.readout,
        );

        let bi = match c.mode {
            Mode::Baseline => None,
            Mode::Biscale => {
                let p_init = LinearIds::new(&mut p, rng, "p_init", c.chunk_dim, c.encoder_dim);
                let gate = LinearIds::new(&mut p, rng, "gate", 2, c.word_dim + c.embed_dim);
                let minus = p.add(
                    "chunk_minus.w",
                    layers::glorot(rng, c.chunk_embed_dim, c.word_dim + c.embed_dim),
                );
                let query_dim = match c.attention_scale {
                    AttScale::Chunk => c.chunk_dim,
                    AttScale::Word => c.word_dim,
                };
                let chunk_attn =
                    AttnIds::new(&mut p, rng, "chunk_attn", ann, query_dim, c.attention_dim);
                let chunk_gru = GruIds::new(
                    &mut p,
                    rng,
                    "chunk_gru",
                    c.chunk_embed_dim + ann,
                    c.chunk_dim,
                );
                let tag_readout = ReadoutIds::new(
                    &mut p,
                    rng,
                    "tag_readout",
                    c.chunk_dim + c.chunk_embed_dim + ann,
                    c.chunk_dim,
                    c.tag_vocab,
                    ReadoutKind::Tanh,
                );
                Some(BiscaleIds {
                    p_init,
                    gate,
                    minus,
                    chunk_attn,
                    chunk_gru,
                    tag_readout,
                })
            }
        };

        Model {
            config,
            params: p,
            ids: Layout {
                src_embed,
                tgt_embed,
                enc_fwd,
                enc_bwd,
                s_init,
                word_attn,
                word_gru,
                readout,
                bi,
            },
        }
    }

    /// Copies every parameter onto the tape once. All forward calls that
    /// share a tape must share one binding so gradients pool per parameter.
    pub fn bind(&self, tape: &mut Tape<F>) -> ModelVars {
        let p = &self.params;
        ModelVars {
            src_embed: tape.param(p, self.ids.src_embed),
            tgt_embed: tape.param(p, self.ids.tgt_embed),
            enc_fwd: GruVars::bind(&self.ids.enc_fwd, p, tape),
            enc_bwd: GruVars::bind(&self.ids.enc_bwd, p, tape),
            s_init: LinearVars::bind(&self.ids.s_init, p, tape),
            word_attn: AttnVars::bind(&self.ids.word_attn, p, tape),
            word_gru: GruVars::bind(&self.ids.word_gru, p, tape),
            readout: ReadoutVars::bind(&self.ids.readout, p, tape),
            bi: self.ids.bi.as_ref().map(|b| BiVars {
                p_init: LinearVars::bind(&b.p_init, p, tape),
                gate: LinearVars::bind(&b.gate, p, tape),
                minus: tape.param(p, b.minus),
                chunk_attn: AttnVars::bind(&b.chunk_attn, p, tape),
                chunk_gru: GruVars::bind(&b.chunk_gru, p, tape),
                tag_readout: ReadoutVars::bind(&b.tag_readout, p, tape),
            }),
        }
    }
}

#[derive(Debug)]
struct BiVars {
    p_init: LinearVars,
    gate: LinearVars,
    minus: Var,
    chunk_attn: AttnVars,
    chunk_gru: GruVars,
    tag_readout: ReadoutVars,
}

/// Tape binding of all parameters, produced by [`Model::bind`].
#[derive(Debug)]
pub struct ModelVars {
    src_embed: Var,
    tgt_embed: Var,
    enc_fwd: GruVars,
    enc_bwd: GruVars,
    s_init: LinearVars,
    word_attn: AttnVars,
    word_gru: GruVars,
    readout: ReadoutVars,
    bi: Option<BiVars>,
}

/// Encoded source sentence: stacked bidirectional annotations plus cached
/// attention projections and the validity mask.
#[derive(Debug)]
pub struct Annotations {
    pub h: Var,
    word_proj: Var,
    chunk_proj: Option<Var>,
    pub mask: Vec<bool>,
    pub len: usize,
}

/// Chunk-scale half of the decoder state.
#[derive(Debug, Clone)]
pub struct ChunkState<F: Scalar> {
    /// Chunk state vector, updated only at boundaries.
    pub p: Var,
    /// 1-based step index of the boundary that produced `p` (0 before any).
    pub boundary_step: usize,
    /// Word-state summary captured at that boundary; the next chunk
    /// embedding is the difference of summaries.
    minus_cache: Option<Var>,
    /// Source attention weights of the current chunk, replayed on
    /// non-boundary steps.
    pub attention: Vec<F>,
}

/// Full decoder state after some number of steps.
#[derive(Debug, Clone)]
pub struct BiScaleState<F: Scalar> {
    /// Steps taken so far (0 = fresh).
    pub step: usize,
    /// Word-scale state, updated every step.
    pub s: Var,
    /// Chunk-scale state; `None` in baseline mode.
    pub chunk: Option<ChunkState<F>>,
}

/// Everything one decoder step exposes.
#[derive(Debug)]
pub struct StepOutput<F: Scalar> {
    pub word_logits: Var,
    /// Boundary gate logits (index 1 = boundary); bi-scale only. Present on
    /// every step, including forced ones, so the objective can score it.
    pub gate_logits: Option<Var>,
    /// Chunk tag logits; present exactly on boundary steps in bi-scale mode.
    pub tag_logits: Option<Var>,
    /// The boundary decision actually taken this step.
    pub boundary: bool,
    /// Source attention weights behind this step's context.
    pub attention: Vec<F>,
    /// Which state queried the attention.
    pub attention_query: AttScale,
}

/// How the boundary gate is decided during a step. The first step of a
/// sentence is always a boundary regardless of the choice.
#[derive(Clone, Copy, Debug)]
pub enum GateChoice {
    /// Externally decided: gold bit in training, branch bit in beam search.
    Forced(bool),
    /// Follow the gate's own argmax (greedy decoding).
    Argmax,
}

impl<F: Scalar> Model<F> {
    /// Runs the bidirectional encoder. `mask` marks real tokens and must be
    /// a true-prefix (padding only at the end); annotation rows for padded
    /// positions are zero and masked out of every attention.
    pub fn encode(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        src: &[u32],
        mask: &[bool],
    ) -> Result<Annotations> {
        if src.len() != mask.len() {
            return Err(Error::LengthMismatch {
                what: "source mask",
                lhs: mask.len(),
                rhs: src.len(),
            });
        }
        let len = mask.iter().take_while(|&&m| m).count();
        if len == 0 {
            return Err(Error::Config("empty source sentence".into()));
        }
        if mask[len..].iter().any(|&m| m) {
            return Err(Error::Config("source mask must be padding-final".into()));
        }
        for &t in &src[..len] {
            if t as usize >= self.config.src_vocab {
                return Err(Error::IndexOutOfRange {
                    what: "source token id",
                    index: t as usize,
                    size: self.config.src_vocab,
                });
            }
        }

        let hdim = self.config.encoder_dim;
        let embeds: Vec<Var> = src[..len]
            .iter()
            .map(|&t| tape.row(vars.src_embed, t as usize))
            .collect::<Result<_>>()?;

        let mut fwd = Vec::with_capacity(len);
        let mut h = tape.leaf(Tensor::zeros(vec![hdim]));
        for x in &embeds {
            h = vars.enc_fwd.step(tape, h, *x)?;
            fwd.push(h);
        }
        let mut bwd = vec![h; len];
        let mut hb = tape.leaf(Tensor::zeros(vec![hdim]));
        for (j, x) in embeds.iter().enumerate().rev() {
            hb = vars.enc_bwd.step(tape, hb, *x)?;
            bwd[j] = hb;
        }

        let zero_ann = tape.leaf(Tensor::zeros(vec![self.config.annotation_dim()]));
        let mut rows = Vec::with_capacity(src.len());
        for j in 0..src.len() {
            if j < len {
                rows.push(tape.concat(&[fwd[j], bwd[j]])?);
            } else {
                rows.push(zero_ann);
            }
        }
        let h = tape.stack_rows(&rows)?;
        let word_proj = tape.matmul(h, vars.word_attn.u)?;
        let chunk_proj = match &vars.bi {
            Some(bi) => Some(tape.matmul(h, bi.chunk_attn.u)?),
            None => None,
        };
        Ok(Annotations {
            h,
            word_proj,
            chunk_proj,
            mask: mask.to_vec(),
            len,
        })
    }

    /// Initial decoder state from the first backward annotation.
    pub fn init_state(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        ann: &Annotations,
    ) -> Result<BiScaleState<F>> {
        let first = tape.row(ann.h, 0)?;
        let h1_bwd = tape.slice(first, self.config.encoder_dim, self.config.encoder_dim)?;
        let s_pre = vars.s_init.apply(tape, h1_bwd)?;
        let s = tape.tanh(s_pre);
        let chunk = match &vars.bi {
            Some(bi) => {
                let p_pre = bi.p_init.apply(tape, h1_bwd)?;
                Some(ChunkState {
                    p: tape.tanh(p_pre),
                    boundary_step: 0,
                    minus_cache: None,
                    attention: Vec::new(),
                })
            }
            None => None,
        };
        Ok(BiScaleState { step: 0, s, chunk })
    }

    /// Boundary gate log-probabilities for the next step, as plain values.
    /// Index 1 is the boundary class. Only meaningful in bi-scale mode.
    pub fn gate_log_probs(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        state: &BiScaleState<F>,
        y_prev: u32,
    ) -> Result<[F; 2]> {
        let bi = vars
            .bi
            .as_ref()
            .ok_or_else(|| Error::Config("baseline decoder has no boundary gate".into()))?;
        let e_prev = self.embed_tgt(tape, vars, y_prev)?;
        let gin = tape.concat(&[state.s, e_prev])?;
        let logits = bi.gate.apply(tape, gin)?;
        let lsm = tape.log_softmax(logits)?;
        let d = tape.value(lsm).data();
        Ok([d[0], d[1]])
    }

    fn embed_tgt(&self, tape: &mut Tape<F>, vars: &ModelVars, y: u32) -> Result<Var> {
        if y as usize >= self.config.tgt_vocab {
            return Err(Error::IndexOutOfRange {
                what: "target token id",
                index: y as usize,
                size: self.config.tgt_vocab,
            });
        }
        tape.row(vars.tgt_embed, y as usize)
    }

    /// One decoder step. `y_prev` is the previously emitted token (BOS on
    /// the first step). The boundary gate's probability is always computed;
    /// `gate` only decides which branch the state takes. Step 1 is forced
    /// to open a chunk.
    ///
    /// On non-boundary steps the chunk state is carried over as the same
    /// tape node: values are bitwise identical and no gradient flows through
    /// chunk-scale parameters from such steps.
    pub fn decoder_step(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        state: &BiScaleState<F>,
        y_prev: u32,
        ann: &Annotations,
        gate: GateChoice,
    ) -> Result<(BiScaleState<F>, StepOutput<F>)> {
        let e_prev = self.embed_tgt(tape, vars, y_prev)?;
        match &vars.bi {
            None => self.baseline_step(tape, vars, state, e_prev, ann),
            Some(_) => self.biscale_step(tape, vars, state, e_prev, ann, gate),
        }
    }

    fn baseline_step(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        state: &BiScaleState<F>,
        e_prev: Var,
        ann: &Annotations,
    ) -> Result<(BiScaleState<F>, StepOutput<F>)> {
        let (ctx, weights) =
            vars.word_attn
                .apply(tape, state.s, ann.h, ann.word_proj, &ann.mask)?;
        let x = tape.concat(&[e_prev, ctx])?;
        let s = vars.word_gru.step(tape, state.s, x)?;
        let rin = tape.concat(&[e_prev, s, ctx])?;
        let word_logits = vars.readout.apply(tape, rin)?;
        let attention = tape.value(weights).data().to_vec();
        Ok((
            BiScaleState {
                step: state.step + 1,
                s,
                chunk: None,
            },
            StepOutput {
                word_logits,
                gate_logits: None,
                tag_logits: None,
                boundary: false,
                attention,
                attention_query: AttScale::Word,
            },
        ))
    }

    fn biscale_step(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        state: &BiScaleState<F>,
        e_prev: Var,
        ann: &Annotations,
        gate: GateChoice,
    ) -> Result<(BiScaleState<F>, StepOutput<F>)> {
        let bi = vars.bi.as_ref().expect("biscale vars");
        let chunk = state
            .chunk
            .as_ref()
            .ok_or_else(|| Error::Config("bi-scale step on a baseline state".into()))?;

        let gin = tape.concat(&[state.s, e_prev])?;
        let gate_logits = bi.gate.apply(tape, gin)?;
        let boundary = if state.step == 0 {
            true
        } else {
            match gate {
                GateChoice::Forced(b) => b,
                GateChoice::Argmax => {
                    let g = tape.value(gate_logits).data();
                    g[1] > g[0]
                }
            }
        };

        let (new_chunk, tag_logits, attention) = if boundary {
            let m_now = tape.matvec(bi.minus, gin)?;
            let e_p = match chunk.minus_cache {
                Some(cache) => tape.sub(m_now, cache)?,
                // First chunk of the sentence: nothing before it to subtract.
                None => tape.leaf(Tensor::zeros(vec![self.config.chunk_embed_dim])),
            };
            let query = match self.config.attention_scale {
                AttScale::Chunk => chunk.p,
                AttScale::Word => state.s,
            };
            let proj = ann.chunk_proj.expect("biscale annotations");
            let (pc, weights) = bi.chunk_attn.apply(tape, query, ann.h, proj, &ann.mask)?;
            let cin = tape.concat(&[e_p, pc])?;
            let p = bi.chunk_gru.step(tape, chunk.p, cin)?;
            let tin = tape.concat(&[p, e_p, pc])?;
            let tag_logits = bi.tag_readout.apply(tape, tin)?;
            let attention = tape.value(weights).data().to_vec();
            (
                ChunkState {
                    p,
                    boundary_step: state.step + 1,
                    minus_cache: Some(m_now),
                    attention: attention.clone(),
                },
                Some(tag_logits),
                attention,
            )
        } else {
            (chunk.clone(), None, chunk.attention.clone())
        };

        let x = tape.concat(&[e_prev, new_chunk.p])?;
        let s = vars.word_gru.step(tape, state.s, x)?;
        let rin = tape.concat(&[e_prev, s, new_chunk.p])?;
        let word_logits = vars.readout.apply(tape, rin)?;

        Ok((
            BiScaleState {
                step: state.step + 1,
                s,
                chunk: Some(new_chunk),
            },
            StepOutput {
                word_logits,
                gate_logits: Some(gate_logits),
                tag_logits,
                boundary,
                attention,
                attention_query: self.config.attention_scale,
            },
        ))
    }

    /// Teacher-forced pass over a whole target sentence: encoder consumers
    /// get one step output and one post-step state per target token. Gold
    /// boundaries drive the gate in bi-scale mode; the baseline ignores
    /// them.
    pub fn run_teacher_forced(
        &self,
        tape: &mut Tape<F>,
        vars: &ModelVars,
        ann: &Annotations,
        tgt: &[u32],
        boundaries: &[bool],
    ) -> Result<(Vec<StepOutput<F>>, Vec<BiScaleState<F>>)> {
        if boundaries.len() != tgt.len() {
            return Err(Error::LengthMismatch {
                what: "boundary bits",
                lhs: boundaries.len(),
                rhs: tgt.len(),
            });
        }
        let mut state = self.init_state(tape, vars, ann)?;
        let mut outputs = Vec::with_capacity(tgt.len());
        let mut states = Vec::with_capacity(tgt.len());
        for t in 0..tgt.len() {
            let y_prev = if t == 0 { self.config.bos_id } else { tgt[t - 1] };
            let (next, out) = self.decoder_step(
                tape,
                vars,
                &state,
                y_prev,
                ann,
                GateChoice::Forced(boundaries[t]),
            )?;
            outputs.push(out);
            states.push(next.clone());
            state = next;
        }
        Ok((outputs, states))
    }
}
