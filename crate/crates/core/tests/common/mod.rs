//! A from-scratch f64 reference decoder used to cross-check the tape-based
//! model. Everything here is plain loops over slices; parameters are read
//! from the model by name only.
#![allow(dead_code)]

use biscale::autodiff::Tensor;
use biscale::model::{AttScale, Mode, ModelConfig, ReadoutKind};
use std::collections::HashMap;

pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn assert_close(actual: &[f64], expected: &[f64], tol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!(
            approx(*a, *e, tol),
            "{what}[{i}]: {a} vs {e} (diff {})",
            (a - e).abs()
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(m: &Tensor<f64>, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = (m.rows(), m.cols());
    assert_eq!(cols, v.len());
    let d = m.data();
    (0..rows)
        .map(|r| (0..cols).map(|c| d[r * cols + c] * v[c]).sum())
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    let lse = m + z.ln();
    xs.iter().map(|x| x - lse).collect()
}

/// Parameters of one model, keyed by name, plus its configuration.
pub struct Reference {
    pub config: ModelConfig,
    params: HashMap<String, Tensor<f64>>,
}

/// One decoder step of the reference run.
pub struct RefStep {
    pub s: Vec<f64>,
    pub p: Option<Vec<f64>>,
    /// Context fed to the word GRU: attention context in baseline mode, the
    /// chunk state in bi-scale mode.
    pub context: Vec<f64>,
    pub attention: Vec<f64>,
    pub word_log_probs: Vec<f64>,
    pub gate_log_probs: Option<[f64; 2]>,
    pub tag_log_probs: Option<Vec<f64>>,
    /// Chunk embedding (difference of summaries); boundary steps only.
    pub e_p: Option<Vec<f64>>,
    pub boundary: bool,
}

impl Reference {
    pub fn new(model: &biscale::model::Model<f64>) -> Self {
        let mut params = HashMap::new();
        for (_, name, tensor) in model.params.iter() {
            params.insert(name.to_string(), tensor.clone());
        }
        Reference { config: model.config.clone(), params }
    }

    fn p(&self, name: &str) -> &Tensor<f64> {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("reference: no parameter named {name}"))
    }

    fn row(&self, name: &str, index: usize) -> Vec<f64> {
        let t = self.p(name);
        let cols = t.cols();
        t.data()[index * cols..(index + 1) * cols].to_vec()
    }

    fn gru(&self, prefix: &str, h: &[f64], x: &[f64]) -> Vec<f64> {
        let pre_r = add(
            &add(&matvec(self.p(&format!("{prefix}.w_r")), x),
                 &matvec(self.p(&format!("{prefix}.u_r")), h)),
            self.p(&format!("{prefix}.b_r")).data(),
        );
        let r: Vec<f64> = pre_r.iter().map(|v| sigmoid(*v)).collect();
        let pre_z = add(
            &add(&matvec(self.p(&format!("{prefix}.w_z")), x),
                 &matvec(self.p(&format!("{prefix}.u_z")), h)),
            self.p(&format!("{prefix}.b_z")).data(),
        );
        let z: Vec<f64> = pre_z.iter().map(|v| sigmoid(*v)).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let pre_c = add(
            &add(&matvec(self.p(&format!("{prefix}.w_h")), x),
                 &matvec(self.p(&format!("{prefix}.u_h")), &rh)),
            self.p(&format!("{prefix}.b_h")).data(),
        );
        let c: Vec<f64> = pre_c.iter().map(|v| v.tanh()).collect();
        (0..h.len()).map(|i| h[i] - z[i] * h[i] + z[i] * c[i]).collect()
    }

    /// Additive attention; `h` holds one annotation per real position.
    /// Returns (context, weights).
    fn attention(&self, prefix: &str, query: &[f64], h: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let u = self.p(&format!("{prefix}.u"));
        let q = self.p(&format!("{prefix}.q"));
        let v = self.p(&format!("{prefix}.v")).data();
        let attn_dim = u.cols();
        let qs = matvec(q, query);
        let scores: Vec<f64> = h
            .iter()
            .map(|hj| {
                let mut score = 0.0;
                for k in 0..attn_dim {
                    let mut pre = qs[k];
                    for (a, ha) in hj.iter().enumerate() {
                        pre += ha * u.data()[a * attn_dim + k];
                    }
                    score += v[k] * pre.tanh();
                }
                score
            })
            .collect();
        let weights = softmax(&scores);
        let ann_dim = h[0].len();
        let mut ctx = vec![0.0; ann_dim];
        for (w, hj) in weights.iter().zip(h) {
            for (c, x) in ctx.iter_mut().zip(hj) {
                *c += w * x;
            }
        }
        (ctx, weights)
    }

    fn readout(&self, prefix: &str, kind: ReadoutKind, input: &[f64]) -> Vec<f64> {
        let pre = add(
            &matvec(self.p(&format!("{prefix}.hidden_w")), input),
            self.p(&format!("{prefix}.hidden_b")).data(),
        );
        let hidden: Vec<f64> = match kind {
            ReadoutKind::Tanh => pre.iter().map(|v| v.tanh()).collect(),
            ReadoutKind::Maxout => pre.chunks(2).map(|p| p[0].max(p[1])).collect(),
        };
        add(
            &matvec(self.p(&format!("{prefix}.out_w")), &hidden),
            self.p(&format!("{prefix}.out_b")).data(),
        )
    }

    fn linear(&self, prefix: &str, x: &[f64]) -> Vec<f64> {
        add(
            &matvec(self.p(&format!("{prefix}.w")), x),
            self.p(&format!("{prefix}.b")).data(),
        )
    }

    /// Bidirectional encoding of the full (unpadded) source.
    pub fn encode(&self, src: &[u32]) -> Vec<Vec<f64>> {
        let embeds: Vec<Vec<f64>> =
            src.iter().map(|&t| self.row("src_embed", t as usize)).collect();
        let hdim = self.config.encoder_dim;
        let mut fwd = Vec::with_capacity(src.len());
        let mut h = vec![0.0; hdim];
        for x in &embeds {
            h = self.gru("enc_fwd", &h, x);
            fwd.push(h.clone());
        }
        let mut bwd = vec![Vec::new(); src.len()];
        let mut hb = vec![0.0; hdim];
        for (j, x) in embeds.iter().enumerate().rev() {
            hb = self.gru("enc_bwd", &hb, x);
            bwd[j] = hb.clone();
        }
        (0..src.len()).map(|j| concat(&[&fwd[j], &bwd[j]])).collect()
    }

    /// Teacher-forced decode. `boundaries` is ignored in baseline mode; in
    /// bi-scale mode the first step always opens a chunk.
    pub fn run(&self, src: &[u32], tgt: &[u32], boundaries: &[bool]) -> Vec<RefStep> {
        let h = self.encode(src);
        let h1_bwd = &h[0][self.config.encoder_dim..];
        let mut s: Vec<f64> =
            self.linear("s_init", h1_bwd).iter().map(|v| v.tanh()).collect();
        let biscale = self.config.mode == Mode::Biscale;
        let mut p: Vec<f64> = if biscale {
            self.linear("p_init", h1_bwd).iter().map(|v| v.tanh()).collect()
        } else {
            Vec::new()
        };
        let mut minus_cache: Option<Vec<f64>> = None;
        let mut chunk_attention: Vec<f64> = Vec::new();

        let mut steps = Vec::with_capacity(tgt.len());
        for t in 0..tgt.len() {
            let y_prev = if t == 0 { self.config.bos_id } else { tgt[t - 1] };
            let e_prev = self.row("tgt_embed", y_prev as usize);
            if biscale {
                let gin = concat(&[&s, &e_prev]);
                let gate_logits = self.linear("gate", &gin);
                let boundary = t == 0 || boundaries[t];
                let (tag_log_probs, e_p) = if boundary {
                    let m_now = matvec(self.p("chunk_minus.w"), &gin);
                    let e_p = match &minus_cache {
                        Some(cache) => {
                            m_now.iter().zip(cache).map(|(a, b)| a - b).collect()
                        }
                        None => vec![0.0; self.config.chunk_embed_dim],
                    };
                    let query = match self.config.attention_scale {
                        AttScale::Chunk => &p,
                        AttScale::Word => &s,
                    };
                    let (pc, weights) = self.attention("chunk_attn", query, &h);
                    chunk_attention = weights;
                    let cin = concat(&[&e_p, &pc]);
                    p = self.gru("chunk_gru", &p, &cin);
                    let tin = concat(&[&p, &e_p, &pc]);
                    let tag_logits = self.readout("tag_readout", ReadoutKind::Tanh, &tin);
                    minus_cache = Some(m_now);
                    (Some(log_softmax(&tag_logits)), Some(e_p))
                } else {
                    (None, None)
                };
                let x = concat(&[&e_prev, &p]);
                s = self.gru("word_gru", &s, &x);
                let rin = concat(&[&e_prev, &s, &p]);
                let logits = self.readout("readout", self.config.readout, &rin);
                let g = log_softmax(&gate_logits);
                steps.push(RefStep {
                    s: s.clone(),
                    p: Some(p.clone()),
                    context: p.clone(),
                    attention: chunk_attention.clone(),
                    word_log_probs: log_softmax(&logits),
                    gate_log_probs: Some([g[0], g[1]]),
                    tag_log_probs,
                    e_p,
                    boundary,
                });
            } else {
                let (ctx, weights) = self.attention("word_attn", &s, &h);
                let x = concat(&[&e_prev, &ctx]);
                s = self.gru("word_gru", &s, &x);
                let rin = concat(&[&e_prev, &s, &ctx]);
                let logits = self.readout("readout", self.config.readout, &rin);
                steps.push(RefStep {
                    s: s.clone(),
                    p: None,
                    context: ctx,
                    attention: weights,
                    word_log_probs: log_softmax(&logits),
                    gate_log_probs: None,
                    tag_log_probs: None,
                    e_p: None,
                    boundary: false,
                });
            }
        }
        steps
    }
}

/// Synthetic corpus already encoded against its own vocabularies.
pub struct SynthData {
    pub examples: Vec<biscale::corpus::ParallelExample>,
    pub src_vocab: biscale::corpus::Vocab,
    pub tgt_vocab: biscale::corpus::Vocab,
    pub tag_vocab: biscale::corpus::TagVocab,
}

pub fn synth_data(cfg: &biscale::corpus::SynthConfig) -> SynthData {
    use biscale::corpus::{encode_example, generate_synthetic, TagVocab, Vocab};
    let corpus = generate_synthetic(cfg).unwrap();
    let src_vocab =
        Vocab::build(corpus.pairs.iter().map(|p| p.src.as_slice()), 30000).unwrap();
    let tgt_vocab =
        Vocab::build(corpus.pairs.iter().map(|p| p.tgt.tokens.as_slice()), 30000).unwrap();
    let tag_vocab = TagVocab::build(corpus.pairs.iter().map(|p| p.tgt.tags.as_slice()));
    let examples = corpus
        .pairs
        .iter()
        .map(|p| encode_example(p, &src_vocab, &tgt_vocab, &tag_vocab).unwrap())
        .collect();
    SynthData { examples, src_vocab, tgt_vocab, tag_vocab }
}

/// Model sized for the synthetic task: big enough to learn it, small
/// enough for test time.
pub fn synth_model_config(data: &SynthData, mode: Mode) -> ModelConfig {
    ModelConfig {
        mode,
        src_vocab: data.src_vocab.len(),
        tgt_vocab: data.tgt_vocab.len(),
        tag_vocab: data.tag_vocab.len(),
        embed_dim: 16,
        encoder_dim: 16,
        word_dim: 24,
        chunk_dim: 24,
        chunk_embed_dim: 12,
        attention_dim: 16,
        ..ModelConfig::default()
    }
}

/// Small model configuration for tests; dims are varied but tiny.
pub fn tiny_config(mode: Mode) -> ModelConfig {
    ModelConfig {
        mode,
        src_vocab: 11,
        tgt_vocab: 9,
        tag_vocab: 5,
        embed_dim: 5,
        encoder_dim: 4,
        word_dim: 6,
        chunk_dim: 5,
        chunk_embed_dim: 3,
        attention_dim: 4,
        ..ModelConfig::default()
    }
}
