use super::config::ReadoutKind;
use crate::autodiff::{ParamId, Params, Scalar, Tape, Tensor, Var};
use crate::error::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Glorot-uniform matrix. All weights come through here so the random
/// stream is a pure function of registration order.
pub(crate) fn glorot<F: Scalar>(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
) -> Tensor<F> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| F::scalar_from_f64(rng.random_range(-limit..limit)))
        .collect();
    Tensor::matrix(rows, cols, data).expect("sized by construction")
}

/// Orthonormal square matrix for recurrent weights: Glorot draws consume the
/// same slice of the random stream, then modified Gram-Schmidt in f64 makes
/// the rows orthonormal so repeated application preserves gradient norm.
fn orthogonal<F: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Tensor<F> {
    let limit = (6.0 / (2 * n) as f64).sqrt();
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-limit..limit)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = (0..n).map(|k| rows[i][k] * rows[j][k]).sum();
            for k in 0..n {
                rows[i][k] -= dot * rows[j][k];
            }
        }
        let norm = (0..n).map(|k| rows[i][k] * rows[i][k]).sum::<f64>().sqrt();
        for k in 0..n {
            rows[i][k] /= norm;
        }
    }
    let data = rows
        .into_iter()
        .flatten()
        .map(F::scalar_from_f64)
        .collect();
    Tensor::matrix(n, n, data).expect("sized by construction")
}

fn glorot_vec<F: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Tensor<F> {
    let limit = (6.0 / (1 + n) as f64).sqrt();
    let data = (0..n)
        .map(|_| F::scalar_from_f64(rng.random_range(-limit..limit)))
        .collect();
    Tensor::vector(data)
}

fn zeros_vec<F: Scalar>(n: usize) -> Tensor<F> {
    Tensor::zeros(vec![n])
}

/// Gated recurrent unit: reset and update gates, candidate state.
///   r = sigmoid(Wr x + Ur h + br)
///   z = sigmoid(Wz x + Uz h + bz)
///   c = tanh(Wh x + Uh (r*h) + bh)
///   h' = (1 - z)*h + z*c
#[derive(Debug)]
pub(crate) struct GruIds {
    wr: ParamId,
    ur: ParamId,
    br: ParamId,
    wz: ParamId,
    uz: ParamId,
    bz: ParamId,
    wh: ParamId,
    uh: ParamId,
    bh: ParamId,
}

impl GruIds {
    pub fn new<F: Scalar>(
        params: &mut Params<F>,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> Self {
        let wr = params.add(format!("{prefix}.w_r"), glorot(rng, hidden, input));
        let ur = params.add(format!("{prefix}.u_r"), orthogonal(rng, hidden));
        let br = params.add(format!("{prefix}.b_r"), zeros_vec(hidden));
        let wz = params.add(format!("{prefix}.w_z"), glorot(rng, hidden, input));
        let uz = params.add(format!("{prefix}.u_z"), orthogonal(rng, hidden));
        let bz = params.add(format!("{prefix}.b_z"), zeros_vec(hidden));
        let wh = params.add(format!("{prefix}.w_h"), glorot(rng, hidden, input));
        let uh = params.add(format!("{prefix}.u_h"), orthogonal(rng, hidden));
        let bh = params.add(format!("{prefix}.b_h"), zeros_vec(hidden));
        GruIds {
            wr,
            ur,
            br,
            wz,
            uz,
            bz,
            wh,
            uh,
            bh,
        }
    }
}

#[derive(Debug)]
pub(crate) struct GruVars {
    wr: Var,
    ur: Var,
    br: Var,
    wz: Var,
    uz: Var,
    bz: Var,
    wh: Var,
    uh: Var,
    bh: Var,
}

impl GruVars {
    pub fn bind<F: Scalar>(ids: &GruIds, params: &Params<F>, tape: &mut Tape<F>) -> Self {
        GruVars {
            wr: tape.param(params, ids.wr),
            ur: tape.param(params, ids.ur),
            br: tape.param(params, ids.br),
            wz: tape.param(params, ids.wz),
            uz: tape.param(params, ids.uz),
            bz: tape.param(params, ids.bz),
            wh: tape.param(params, ids.wh),
            uh: tape.param(params, ids.uh),
            bh: tape.param(params, ids.bh),
        }
    }

    pub fn step<F: Scalar>(&self, tape: &mut Tape<F>, h: Var, x: Var) -> Result<Var> {
        let wrx = tape.matvec(self.wr, x)?;
        let urh = tape.matvec(self.ur, h)?;
        let r_pre = tape.add3(wrx, urh, self.br)?;
        let r = tape.sigmoid(r_pre);

        let wzx = tape.matvec(self.wz, x)?;
        let uzh = tape.matvec(self.uz, h)?;
        let z_pre = tape.add3(wzx, uzh, self.bz)?;
        let z = tape.sigmoid(z_pre);

        let rh = tape.mul(r, h)?;
        let whx = tape.matvec(self.wh, x)?;
        let uhr = tape.matvec(self.uh, rh)?;
        let c_pre = tape.add3(whx, uhr, self.bh)?;
        let c = tape.tanh(c_pre);

        // h' = h - z*h + z*c
        let zh = tape.mul(z, h)?;
        let zc = tape.mul(z, c)?;
        let keep = tape.sub(h, zh)?;
        tape.add(keep, zc)
    }
}

/// Additive attention over precomputed annotation projections:
///   score_j = v . tanh(U h_j + Q q)
///   weights = masked softmax(score), context = weights . H
#[derive(Debug)]
pub(crate) struct AttnIds {
    pub u: ParamId,
    q: ParamId,
    v: ParamId,
}

impl AttnIds {
    pub fn new<F: Scalar>(
        params: &mut Params<F>,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        ann_dim: usize,
        query_dim: usize,
        attn_dim: usize,
    ) -> Self {
        // U stored transposed [ann, attn] so the per-sentence projection is
        // one matmul over all positions.
        let u = params.add(format!("{prefix}.u"), glorot(rng, ann_dim, attn_dim));
        let q = params.add(format!("{prefix}.q"), glorot(rng, attn_dim, query_dim));
        let v = params.add(format!("{prefix}.v"), glorot_vec(rng, attn_dim));
        AttnIds { u, q, v }
    }
}

#[derive(Debug)]
pub(crate) struct AttnVars {
    pub u: Var,
    q: Var,
    v: Var,
}

impl AttnVars {
    pub fn bind<F: Scalar>(ids: &AttnIds, params: &Params<F>, tape: &mut Tape<F>) -> Self {
        AttnVars {
            u: tape.param(params, ids.u),
            q: tape.param(params, ids.q),
            v: tape.param(params, ids.v),
        }
    }

    /// `proj` is `H U` cached per sentence. Returns (context, weights).
    pub fn apply<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        query: Var,
        h: Var,
        proj: Var,
        mask: &[bool],
    ) -> Result<(Var, Var)> {
        let qs = tape.matvec(self.q, query)?;
        let pre = tape.add_row(proj, qs)?;
        let act = tape.tanh(pre);
        let scores = tape.matvec(act, self.v)?;
        let weights = tape.softmax_masked(scores, mask)?;
        let ctx = tape.vecmat(weights, h)?;
        Ok((ctx, weights))
    }
}

/// Two-layer readout: hidden tanh or maxout-over-pairs, then linear logits.
#[derive(Debug)]
pub(crate) struct ReadoutIds {
    hw: ParamId,
    hb: ParamId,
    ow: ParamId,
    ob: ParamId,
    kind: ReadoutKind,
}

impl ReadoutIds {
    pub fn new<F: Scalar>(
        params: &mut Params<F>,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        input: usize,
        hidden: usize,
        out: usize,
        kind: ReadoutKind,
    ) -> Self {
        // Maxout halves its preactivation, so produce two rows per unit.
        let pre = match kind {
            ReadoutKind::Tanh => hidden,
            ReadoutKind::Maxout => 2 * hidden,
        };
        let hw = params.add(format!("{prefix}.hidden_w"), glorot(rng, pre, input));
        let hb = params.add(format!("{prefix}.hidden_b"), zeros_vec(pre));
        let ow = params.add(format!("{prefix}.out_w"), glorot(rng, out, hidden));
        let ob = params.add(format!("{prefix}.out_b"), zeros_vec(out));
        ReadoutIds {
            hw,
            hb,
            ow,
            ob,
            kind,
        }
    }
}

#[derive(Debug)]
pub(crate) struct ReadoutVars {
    hw: Var,
    hb: Var,
    ow: Var,
    ob: Var,
    kind: ReadoutKind,
}

impl ReadoutVars {
    pub fn bind<F: Scalar>(ids: &ReadoutIds, params: &Params<F>, tape: &mut Tape<F>) -> Self {
        ReadoutVars {
            hw: tape.param(params, ids.hw),
            hb: tape.param(params, ids.hb),
            ow: tape.param(params, ids.ow),
            ob: tape.param(params, ids.ob),
            kind: ids.kind,
        }
    }

    pub fn apply<F: Scalar>(&self, tape: &mut Tape<F>, input: Var) -> Result<Var> {
        let pre = tape.affine(self.hw, input, self.hb)?;
        let hidden = match self.kind {
            ReadoutKind::Tanh => tape.tanh(pre),
            ReadoutKind::Maxout => tape.max_pairs(pre)?,
        };
        tape.affine(self.ow, hidden, self.ob)
    }
}

/// Plain affine map.
#[derive(Debug)]
pub(crate) struct LinearIds {
    w: ParamId,
    b: ParamId,
}

impl LinearIds {
    pub fn new<F: Scalar>(
        params: &mut Params<F>,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        rows: usize,
        cols: usize,
    ) -> Self {
        LinearIds {
            w: params.add(format!("{prefix}.w"), glorot(rng, rows, cols)),
            b: params.add(format!("{prefix}.b"), zeros_vec(rows)),
        }
    }
}

#[derive(Debug)]
pub(crate) struct LinearVars {
    w: Var,
    b: Var,
}

impl LinearVars {
    pub fn bind<F: Scalar>(ids: &LinearIds, params: &Params<F>, tape: &mut Tape<F>) -> Self {
        LinearVars {
            w: tape.param(params, ids.w),
            b: tape.param(params, ids.b),
        }
    }

    pub fn apply<F: Scalar>(&self, tape: &mut Tape<F>, x: Var) -> Result<Var> {
        tape.affine(self.w, x, self.b)
    }
}
