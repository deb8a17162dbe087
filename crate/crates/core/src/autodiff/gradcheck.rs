use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Central finite difference of `f` at `point`, one coordinate at a time.
pub fn central_difference(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    point: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x)?;
        x[i] = orig - h;
        let fm = f(&x)?;
        x[i] = orig;
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

/// Worst relative disagreement, with a floor so that near-zero pairs
/// compare absolutely: `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(1e-8);
        let err = (a - n).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}

/// Checks the tape gradient of a scalar-valued function of one vector input
/// against central differences. `build` must construct the same computation
/// for any input placed at its `Var`; returns the max relative error.
///
/// Runs in f64 only: at f32 the difference quotient drowns in roundoff.
pub fn grad_check(
    build: impl Fn(&mut Tape<f64>, Var) -> Result<Var>,
    point: &[f64],
    h: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(point.to_vec()));
    let loss = build(&mut tape, x)?;
    tape.backward(loss)?;
    let analytic = tape
        .grad(x)
        .expect("input participates in the loss")
        .to_vec();

    let numeric = central_difference(
        |p| {
            let mut t = Tape::new();
            let v = t.leaf(Tensor::vector(p.to_vec()));
            let l = build(&mut t, v)?;
            Ok(t.value(l).item())
        },
        point,
        h,
    )?;

    Ok(max_relative_error(&analytic, &numeric))
}
