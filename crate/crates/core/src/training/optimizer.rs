use crate::autodiff::{Params, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adadelta,
}

/// Plain SGD or Adadelta. Adadelta keeps decaying averages of squared
/// gradients and squared updates; `lr` is the usual step size for SGD and a
/// final multiplier (normally 1.0) for Adadelta.
pub struct Optimizer<F: Scalar> {
    kind: OptimizerKind,
    rho: F,
    eps: F,
    acc_grad: Vec<Vec<F>>,
    acc_update: Vec<Vec<F>>,
}

impl<F: Scalar> Optimizer<F> {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            rho: F::scalar_from_f64(0.95),
            eps: F::scalar_from_f64(1e-6),
            acc_grad: Vec::new(),
            acc_update: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, params: &mut Params<F>, lr: f64) {
        let lr = F::scalar_from_f64(lr);
        match self.kind {
            OptimizerKind::Sgd => {
                params.update_each(|_, x, g| {
                    for (xi, gi) in x.iter_mut().zip(g) {
                        *xi = *xi - lr * *gi;
                    }
                });
            }
            OptimizerKind::Adadelta => {
                let (rho, eps) = (self.rho, self.eps);
                let one_m_rho = F::one() - rho;
                let acc_grad = &mut self.acc_grad;
                let acc_update = &mut self.acc_update;
                params.update_each(|i, x, g| {
                    while acc_grad.len() <= i {
                        acc_grad.push(Vec::new());
                        acc_update.push(Vec::new());
                    }
                    if acc_grad[i].len() != x.len() {
                        acc_grad[i] = vec![F::zero(); x.len()];
                        acc_update[i] = vec![F::zero(); x.len()];
                    }
                    let (ag, au) = (&mut acc_grad[i], &mut acc_update[i]);
                    for k in 0..x.len() {
                        let gk = g[k];
                        ag[k] = rho * ag[k] + one_m_rho * gk * gk;
                        let dx = -((au[k] + eps) / (ag[k] + eps)).sqrt() * gk;
                        au[k] = rho * au[k] + one_m_rho * dx * dx;
                        x[k] = x[k] + lr * dx;
                    }
                });
            }
        }
    }
}
