use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle into a [`Params`] store. Only meaningful for the store that
/// issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    /// Dense position in registration order.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct Item<F: Scalar> {
    name: String,
    tensor: Tensor<F>,
}

/// Named trainable tensors with gradient buffers. Insertion order is fixed
/// and public: it drives checkpoint layout, flattening, and RNG consumption,
/// so registration must happen in a deterministic order.
#[derive(Debug)]
pub struct Params<F: Scalar> {
    items: Vec<Item<F>>,
}

impl<F: Scalar> Default for Params<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Params<F> {
    pub fn new() -> Self {
        Params { items: Vec::new() }
    }

    /// Registers a tensor and turns on its gradient. Names must be unique;
    /// a duplicate is a construction bug, not a runtime condition.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<F>) -> ParamId {
        let name = name.into();
        assert!(
            self.items.iter().all(|it| it.name != name),
            "duplicate parameter name {name:?}"
        );
        self.items.push(Item {
            name,
            tensor: tensor.with_grad(),
        });
        ParamId(self.items.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of scalar entries across all parameters.
    pub fn total_len(&self) -> usize {
        self.items.iter().map(|it| it.tensor.len()).sum()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.items[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.items[id.0].tensor
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.items[id.0].tensor
    }

    pub fn grad(&self, id: ParamId) -> &[F] {
        self.items[id.0].tensor.grad().expect("params always carry grads")
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.items.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<F>)> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| (ParamId(i), it.name.as_str(), &it.tensor))
    }

    pub fn zero_grads(&mut self) {
        for it in &mut self.items {
            it.tensor.zero_grad();
        }
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, delta: &[F]) {
        let g = self.items[id.0]
            .tensor
            .grad_mut()
            .expect("params always carry grads");
        debug_assert_eq!(g.len(), delta.len());
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi = *gi + *di;
        }
    }

    /// Values concatenated in registration order.
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.total_len());
        for it in &self.items {
            out.extend_from_slice(it.tensor.data());
        }
        out
    }

    /// Gradients concatenated in registration order.
    pub fn flatten_grads(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.total_len());
        for it in &self.items {
            out.extend_from_slice(it.tensor.grad().expect("params always carry grads"));
        }
        out
    }

    /// Overwrites all values from a flat buffer laid out like [`flatten`].
    pub fn assign_flat(&mut self, flat: &[F]) -> Result<()> {
        if flat.len() != self.total_len() {
            return Err(Error::LengthMismatch {
                what: "flat parameter buffer",
                lhs: flat.len(),
                rhs: self.total_len(),
            });
        }
        let mut off = 0;
        for it in &mut self.items {
            let n = it.tensor.len();
            it.tensor.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// L2 norm of the full gradient vector.
    pub fn grad_norm(&self) -> F {
        let mut acc = F::zero();
        for it in &self.items {
            for &g in it.tensor.grad().expect("params always carry grads") {
                acc = acc + g * g;
            }
        }
        acc.sqrt()
    }

    pub fn scale_grads(&mut self, k: F) {
        for it in &mut self.items {
            if let Some(g) = it.tensor.grad_mut() {
                for x in g.iter_mut() {
                    *x = *x * k;
                }
            }
        }
    }

    /// Per-parameter update hook for optimizers: `f(item_index, values, grads)`.
    pub fn update_each(&mut self, mut f: impl FnMut(usize, &mut [F], &[F])) {
        for (i, it) in self.items.iter_mut().enumerate() {
            // Split borrow: clone grad view is avoided by taking it out briefly.
            let grad = it.tensor.grad().expect("params always carry grads").to_vec();
            f(i, it.tensor.data_mut(), &grad);
        }
    }
}
