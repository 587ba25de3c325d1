//! Named parameter storage and the dense layers built on it.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Ordered, named collection of every learnable tensor in a model.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter {name}"
        );
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Replaces every value from `(name, tensor)` records, which must match
    /// this store's names and shapes exactly.
    pub fn assign(&mut self, records: Vec<(String, Tensor)>) -> Result<()> {
        if records.len() != self.values.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, found {}",
                self.values.len(),
                records.len()
            )));
        }
        for (name, t) in records {
            let i = *self
                .index
                .get(&name)
                .ok_or_else(|| Error::Config(format!("unknown parameter {name}")))?;
            if t.shape() != self.values[i].shape() {
                return Err(Error::ShapeMismatch {
                    op: "assign",
                    lhs: self.values[i].shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            self.values[i] = t;
        }
        Ok(())
    }

    /// Records every parameter on `tape`, differentiable when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .values
            .iter()
            .map(|v| tape.leaf(v.clone(), trainable))
            .collect();
        Bound { vars }
    }
}

/// Tape handles for a [`ParamStore`] recorded by [`ParamStore::bind`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Points `id` at another tape variable.
    pub fn replace(&mut self, id: ParamId, var: Var) {
        self.vars[id.0] = var;
    }

    /// Gradients in store order; parameters absent from the graph get zeros.
    pub fn collect(&self, grads: &Gradients, store: &ParamStore) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(store.values())
            .map(|(&v, p)| {
                grads
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(p.shape().to_vec()))
            })
            .collect()
    }
}

/// `U(-a, a)` tensor.
pub fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, a: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-a..=a)).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

/// `sigmoid(x) / sum(sigmoid(x))` over the last axis, evaluated as a softmax
/// of log-sigmoids so saturated scores cannot empty the denominator.
pub fn normalized_sigmoid(tape: &mut Tape, x: Var) -> Result<Var> {
    let axis = tape.shape(x).len() - 1;
    let nx = tape.neg(x);
    let sp = tape.softplus(nx);
    let log_s = tape.neg(sp);
    tape.softmax_axis(log_s, axis)
}

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let a = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self::with_init(store, name, fan_in, fan_out, rng, a, a)
    }

    pub fn with_init(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
        weight_bound: f64,
        bias_bound: f64,
    ) -> Self {
        let w = store.add(
            format!("{name}.w"),
            uniform(rng, vec![fan_in, fan_out], weight_bound),
        );
        let b = store.add(format!("{name}.b"), uniform(rng, vec![fan_out], bias_bound));
        Linear {
            w,
            b,
            fan_in,
            fan_out,
        }
    }

    /// `x W + b` over the last axis of `x`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let h = tape.matmul(x, p.var(self.w))?;
        tape.add(h, p.var(self.b))
    }
}

/// Stack of [`Linear`] layers with relu between them.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    /// Apply relu after the final layer too.
    pub relu_out: bool,
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        relu_out: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers, relu_out }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, p, h)?;
            if i < last || self.relu_out {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}
