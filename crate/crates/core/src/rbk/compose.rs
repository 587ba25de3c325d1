use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Non-negative weights summing to one; index 0 belongs to the original ray.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionWeights {
    w: Vec<f64>,
}

impl CompositionWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::domain(
                "composition_weights",
                "weights must be finite and non-negative",
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::domain(
                "composition_weights",
                format!("weights sum to {sum}"),
            ));
        }
        Ok(CompositionWeights { w })
    }

    pub fn uniform(n: usize) -> Self {
        CompositionWeights {
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn one_hot(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        CompositionWeights { w }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `sum_i w_i colors[i]`.
pub fn compose(colors: &[[f64; 3]], w: &CompositionWeights) -> Result<[f64; 3]> {
    if colors.len() != w.len() {
        return Err(Error::ShapeMismatch {
            op: "compose",
            lhs: vec![colors.len(), 3],
            rhs: vec![w.len()],
        });
    }
    let mut out = [0.0; 3];
    for (c, &wi) in colors.iter().zip(w.as_slice()) {
        for k in 0..3 {
            out[k] += wi * c[k];
        }
    }
    Ok(out)
}

/// Composition with per-scene weights.
pub fn compose_coarse(colors: &[[f64; 3]], w: &CompositionWeights) -> Result<[f64; 3]> {
    compose(colors, w)
}

/// Composition with per-pixel weights.
pub fn compose_fine(colors: &[[f64; 3]], w: &CompositionWeights) -> Result<[f64; 3]> {
    compose(colors, w)
}

/// `colors [N_m, B, 3]`, `weights [B, N_m]` -> `[B, 3]`.
pub fn compose_on_tape(tape: &mut Tape, colors: Var, weights: Var) -> Result<Var> {
    let (nm, b) = (tape.shape(colors)[0], tape.shape(colors)[1]);
    if tape.shape(weights) != [b, nm] {
        return Err(Error::ShapeMismatch {
            op: "compose",
            lhs: tape.shape(colors).to_vec(),
            rhs: tape.shape(weights).to_vec(),
        });
    }
    let wt = tape.swap_axes(weights, 0, 1)?;
    let wt = tape.reshape(wt, vec![nm, b, 1])?;
    let prod = tape.mul(wt, colors)?;
    tape.sum_axis(prod, 0, false)
}
