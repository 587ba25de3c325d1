//! Central finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Maximum over coordinates of `|analytic - numeric| / max(1, |analytic|)`
/// for a scalar function of one tensor.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), h)
}

/// Like [`grad_check`] but over several parameter tensors at once.
pub fn grad_check_many<F>(f: F, xs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::domain(
            "grad_check",
            format!("step must be positive, got {h}"),
        ));
    }
    let analytic = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let root = f(&mut tape, &vars)?;
        let grads = tape.backward(root)?;
        vars.iter()
            .map(|&v| grads.get(v).cloned().expect("leaf gradient"))
            .collect::<Vec<_>>()
    };

    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let root = f(&mut tape, &vars)?;
        let v = tape.value(root).item();
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "grad_check: f = {v} at a perturbed point"
            )));
        }
        Ok(v)
    };

    let mut work: Vec<Tensor> = xs.to_vec();
    let mut worst = 0.0f64;
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..xs[t].numel() {
            let x0 = xs[t].data()[i];
            work[t].data_mut()[i] = x0 + h;
            let plus = eval(&work)?;
            work[t].data_mut()[i] = x0 - h;
            let minus = eval(&work)?;
            work[t].data_mut()[i] = x0;
            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[i];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
