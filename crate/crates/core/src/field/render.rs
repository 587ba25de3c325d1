use super::network::FieldOutput;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RenderResult {
    /// Pre-tonemap color.
    pub color: [f64; 3],
    pub sample_weights: Vec<f64>,
    pub transmittance: Vec<f64>,
    /// Transmittance past the last sample.
    pub residual_transmittance: f64,
    pub expected_depth: f64,
}

/// `delta_i = t_{i+1} - t_i`, with the last interval running to `t_far`.
pub fn deltas(t: &[f64], t_far: f64) -> Result<Vec<f64>> {
    if t.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain(
            "volume_render",
            "sample positions are not sorted",
        ));
    }
    if let Some(&last) = t.last() {
        if !(last <= t_far) {
            return Err(Error::domain(
                "volume_render",
                format!("sample {last} beyond t_far {t_far}"),
            ));
        }
    }
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(&last) = t.last() {
        d.push(t_far - last);
    }
    Ok(d)
}

/// Alpha compositing of `(density, radiance)` samples at sorted positions `t`.
pub fn volume_render(t: &[f64], t_far: f64, outputs: &[FieldOutput]) -> Result<RenderResult> {
    if t.len() != outputs.len() {
        return Err(Error::ShapeMismatch {
            op: "volume_render",
            lhs: vec![t.len()],
            rhs: vec![outputs.len()],
        });
    }
    let delta = deltas(t, t_far)?;
    let n = t.len();
    let mut transmittance = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut color = [0.0; 3];
    let mut acc = 0.0f64;
    for i in 0..n {
        let a = outputs[i].density * delta[i];
        let ti = (-acc).exp();
        let wi = ti * (1.0 - (-a).exp());
        transmittance.push(ti);
        weights.push(wi);
        for c in 0..3 {
            color[c] += wi * outputs[i].radiance[c];
        }
        acc += a;
    }
    let wsum: f64 = weights.iter().sum();
    let depth = weights.iter().zip(t).map(|(w, t)| w * t).sum::<f64>() / wsum.max(1e-9);
    Ok(RenderResult {
        color,
        sample_weights: weights,
        transmittance,
        residual_transmittance: (-acc).exp(),
        expected_depth: depth,
    })
}

/// Tape version over batches: `density [..., N]`, `radiance [..., N, 3]`,
/// constant `delta [..., N]`. Returns `(color [..., 3], weights [..., N])`.
pub fn render_on_tape(
    tape: &mut Tape,
    density: Var,
    radiance: Var,
    delta: &Tensor,
) -> Result<(Var, Var)> {
    let axis = tape.shape(density).len() - 1;
    let d = tape.constant(delta.clone());
    let a = tape.mul(density, d)?;
    let acc = tape.cumsum_exclusive(a, axis)?;
    let neg = tape.neg(acc);
    let trans = tape.exp(neg);
    let na = tape.neg(a);
    let keep = tape.exp(na);
    let alpha = tape.affine(keep, -1.0, 1.0);
    let w = tape.mul(trans, alpha)?;
    let mut wshape = tape.shape(w).to_vec();
    wshape.push(1);
    let w3 = tape.reshape(w, wshape)?;
    let contrib = tape.mul(w3, radiance)?;
    let color = tape.sum_axis(contrib, axis, false)?;
    Ok((color, w))
}
