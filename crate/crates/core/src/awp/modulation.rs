use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Transmittance-style reduction of per-sample features `zeta [..., N_s, C]`
/// with sample spacings `delta [..., N_s]`:
/// `eta = sum_l exp(-sum_{m<l} delta_m zeta_m) (1 - exp(-delta_l zeta_l)) zeta_l`,
/// all per channel. Returns `[..., C]`.
pub fn feature_modulation(tape: &mut Tape, zeta: Var, delta: &Tensor) -> Result<Var> {
    if let Some(bad) = delta.data().iter().find(|&&d| !(d >= 0.0)) {
        return Err(Error::domain(
            "feature_modulation",
            format!("negative spacing {bad}"),
        ));
    }
    let mut dshape = delta.shape().to_vec();
    dshape.push(1);
    let d = tape.constant(delta.clone().reshape(dshape)?);
    let a = tape.mul(d, zeta)?;
    let axis = tape.shape(zeta).len() - 2;
    let acc = tape.cumsum_exclusive(a, axis)?;
    let nacc = tape.neg(acc);
    let trans = tape.exp(nacc);
    let na = tape.neg(a);
    let keep = tape.exp(na);
    let alpha = tape.affine(keep, -1.0, 1.0);
    let w = tape.mul(trans, alpha)?;
    let term = tape.mul(w, zeta)?;
    tape.sum_axis(term, axis, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(zeta: Vec<f64>, ns: usize, c: usize, delta: Vec<f64>) -> Vec<f64> {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::new(vec![1, ns, c], zeta).unwrap());
        let d = Tensor::new(vec![1, ns], delta).unwrap();
        let eta = feature_modulation(&mut tape, z, &d).unwrap();
        tape.value(eta).data().to_vec()
    }

    #[test]
    fn single_sample_closed_form() {
        let z = vec![0.4, 1.3, 0.0];
        let eta = run(z.clone(), 1, 3, vec![0.7]);
        for (e, zz) in eta.iter().zip(&z) {
            assert_eq!(*e, (1.0 - (-0.7 * zz).exp()) * zz);
        }
    }

    #[test]
    fn zero_features_give_zero() {
        assert!(run(vec![0.0; 8], 4, 2, vec![0.1, 0.2, 0.3, 0.4])
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn negative_spacing_is_rejected() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(vec![1, 2, 1]));
        let d = Tensor::new(vec![1, 2], vec![0.1, -0.1]).unwrap();
        assert!(feature_modulation(&mut tape, z, &d).is_err());
    }
}
