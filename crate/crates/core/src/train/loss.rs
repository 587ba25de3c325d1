use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

fn mse(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| (0..3).map(move |c| (x[c] - y[c]).powi(2)))
        .sum();
    s / (3 * a.len()) as f64
}

/// `lambda MSE(B, B_hat) + (1 - lambda) MSE(B, B_tilde)`, averaged over rays and channels.
pub fn reconstruction_loss(
    target: &[[f64; 3]],
    b_hat: &[[f64; 3]],
    b_tilde: &[[f64; 3]],
    lambda: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(
            "reconstruction_loss",
            format!("lambda {lambda} outside [0, 1]"),
        ));
    }
    if target.len() != b_hat.len() || target.len() != b_tilde.len() || target.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "reconstruction_loss",
            lhs: vec![target.len()],
            rhs: vec![b_hat.len(), b_tilde.len()],
        });
    }
    Ok(lambda * mse(target, b_hat) + (1.0 - lambda) * mse(target, b_tilde))
}

/// Mean squared difference between `pred` and a constant target of the same shape.
pub fn mse_on_tape(tape: &mut Tape, pred: Var, target: &Tensor) -> Result<Var> {
    let t = tape.constant(target.clone());
    let d = tape.sub(pred, t)?;
    let sq = tape.mul(d, d)?;
    tape.mean_all(sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let b = [[0.2, 0.4, 0.6]];
        assert_eq!(reconstruction_loss(&b, &b, &b, 0.3).unwrap(), 0.0);
        let l =
            reconstruction_loss(&[[1.0, 0.0, 0.0]], &[[0.0; 3]], &[[1.0, 1.0, 0.0]], 0.5).unwrap();
        assert!((l - 1.0 / 3.0).abs() < 1e-15);
        let a = reconstruction_loss(&b, &[[0.0; 3]], &[[5.0; 3]], 1.0).unwrap();
        let c = reconstruction_loss(&b, &[[0.0; 3]], &[[-9.0; 3]], 1.0).unwrap();
        assert_eq!(a, c);
        assert!(reconstruction_loss(&b, &b, &b, 1.5).is_err());
    }

    #[test]
    fn lambda_one_cuts_the_awp_gradient() {
        let mut tape = Tape::new();
        let target = Tensor::new(vec![1, 3], vec![0.2, 0.4, 0.6]).unwrap();
        let hat = tape.param(Tensor::new(vec![1, 3], vec![0.1, 0.1, 0.1]).unwrap());
        let tilde = tape.param(Tensor::new(vec![1, 3], vec![0.9, 0.3, 0.3]).unwrap());
        let a = mse_on_tape(&mut tape, hat, &target).unwrap();
        let b = mse_on_tape(&mut tape, tilde, &target).unwrap();
        let a = tape.affine(a, 1.0, 0.0);
        let b = tape.affine(b, 0.0, 0.0);
        let l = tape.add(a, b).unwrap();
        let g = tape.backward(l).unwrap();
        assert!(g.get(tilde).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.get(hat).unwrap().data().iter().all(|&v| v != 0.0));
    }

    #[test]
    fn tape_mse_matches_plain() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::new(vec![2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let t = Tensor::new(vec![2, 3], vec![0.0, 0.2, 0.5, 0.4, 0.1, 0.6]).unwrap();
        let m = mse_on_tape(&mut tape, p, &t).unwrap();
        let want = mse(
            &[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]],
            &[[0.0, 0.2, 0.5], [0.4, 0.1, 0.6]],
        );
        assert!((tape.value(m).item() - want).abs() < 1e-16);
    }
}
