use crate::error::{Error, Result};

/// Exponential decay from `lambda_start` at `e_i` to `lambda_end` at `e_f`:
/// `lambda_start * exp(alpha (e_c - e_i))` with
/// `alpha = -ln(lambda_start / lambda_end) / (e_f - e_i)`, evaluated in the
/// equivalent form `lambda_start^(1-f) lambda_end^f` so both endpoints are exact.
pub fn lambda_schedule(
    e_c: usize,
    e_i: usize,
    e_f: usize,
    lambda_start: f64,
    lambda_end: f64,
) -> Result<f64> {
    if e_i >= e_f {
        return Err(Error::domain(
            "lambda_schedule",
            format!("empty range [{e_i}, {e_f}]"),
        ));
    }
    if e_c < e_i || e_c > e_f {
        return Err(Error::domain(
            "lambda_schedule",
            format!("iteration {e_c} outside [{e_i}, {e_f}]"),
        ));
    }
    let f = (e_c - e_i) as f64 / (e_f - e_i) as f64;
    Ok(lambda_start.powf(1.0 - f) * lambda_end.powf(f))
}

/// `lr_start (lr_end / lr_start)^(e_c / e_f)`.
pub fn lr_schedule(e_c: usize, e_f: usize, lr_start: f64, lr_end: f64) -> Result<f64> {
    if e_c > e_f {
        return Err(Error::domain(
            "lr_schedule",
            format!("iteration {e_c} past {e_f}"),
        ));
    }
    if e_f == 0 {
        return Ok(lr_start);
    }
    let f = e_c as f64 / e_f as f64;
    Ok(lr_start.powf(1.0 - f) * lr_end.powf(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_endpoints_and_midpoint() {
        assert_eq!(lambda_schedule(1200, 1200, 20000, 0.9, 0.1).unwrap(), 0.9);
        assert_eq!(lambda_schedule(20000, 1200, 20000, 0.9, 0.1).unwrap(), 0.1);
        let mid = lambda_schedule(10600, 1200, 20000, 0.9, 0.1).unwrap();
        assert!((mid - (0.9f64 * 0.1).sqrt()).abs() < 1e-12);
        assert!((mid - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lambda_matches_the_alpha_form() {
        let (ei, ef) = (100, 1100);
        let alpha = -(0.9f64 / 0.1).ln() / (ef - ei) as f64;
        for ec in (ei..=ef).step_by(37) {
            let direct = 0.9 * (alpha * (ec - ei) as f64).exp();
            assert!((lambda_schedule(ec, ei, ef, 0.9, 0.1).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_is_monotone_and_continuous() {
        let vals: Vec<f64> = (0..=1000)
            .map(|e| lambda_schedule(e, 0, 1000, 0.9, 0.1).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0]);
            assert!(w[0] - w[1] < 0.01);
        }
    }

    #[test]
    fn degenerate_ranges_are_errors() {
        assert!(lambda_schedule(5, 5, 5, 0.9, 0.1).is_err());
        assert!(lambda_schedule(4, 5, 10, 0.9, 0.1).is_err());
        assert!(lr_schedule(11, 10, 5e-4, 8e-5).is_err());
    }

    #[test]
    fn lr_endpoints_and_midpoint() {
        assert_eq!(lr_schedule(0, 20000, 5e-4, 8e-5).unwrap(), 5e-4);
        assert_eq!(lr_schedule(20000, 20000, 5e-4, 8e-5).unwrap(), 8e-5);
        let mid = lr_schedule(10000, 20000, 5e-4, 8e-5).unwrap();
        assert!((mid - (5e-4f64 * 8e-5).sqrt()).abs() < 1e-18);
        assert!((mid - 2e-4).abs() < 1e-12);
    }
}
