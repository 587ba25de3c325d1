use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

pub const GAMMA: f64 = 2.2;

/// `g(c) = c^(1/2.2)` per component.
pub fn tone_map(c: [f64; 3]) -> Result<[f64; 3]> {
    if let Some(bad) = c.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::domain(
            "tone_map",
            format!("negative or NaN component {bad}"),
        ));
    }
    Ok(c.map(|v| v.powf(1.0 / GAMMA)))
}

pub fn tone_map_tape(tape: &mut Tape, x: Var) -> Result<Var> {
    tape.pow_const(x, 1.0 / GAMMA)
}
