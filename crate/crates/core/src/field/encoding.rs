use crate::autodiff::fourier_row;

/// Frequencies used for sample positions.
pub const POS_FREQS: usize = 10;
/// Frequencies used for view directions.
pub const DIR_FREQS: usize = 4;

/// `(x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{m-1} pi x), cos(2^{m-1} pi x))`,
/// each block applied component-wise. Length `D + 2 D m`.
///
/// On a tape the same layout is produced by [`Tape::fourier_features`](crate::autodiff::Tape::fourier_features).
pub fn positional_encode(x: &[f64], m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * (1 + 2 * m));
    fourier_row(x, m, &mut out);
    out
}
