use super::image::Image;
use crate::error::{Error, Result};

const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum();
    Ok(s / a.data().len() as f64)
}

/// `10 log10(1 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    })
}

fn gaussian_window() -> [f64; WINDOW] {
    let c = (WINDOW / 2) as f64;
    let w: [f64; WINDOW] = std::array::from_fn(|i| {
        (-((i as f64 - c).powi(2)) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp()
    });
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Mean local SSIM over valid 11x11 Gaussian windows, averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::domain(
            "ssim",
            format!("image {w}x{h} is smaller than the {WINDOW}x{WINDOW} window"),
        ));
    }
    let g = gaussian_window();
    let (pa, pb) = (a.to_f64(), b.to_f64());
    let mut total = 0.0;
    let positions = (w - WINDOW + 1) * (h - WINDOW + 1);
    for ch in 0..3 {
        for y0 in 0..=h - WINDOW {
            for x0 in 0..=w - WINDOW {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (dy, gy) in g.iter().enumerate() {
                    for (dx, gx) in g.iter().enumerate() {
                        let i = (y0 + dy) * w + x0 + dx;
                        let (x, z, k) = (pa[i][ch], pb[i][ch], gy * gx);
                        ma += k * x;
                        mb += k * z;
                        saa += k * x * x;
                        sbb += k * z * z;
                        sab += k * x * z;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2))
                    / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            }
        }
    }
    Ok(total / (3 * positions) as f64)
}

/// Per-pixel channel-mean squared error.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMap {
    pub width: usize,
    pub height: usize,
    /// Scaled by the largest error to `[0, 1]`; all zeros when the images agree.
    pub scaled: Vec<f64>,
    /// Unscaled mean over pixels.
    pub mean: f64,
}

impl ErrorMap {
    /// Grayscale copy for writing as an image.
    pub fn to_image(&self) -> Image {
        let px: Vec<[f64; 3]> = self.scaled.iter().map(|&v| [v; 3]).collect();
        Image::from_f64(self.width, self.height, &px).expect("sized from the map")
    }
}

pub fn error_map(a: &Image, b: &Image) -> Result<ErrorMap> {
    a.same_shape(b)?;
    let per_pixel: Vec<f64> = a
        .pixels()
        .zip(b.pixels())
        .map(|(x, y)| {
            (0..3)
                .map(|c| (f64::from(x[c]) - f64::from(y[c])).powi(2))
                .sum::<f64>()
                / 3.0
        })
        .collect();
    let mean = per_pixel.iter().sum::<f64>() / per_pixel.len() as f64;
    let max = per_pixel.iter().cloned().fold(0.0, f64::max);
    let scaled = if max > 0.0 {
        per_pixel.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; per_pixel.len()]
    };
    Ok(ErrorMap {
        width: a.width(),
        height: a.height(),
        scaled,
        mean,
    })
}
