use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ray::Ray;

/// Probability mass added to every coarse bin before inverse-CDF sampling.
pub const PDF_FLOOR: f64 = 1e-5;

/// One sample per evenly spaced bin: `t_i = t_n + (i + u_i) (t_f - t_n) / N`
/// with each `u_i` in `[0, 1)`.
pub fn stratified_from_u(t_near: f64, t_far: f64, u: &[f64]) -> Vec<f64> {
    let step = (t_far - t_near) / u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &ui)| t_near + (i as f64 + ui) * step)
        .collect()
}

pub fn stratified_sample(ray: &Ray, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let u: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    stratified_from_u(ray.t_near, ray.t_far, &u)
}

/// Inverse-CDF resampling over the coarse bins of `[t_near, t_far]`.
///
/// The PDF is piecewise constant, proportional to `weights + PDF_FLOOR`.
/// `xi` jitters one stratum of the unit interval per output sample, so the
/// result is sorted. All-zero weights fall back to stratified sampling.
pub fn hierarchical_from_u(weights: &[f64], t_near: f64, t_far: f64, xi: &[f64]) -> Vec<f64> {
    let nf = xi.len();
    if nf == 0 {
        return Vec::new();
    }
    let nc = weights.len();
    if nc == 0 || weights.iter().all(|&w| w == 0.0) {
        return stratified_from_u(t_near, t_far, xi);
    }
    let step = (t_far - t_near) / nc as f64;
    let pdf: Vec<f64> = weights.iter().map(|&w| w.max(0.0) + PDF_FLOOR).collect();
    let total: f64 = pdf.iter().sum();
    let mut cdf = Vec::with_capacity(nc + 1);
    cdf.push(0.0);
    for p in &pdf {
        cdf.push(cdf.last().unwrap() + p / total);
    }
    let mut bin = 0;
    let mut out = Vec::with_capacity(nf);
    for (j, &x) in xi.iter().enumerate() {
        let u = (j as f64 + x) / nf as f64;
        while bin + 1 < nc && cdf[bin + 1] <= u {
            bin += 1;
        }
        let mass = cdf[bin + 1] - cdf[bin];
        let frac = ((u - cdf[bin]) / mass).clamp(0.0, 1.0);
        out.push(t_near + (bin as f64 + frac) * step);
    }
    out
}

pub fn hierarchical_sample(
    coarse_weights: &[f64],
    ray: &Ray,
    n_fine: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let xi: Vec<f64> = (0..n_fine).map(|_| rng.gen()).collect();
    hierarchical_from_u(coarse_weights, ray.t_near, ray.t_far, &xi)
}

/// Sorted union of two sorted sequences.
pub fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
