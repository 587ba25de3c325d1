//! Low-level loops shared by the tape's forward and backward passes.

/// Right-aligned broadcast of two shapes.
pub(crate) fn broadcast_shapes(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let da = dim_aligned(a, i, n);
        let db = dim_aligned(b, i, n);
        *o = if da == db {
            da
        } else if da == 1 {
            db
        } else if db == 1 {
            da
        } else {
            return None;
        };
    }
    Some(out)
}

fn dim_aligned(shape: &[usize], i: usize, n: usize) -> usize {
    let offset = n - shape.len();
    if i < offset {
        1
    } else {
        shape[i - offset]
    }
}

/// Strides of `shape` laid out over `out`, zero along broadcast dimensions.
pub(crate) fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let n = out.len();
    let offset = n - shape.len();
    let mut strides = vec![0; n];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        strides[i + offset] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// A coalesced iteration space over an output with two strided operands.
pub(crate) struct Walk {
    dims: Vec<usize>,
    sa: Vec<usize>,
    sb: Vec<usize>,
}

impl Walk {
    pub(crate) fn new(out: &[usize], sa: &[usize], sb: &[usize]) -> Walk {
        let mut dims: Vec<usize> = Vec::new();
        let mut ra: Vec<usize> = Vec::new();
        let mut rb: Vec<usize> = Vec::new();
        // Walk from the innermost dimension outward, merging contiguous runs.
        for i in (0..out.len()).rev() {
            let d = out[i];
            if d == 1 {
                continue;
            }
            if let Some(&inner) = dims.last() {
                let last = dims.len() - 1;
                if sa[i] == ra[last] * inner && sb[i] == rb[last] * inner {
                    dims[last] *= d;
                    continue;
                }
            }
            dims.push(d);
            ra.push(sa[i]);
            rb.push(sb[i]);
        }
        dims.reverse();
        ra.reverse();
        rb.reverse();
        Walk {
            dims,
            sa: ra,
            sb: rb,
        }
    }

    /// Calls `f(out_index, a_index, b_index)` for every output element in row-major order.
    #[inline]
    pub(crate) fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        self.for_each_run(|o, ia, ib, n, sa, sb| {
            for j in 0..n {
                f(o + j, ia + j * sa, ib + j * sb);
            }
        });
    }

    /// Calls `f(out_start, a_start, b_start, len, a_step, b_step)` for each
    /// innermost run, in row-major order. Output runs are contiguous.
    #[inline]
    pub(crate) fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize, usize, usize, usize)) {
        let rank = self.dims.len();
        if rank == 0 {
            f(0, 0, 0, 1, 0, 0);
            return;
        }
        let inner = self.dims[rank - 1];
        let ia_step = self.sa[rank - 1];
        let ib_step = self.sb[rank - 1];
        let outer: usize = self.dims[..rank - 1].iter().product();
        let mut counter = vec![0usize; rank - 1];
        let (mut base_a, mut base_b) = (0usize, 0usize);
        let mut o = 0;
        for _ in 0..outer {
            f(o, base_a, base_b, inner, ia_step, ib_step);
            o += inner;
            // odometer over the outer dimensions
            let mut d = rank - 1;
            while d > 0 {
                d -= 1;
                counter[d] += 1;
                base_a += self.sa[d];
                base_b += self.sb[d];
                if counter[d] < self.dims[d] {
                    break;
                }
                base_a -= self.sa[d] * self.dims[d];
                base_b -= self.sb[d] * self.dims[d];
                counter[d] = 0;
            }
        }
    }
}

/// Sums `scale * g` (shaped `out`) back onto an operand of shape `shape`
/// that was broadcast to `out`.
pub(crate) fn reduce_onto(out: &[usize], shape: &[usize], g: &[f64], scale: f64) -> Vec<f64> {
    if out == shape {
        return if scale == 1.0 {
            g.to_vec()
        } else {
            g.iter().map(|v| scale * v).collect()
        };
    }
    let mut c = vec![0.0; shape.iter().product()];
    let walk = Walk::new(out, &broadcast_strides(shape, out), &vec![0; out.len()]);
    walk.for_each_run(|o, ia, _, n, sa, _| match sa {
        1 => {
            for (d, v) in c[ia..ia + n].iter_mut().zip(&g[o..o + n]) {
                *d += scale * v;
            }
        }
        0 => {
            let mut acc = c[ia];
            for v in &g[o..o + n] {
                acc += scale * v;
            }
            c[ia] = acc;
        }
        _ => {
            for j in 0..n {
                c[ia + j * sa] += scale * g[o + j];
            }
        }
    });
    c
}

/// Appends `x` followed by `sin(2^f pi x)` and `cos(2^f pi x)` blocks for
/// `f < freqs`. Higher frequencies come from the double-angle identities.
pub(crate) fn fourier_row(x: &[f64], freqs: usize, out: &mut Vec<f64>) {
    let d = x.len();
    out.extend_from_slice(x);
    if freqs == 0 {
        return;
    }
    let mut prev = out.len();
    for &v in x {
        out.push((std::f64::consts::PI * v).sin());
    }
    for &v in x {
        out.push((std::f64::consts::PI * v).cos());
    }
    for _ in 1..freqs {
        for j in 0..d {
            let (s, c) = (out[prev + j], out[prev + d + j]);
            out.push(2.0 * s * c);
        }
        for j in 0..d {
            let (s, c) = (out[prev + j], out[prev + d + j]);
            out.push((c - s) * (c + s));
        }
        prev += 2 * d;
    }
}

/// Splits a shape into `(outer, axis_len, inner)` around `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Row-major strides of a contiguous shape.
pub(crate) fn contiguous_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        strides[i] = acc;
        acc *= shape[i];
    }
    strides
}

/// `c = alpha * a * b + beta * c` with arbitrary element strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!(c.len() >= m * n);
    // SAFETY: the debug assertions above describe the bounds the caller guarantees;
    // every call site derives the strides from the operand shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
