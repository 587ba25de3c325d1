//! Tensor-valued Wengert tape.
//!
//! Every primitive records its output value on the tape together with the
//! handles of its inputs. [`Tape::backward`] walks the nodes in reverse
//! insertion order, which is a topological order by construction.

use super::dual::Dual;
use super::kernels::{
    self, axis_split, broadcast_shapes, broadcast_strides, fourier_row, reduce_onto, Walk,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Smallest base used when differentiating `x^p` for `p < 1`, so the slope at
/// exactly zero stays finite.
pub const POW_GRAD_FLOOR: f64 = 1e-10;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine {
        x: Var,
        scale: f64,
    },
    Matmul {
        a: Var,
        b: Var,
        batched: bool,
    },
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Sin(Var),
    Cos(Var),
    PowConst {
        x: Var,
        p: f64,
    },
    SumAxis {
        x: Var,
        axis: usize,
    },
    MeanAxis {
        x: Var,
        axis: usize,
    },
    MaxAxis {
        x: Var,
        axis: usize,
        argmax: Vec<usize>,
    },
    SoftmaxAxis {
        x: Var,
        axis: usize,
    },
    Concat {
        xs: Vec<Var>,
        axis: usize,
    },
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    BroadcastTo(Var),
    Reshape(Var),
    SwapAxes {
        x: Var,
        a: usize,
        b: usize,
    },
    CumsumExclusive {
        x: Var,
        axis: usize,
    },
    GatherRows {
        table: Var,
        index: Vec<usize>,
    },
    MapRows {
        x: Var,
        jac: Vec<f64>,
        in_dim: usize,
        out_dim: usize,
    },
    Fourier {
        x: Var,
        freqs: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records primitive operations for reverse-mode differentiation.
///
/// A tape is single-owner: recording and [`backward`](Tape::backward) must
/// not be interleaved from several threads. Distinct tapes are independent.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every differentiable leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` is not a differentiable leaf.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::scalar(value))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    // ----- elementwise binary -----

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let value = if ta.shape() == tb.shape() {
            let data = ta
                .data()
                .iter()
                .zip(tb.data())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::from_parts(ta.shape().to_vec(), data)
        } else {
            let out =
                broadcast_shapes(ta.shape(), tb.shape()).ok_or_else(|| Error::ShapeMismatch {
                    op: name,
                    lhs: ta.shape().to_vec(),
                    rhs: tb.shape().to_vec(),
                })?;
            let walk = Walk::new(
                &out,
                &broadcast_strides(ta.shape(), &out),
                &broadcast_strides(tb.shape(), &out),
            );
            let n: usize = out.iter().product();
            let mut data = Vec::with_capacity(n);
            let (da, db) = (ta.data(), tb.data());
            walk.for_each_run(|_, ia, ib, n, sa, sb| match (sa, sb) {
                (1, 1) => data.extend(
                    da[ia..ia + n]
                        .iter()
                        .zip(&db[ib..ib + n])
                        .map(|(&x, &y)| f(x, y)),
                ),
                (1, 0) => {
                    let y = db[ib];
                    data.extend(da[ia..ia + n].iter().map(|&x| f(x, y)));
                }
                (0, 1) => {
                    let x = da[ia];
                    data.extend(db[ib..ib + n].iter().map(|&y| f(x, y)));
                }
                _ => data.extend((0..n).map(|j| f(da[ia + j * sa], db[ib + j * sb]))),
            });
            Tensor::from_parts(out, data)
        };
        Ok(self.push(value, op, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).data().iter().any(|&y| y == 0.0) {
            return Err(Error::domain("div", "division by zero"));
        }
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    // ----- elementwise unary -----

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).map(f);
        self.push(value, op, &[x])
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(x, |v| scale * v + shift, Op::Affine { x, scale })
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 0.0)
    }

    /// `max(x, 0)`; the subgradient at exactly zero is taken as 0.
    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::domain("log", format!("non-positive input {bad}")));
        }
        Ok(self.unary(x, f64::ln, Op::Log(x)))
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary(x, f64::sin, Op::Sin(x))
    }

    pub fn cos(&mut self, x: Var) -> Var {
        self.unary(x, f64::cos, Op::Cos(x))
    }

    pub fn pow_const(&mut self, x: Var, p: f64) -> Result<Var> {
        let integral = p.fract() == 0.0;
        for &v in self.value(x).data() {
            if v < 0.0 && !integral {
                return Err(Error::domain(
                    "pow_const",
                    format!("negative base {v} with exponent {p}"),
                ));
            }
            if v == 0.0 && p < 0.0 {
                return Err(Error::domain(
                    "pow_const",
                    format!("zero base with exponent {p}"),
                ));
            }
        }
        Ok(self.unary(x, |v| v.powf(p), Op::PowConst { x, p }))
    }

    // ----- linear algebra -----

    /// Matrix product.
    ///
    /// With a rank-2 right operand `[K, N]` the left operand may have any
    /// rank `[..., K]`; its leading dimensions are treated as rows. With two
    /// rank-3 operands `[B, M, K] x [B, K, N]` the product is batched.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            lhs: ta.shape().to_vec(),
            rhs: tb.shape().to_vec(),
        };
        let (sa, sb) = (ta.shape(), tb.shape());
        if sb.len() == 2 && !sa.is_empty() {
            let (k, n) = (sb[0], sb[1]);
            if *sa.last().unwrap() != k {
                return Err(mismatch());
            }
            let rows: usize = sa[..sa.len() - 1].iter().product();
            let mut out_shape = sa.to_vec();
            *out_shape.last_mut().unwrap() = n;
            let mut data = vec![0.0; rows * n];
            if k > 0 {
                kernels::gemm(rows, k, n, ta.data(), k, 1, tb.data(), n, 1, &mut data, 0.0);
            }
            let value = Tensor::from_parts(out_shape, data);
            Ok(self.push(
                value,
                Op::Matmul {
                    a,
                    b,
                    batched: false,
                },
                &[a, b],
            ))
        } else if sa.len() == 3 && sb.len() == 3 && sa[0] == sb[0] && sa[2] == sb[1] {
            let (bt, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
            let mut data = vec![0.0; bt * m * n];
            for i in 0..bt {
                kernels::gemm(
                    m,
                    k,
                    n,
                    &ta.data()[i * m * k..],
                    k,
                    1,
                    &tb.data()[i * k * n..],
                    n,
                    1,
                    &mut data[i * m * n..(i + 1) * m * n],
                    0.0,
                );
            }
            let value = Tensor::from_parts(vec![bt, m, n], data);
            Ok(self.push(
                value,
                Op::Matmul {
                    a,
                    b,
                    batched: true,
                },
                &[a, b],
            ))
        } else {
            Err(mismatch())
        }
    }

    // ----- reductions -----

    fn check_axis(&self, op: &'static str, x: Var, axis: usize) -> Result<()> {
        let rank = self.shape(x).len();
        if axis >= rank {
            return Err(Error::domain(
                op,
                format!("axis {axis} out of range for rank {rank}"),
            ));
        }
        Ok(())
    }

    fn reduced_shape(shape: &[usize], axis: usize, keepdim: bool) -> Vec<usize> {
        let mut s = shape.to_vec();
        if keepdim {
            s[axis] = 1;
        } else {
            s.remove(axis);
        }
        s
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize, keepdim: bool) -> Result<Var> {
        self.check_axis("sum_axis", x, axis)?;
        let t = self.value(x);
        let (outer, n, inner) = axis_split(t.shape(), axis);
        let mut data = vec![0.0; outer * inner];
        let src = t.data();
        for o in 0..outer {
            let dst = &mut data[o * inner..(o + 1) * inner];
            for a in 0..n {
                let row = &src[(o * n + a) * inner..(o * n + a + 1) * inner];
                for (d, s) in dst.iter_mut().zip(row) {
                    *d += s;
                }
            }
        }
        let shape = Self::reduced_shape(t.shape(), axis, keepdim);
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::SumAxis { x, axis },
            &[x],
        ))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize, keepdim: bool) -> Result<Var> {
        self.check_axis("mean_axis", x, axis)?;
        let n = self.shape(x)[axis];
        if n == 0 {
            return Err(Error::domain("mean_axis", "mean over an empty axis"));
        }
        let s = self.sum_axis(x, axis, keepdim)?;
        // Re-tag the node so the backward pass divides once.
        let node = self.nodes.last_mut().unwrap();
        for v in node.value.data_mut() {
            *v /= n as f64;
        }
        if node.requires_grad {
            node.op = Op::MeanAxis { x, axis };
        }
        Ok(s)
    }

    /// Sum of every element, as a rank-0 tensor.
    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        let flat = self.reshape(x, vec![n])?;
        self.sum_axis(flat, 0, false)
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        let flat = self.reshape(x, vec![n])?;
        self.mean_axis(flat, 0, false)
    }

    pub fn max_axis(&mut self, x: Var, axis: usize, keepdim: bool) -> Result<Var> {
        self.check_axis("max_axis", x, axis)?;
        let t = self.value(x);
        let (outer, n, inner) = axis_split(t.shape(), axis);
        if n == 0 {
            return Err(Error::domain("max_axis", "max over an empty axis"));
        }
        let src = t.data();
        let mut data = vec![f64::NEG_INFINITY; outer * inner];
        let mut argmax = vec![0usize; outer * inner];
        for o in 0..outer {
            for a in 0..n {
                for i in 0..inner {
                    let v = src[(o * n + a) * inner + i];
                    let k = o * inner + i;
                    if v > data[k] {
                        data[k] = v;
                        argmax[k] = a;
                    }
                }
            }
        }
        let shape = Self::reduced_shape(t.shape(), axis, keepdim);
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::MaxAxis { x, axis, argmax },
            &[x],
        ))
    }

    /// Softmax along `axis`, computed after subtracting the per-slice maximum.
    pub fn softmax_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_axis("softmax_axis", x, axis)?;
        let t = self.value(x);
        let (outer, n, inner) = axis_split(t.shape(), axis);
        let src = t.data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |a: usize| (o * n + a) * inner + i;
                let mut m = f64::NEG_INFINITY;
                for a in 0..n {
                    m = m.max(src[idx(a)]);
                }
                let mut z = 0.0;
                for a in 0..n {
                    let e = (src[idx(a)] - m).exp();
                    data[idx(a)] = e;
                    z += e;
                }
                for a in 0..n {
                    data[idx(a)] /= z;
                }
            }
        }
        let value = Tensor::from_parts(t.shape().to_vec(), data);
        Ok(self.push(value, Op::SoftmaxAxis { x, axis }, &[x]))
    }

    /// Exclusive prefix sum along `axis`: `out[j] = sum_{i<j} x[i]`.
    pub fn cumsum_exclusive(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_axis("cumsum_exclusive", x, axis)?;
        let t = self.value(x);
        let (outer, n, inner) = axis_split(t.shape(), axis);
        let src = t.data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for a in 1..n {
                let (prev, cur) = ((o * n + a - 1) * inner, (o * n + a) * inner);
                for i in 0..inner {
                    data[cur + i] = data[prev + i] + src[prev + i];
                }
            }
        }
        let value = Tensor::from_parts(t.shape().to_vec(), data);
        Ok(self.push(value, Op::CumsumExclusive { x, axis }, &[x]))
    }

    // ----- shape manipulation -----

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::domain("concat_axis", "no inputs"))?;
        self.check_axis("concat_axis", *first, axis)?;
        let base = self.shape(*first).to_vec();
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::ShapeMismatch {
                    op: "concat_axis",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut shape = base.clone();
        shape[axis] = total;
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::from_parts(shape, data);
        Ok(self.push(
            value,
            Op::Concat {
                xs: xs.to_vec(),
                axis,
            },
            xs,
        ))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.check_axis("slice", x, axis)?;
        let t = self.value(x);
        let (outer, n, inner) = axis_split(t.shape(), axis);
        if start + len > n {
            return Err(Error::domain(
                "slice",
                format!("range {start}..{} exceeds axis length {n}", start + len),
            ));
        }
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * n + start) * inner;
            data.extend_from_slice(&t.data()[from..from + len * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::Slice { x, axis, start },
            &[x],
        ))
    }

    pub fn broadcast_to(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let out = broadcast_shapes(t.shape(), shape);
        if out.as_deref() != Some(shape) {
            return Err(Error::ShapeMismatch {
                op: "broadcast",
                lhs: t.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let sa = broadcast_strides(t.shape(), shape);
        let walk = Walk::new(shape, &sa, &vec![0; shape.len()]);
        let mut data = vec![0.0; shape.iter().product()];
        let src = t.data();
        walk.for_each(|o, ia, _| data[o] = src[ia]);
        Ok(self.push(
            Tensor::from_parts(shape.to_vec(), data),
            Op::BroadcastTo(x),
            &[x],
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x);
        if shape.iter().product::<usize>() != t.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: t.shape().to_vec(),
                rhs: shape,
            });
        }
        let value = Tensor::from_parts(shape, t.data().to_vec());
        Ok(self.push(value, Op::Reshape(x), &[x]))
    }

    /// Exchanges two axes, materializing the result.
    pub fn swap_axes(&mut self, x: Var, a: usize, b: usize) -> Result<Var> {
        self.check_axis("swap_axes", x, a)?;
        self.check_axis("swap_axes", x, b)?;
        let t = self.value(x);
        let (out_shape, src_strides) = swapped_layout(t.shape(), a, b);
        let walk = Walk::new(&out_shape, &src_strides, &vec![0; out_shape.len()]);
        let src = t.data();
        let mut data = vec![0.0; src.len()];
        walk.for_each(|o, ia, _| data[o] = src[ia]);
        Ok(self.push(
            Tensor::from_parts(out_shape, data),
            Op::SwapAxes { x, a, b },
            &[x],
        ))
    }

    /// Selects rows of `table` (first axis) by index.
    pub fn gather_rows(&mut self, table: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.rank() == 0 {
            return Err(Error::domain(
                "gather_rows",
                "table must have at least one axis",
            ));
        }
        let rows = t.shape()[0];
        let width = t.numel() / rows.max(1);
        let mut data = Vec::with_capacity(index.len() * width);
        for &i in index {
            if i >= rows {
                return Err(Error::IndexOutOfRange {
                    what: "gather_rows",
                    index: i,
                    len: rows,
                });
            }
            data.extend_from_slice(&t.data()[i * width..(i + 1) * width]);
        }
        let mut shape = t.shape().to_vec();
        shape[0] = index.len();
        let op = Op::GatherRows {
            table,
            index: index.to_vec(),
        };
        Ok(self.push(Tensor::from_parts(shape, data), op, &[table]))
    }

    // ----- fused helpers -----

    /// Applies `f` independently to every row of the last axis (`I` wide) and
    /// records its exact Jacobian via forward-mode dual numbers.
    ///
    /// `f` receives the flat row index and the seeded row.
    pub fn map_rows<const I: usize, const O: usize>(
        &mut self,
        x: Var,
        f: impl Fn(usize, [Dual<I>; I]) -> [Dual<I>; O],
    ) -> Result<Var> {
        let t = self.value(x);
        if t.shape().last() != Some(&I) {
            return Err(Error::ShapeMismatch {
                op: "map_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![I],
            });
        }
        let rows = t.numel() / I;
        let mut data = Vec::with_capacity(rows * O);
        let mut jac = Vec::with_capacity(rows * O * I);
        for r in 0..rows {
            let row = &t.data()[r * I..(r + 1) * I];
            let seeded: [Dual<I>; I] = std::array::from_fn(|i| Dual::seed(row[i], i));
            let out = f(r, seeded);
            for d in &out {
                data.push(d.re);
                jac.extend_from_slice(&d.eps);
            }
        }
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = O;
        let op = Op::MapRows {
            x,
            jac,
            in_dim: I,
            out_dim: O,
        };
        Ok(self.push(Tensor::from_parts(shape, data), op, &[x]))
    }

    /// Sinusoidal encoding of the last axis: `(x, sin(2^0 pi x), cos(2^0 pi x), ...,
    /// sin(2^{m-1} pi x), cos(2^{m-1} pi x))`.
    pub fn fourier_features(&mut self, x: Var, freqs: usize) -> Result<Var> {
        let t = self.value(x);
        let d = *t.shape().last().ok_or_else(|| {
            Error::domain("fourier_features", "input must have at least one axis")
        })?;
        let width = d * (1 + 2 * freqs);
        let rows = if d == 0 { 0 } else { t.numel() / d };
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            fourier_row(&t.data()[r * d..(r + 1) * d], freqs, &mut data);
        }
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = width;
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::Fourier { x, freqs },
            &[x],
        ))
    }

    // ----- backward -----

    /// Reverse sweep from a rank-0 `root`.
    ///
    /// Every differentiable leaf receives an entry; leaves the root does not
    /// depend on get zeros. The tape itself is left untouched, so several
    /// roots recorded on one tape can be differentiated independently.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_shape = self.shape(root);
        if !root_shape.is_empty() {
            return Err(Error::NonScalarRoot(root_shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(vec![1.0]);
        }
        let mut out: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                let g = grads[i]
                    .take()
                    .unwrap_or_else(|| vec![0.0; node.value.numel()]);
                out[i] = Some(Tensor::from_parts(node.value.shape().to_vec(), g));
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        // Leaves recorded after the root cannot influence it.
        for (i, node) in self.nodes.iter().enumerate().skip(root.0 + 1) {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                out[i] = Some(Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        Ok(Gradients { grads: out })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => {
                for (a, b) in g.iter_mut().zip(contrib) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -1.0
                } else {
                    1.0
                };
                let out = node.value.shape();
                if self.wants(*a) {
                    let ga = reduce_onto(out, self.shape(*a), g, 1.0);
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let gb = reduce_onto(out, self.shape(*b), g, sign);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Mul(a, b) => {
                let (ga, gb) = self.binary_backward(node, *a, *b, g, |g, x, y| (g * y, g * x));
                self.accumulate_pair(grads, *a, ga, *b, gb);
            }
            Op::Div(a, b) => {
                let (ga, gb) =
                    self.binary_backward(node, *a, *b, g, |g, x, y| (g / y, -g * x / (y * y)));
                self.accumulate_pair(grads, *a, ga, *b, gb);
            }
            Op::Affine { x, scale } => {
                self.accumulate(grads, *x, g.iter().map(|v| v * scale).collect());
            }
            Op::Matmul { a, b, batched } => self.matmul_backward(*a, *b, *batched, g, grads),
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                let c = g
                    .iter()
                    .zip(xv)
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, c);
            }
            Op::Sigmoid(x) => {
                let c = g.iter().zip(y).map(|(&g, &s)| g * s * (1.0 - s)).collect();
                self.accumulate(grads, *x, c);
            }
            Op::Softplus(x) => {
                let xv = self.value(*x).data();
                let c = g.iter().zip(xv).map(|(&g, &x)| g * sigmoid(x)).collect();
                self.accumulate(grads, *x, c);
            }
            Op::Exp(x) => {
                let c = g.iter().zip(y).map(|(&g, &e)| g * e).collect();
                self.accumulate(grads, *x, c);
            }
            Op::Log(x) => {
                let xv = self.value(*x).data();
                let c = g.iter().zip(xv).map(|(&g, &x)| g / x).collect();
                self.accumulate(grads, *x, c);
            }
            Op::Sin(x) => {
                let xv = self.value(*x).data();
                let c = g.iter().zip(xv).map(|(&g, &x)| g * x.cos()).collect();
                self.accumulate(grads, *x, c);
            }
            Op::Cos(x) => {
                let xv = self.value(*x).data();
                let c = g.iter().zip(xv).map(|(&g, &x)| -g * x.sin()).collect();
                self.accumulate(grads, *x, c);
            }
            Op::PowConst { x, p } => {
                let xv = self.value(*x).data();
                let p = *p;
                let c = g
                    .iter()
                    .zip(xv)
                    .map(|(&g, &x)| {
                        let base = if p < 1.0 { x.max(POW_GRAD_FLOOR) } else { x };
                        g * p * base.powf(p - 1.0)
                    })
                    .collect();
                self.accumulate(grads, *x, c);
            }
            Op::SumAxis { x, axis } | Op::MeanAxis { x, axis } => {
                let shape = self.shape(*x);
                let (outer, n, inner) = axis_split(shape, *axis);
                let scale = if matches!(node.op, Op::MeanAxis { .. }) {
                    1.0 / n as f64
                } else {
                    1.0
                };
                let mut c = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    let src = &g[o * inner..(o + 1) * inner];
                    for a in 0..n {
                        let dst = &mut c[(o * n + a) * inner..(o * n + a + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = s * scale;
                        }
                    }
                }
                self.accumulate(grads, *x, c);
            }
            Op::MaxAxis { x, axis, argmax } => {
                let (outer, n, inner) = axis_split(self.shape(*x), *axis);
                let mut c = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let k = o * inner + i;
                        c[(o * n + argmax[k]) * inner + i] = g[k];
                    }
                }
                self.accumulate(grads, *x, c);
            }
            Op::SoftmaxAxis { x, axis } => {
                let (outer, n, inner) = axis_split(self.shape(*x), *axis);
                let mut c = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |a: usize| (o * n + a) * inner + i;
                        let dot: f64 = (0..n).map(|a| g[idx(a)] * y[idx(a)]).sum();
                        for a in 0..n {
                            c[idx(a)] = y[idx(a)] * (g[idx(a)] - dot);
                        }
                    }
                }
                self.accumulate(grads, *x, c);
            }
            Op::CumsumExclusive { x, axis } => {
                let (outer, n, inner) = axis_split(self.shape(*x), *axis);
                let mut c = vec![0.0; y.len()];
                for o in 0..outer {
                    for a in (0..n.saturating_sub(1)).rev() {
                        let (cur, next) = ((o * n + a) * inner, (o * n + a + 1) * inner);
                        for i in 0..inner {
                            c[cur + i] = c[next + i] + g[next + i];
                        }
                    }
                }
                self.accumulate(grads, *x, c);
            }
            Op::Concat { xs, axis } => {
                let shape = node.value.shape();
                let (outer, total, inner) = axis_split(shape, *axis);
                let mut offset = 0;
                for &v in xs {
                    let len = self.shape(v)[*axis];
                    if self.wants(v) {
                        let mut c = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let from = (o * total + offset) * inner;
                            c.extend_from_slice(&g[from..from + len * inner]);
                        }
                        self.accumulate(grads, v, c);
                    }
                    offset += len;
                }
            }
            Op::Slice { x, axis, start } => {
                let (outer, n, inner) = axis_split(self.shape(*x), *axis);
                let len = node.value.shape()[*axis];
                let mut c = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    let to = (o * n + start) * inner;
                    c[to..to + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                self.accumulate(grads, *x, c);
            }
            Op::BroadcastTo(x) => {
                let c = reduce_onto(node.value.shape(), self.shape(*x), g, 1.0);
                self.accumulate(grads, *x, c);
            }
            Op::Reshape(x) => self.accumulate(grads, *x, g.to_vec()),
            Op::SwapAxes { x, a, b } => {
                let (out_shape, src_strides) = swapped_layout(self.shape(*x), *a, *b);
                let walk = Walk::new(&out_shape, &src_strides, &vec![0; out_shape.len()]);
                let mut c = vec![0.0; g.len()];
                walk.for_each(|o, ia, _| c[ia] = g[o]);
                self.accumulate(grads, *x, c);
            }
            Op::GatherRows { table, index } => {
                let t = self.value(*table);
                let width = t.numel() / t.shape()[0].max(1);
                let mut c = vec![0.0; t.numel()];
                for (r, &i) in index.iter().enumerate() {
                    for (d, s) in c[i * width..(i + 1) * width]
                        .iter_mut()
                        .zip(&g[r * width..(r + 1) * width])
                    {
                        *d += s;
                    }
                }
                self.accumulate(grads, *table, c);
            }
            Op::MapRows {
                x,
                jac,
                in_dim,
                out_dim,
            } => {
                let rows = g.len() / out_dim;
                let mut c = vec![0.0; rows * in_dim];
                for r in 0..rows {
                    for o in 0..*out_dim {
                        let go = g[r * out_dim + o];
                        let jrow = &jac[(r * out_dim + o) * in_dim..(r * out_dim + o + 1) * in_dim];
                        for (dst, j) in c[r * in_dim..(r + 1) * in_dim].iter_mut().zip(jrow) {
                            *dst += go * j;
                        }
                    }
                }
                self.accumulate(grads, *x, c);
            }
            Op::Fourier { x, freqs } => {
                let n = self.value(*x).numel();
                let d = *self.shape(*x).last().unwrap();
                let width = d * (1 + 2 * freqs);
                let rows = if d == 0 { 0 } else { n / d };
                let mut c = vec![0.0; n];
                for r in 0..rows {
                    let gr = &g[r * width..(r + 1) * width];
                    let yr = &y[r * width..(r + 1) * width];
                    for j in 0..d {
                        let mut acc = gr[j];
                        for f in 0..*freqs {
                            let w = (1u64 << f) as f64 * std::f64::consts::PI;
                            let (is, ic) = (d + 2 * f * d + j, d + (2 * f + 1) * d + j);
                            acc += w * (gr[is] * yr[ic] - gr[ic] * yr[is]);
                        }
                        c[r * d + j] = acc;
                    }
                }
                self.accumulate(grads, *x, c);
            }
        }
    }

    fn accumulate_pair(
        &self,
        grads: &mut [Option<Vec<f64>>],
        a: Var,
        ga: Option<Vec<f64>>,
        b: Var,
        gb: Option<Vec<f64>>,
    ) {
        if let Some(ga) = ga {
            self.accumulate(grads, a, ga);
        }
        if let Some(gb) = gb {
            self.accumulate(grads, b, gb);
        }
    }

    /// Per-element partials reduced back onto (possibly broadcast) operands.
    fn binary_backward(
        &self,
        node: &Node,
        a: Var,
        b: Var,
        g: &[f64],
        partials: impl Fn(f64, f64, f64) -> (f64, f64),
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let (ta, tb) = (self.value(a), self.value(b));
        let (wa, wb) = (self.wants(a), self.wants(b));
        let (da, db) = (ta.data(), tb.data());
        let mut ga = if wa { vec![0.0; da.len()] } else { Vec::new() };
        let mut gb = if wb { vec![0.0; db.len()] } else { Vec::new() };
        if ta.shape() == tb.shape() {
            for o in 0..g.len() {
                let (pa, pb) = partials(g[o], da[o], db[o]);
                if wa {
                    ga[o] = pa;
                }
                if wb {
                    gb[o] = pb;
                }
            }
        } else {
            let out = node.value.shape();
            let walk = Walk::new(
                out,
                &broadcast_strides(ta.shape(), out),
                &broadcast_strides(tb.shape(), out),
            );
            walk.for_each(|o, ia, ib| {
                let (pa, pb) = partials(g[o], da[ia], db[ib]);
                if wa {
                    ga[ia] += pa;
                }
                if wb {
                    gb[ib] += pb;
                }
            });
        }
        (wa.then_some(ga), wb.then_some(gb))
    }

    fn matmul_backward(
        &self,
        a: Var,
        b: Var,
        batched: bool,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let (ta, tb) = (self.value(a), self.value(b));
        if !batched {
            let (k, n) = (tb.shape()[0], tb.shape()[1]);
            let rows: usize = ta.shape()[..ta.rank() - 1].iter().product();
            if self.wants(a) {
                // dA = G B^T
                let mut c = vec![0.0; rows * k];
                kernels::gemm(rows, n, k, g, n, 1, tb.data(), 1, n, &mut c, 0.0);
                self.accumulate(grads, a, c);
            }
            if self.wants(b) {
                // dB = A^T G
                let mut c = vec![0.0; k * n];
                kernels::gemm(k, rows, n, ta.data(), 1, k, g, n, 1, &mut c, 0.0);
                self.accumulate(grads, b, c);
            }
        } else {
            let (bt, m, k, n) = (ta.shape()[0], ta.shape()[1], ta.shape()[2], tb.shape()[2]);
            if self.wants(a) {
                let mut c = vec![0.0; bt * m * k];
                for i in 0..bt {
                    kernels::gemm(
                        m,
                        n,
                        k,
                        &g[i * m * n..],
                        n,
                        1,
                        &tb.data()[i * k * n..],
                        1,
                        n,
                        &mut c[i * m * k..(i + 1) * m * k],
                        0.0,
                    );
                }
                self.accumulate(grads, a, c);
            }
            if self.wants(b) {
                let mut c = vec![0.0; bt * k * n];
                for i in 0..bt {
                    kernels::gemm(
                        k,
                        m,
                        n,
                        &ta.data()[i * m * k..],
                        1,
                        k,
                        &g[i * m * n..],
                        n,
                        1,
                        &mut c[i * k * n..(i + 1) * k * n],
                        0.0,
                    );
                }
                self.accumulate(grads, b, c);
            }
        }
    }
}

/// Output shape after swapping axes `a` and `b`, and the source strides to
/// read it in output order.
fn swapped_layout(shape: &[usize], a: usize, b: usize) -> (Vec<usize>, Vec<usize>) {
    let mut out = shape.to_vec();
    out.swap(a, b);
    let mut strides = kernels::contiguous_strides(shape);
    strides.swap(a, b);
    (out, strides)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
