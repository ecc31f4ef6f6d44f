//! Minimal reverse-mode automatic differentiation over dense vectors.
//!
//! Every node holds a flat `Vec<f64>`; matrices are row-major with an
//! explicit shape. A tape is built for one forward pass, differentiated once
//! with [`Tape::backward`] and dropped.

use super::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `m · x` with `m` of shape rows×cols.
    MatVec(Var, Var),
    /// `mᵀ · x`.
    MatTVec(Var, Var),
    /// Row `i` of a matrix.
    Row(Var, usize),
    Slice(Var, usize),
    Add(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    /// `softmax(scale · x)`.
    Softmax(Var, f64),
    /// `-log softmax(x)[target]`, a scalar.
    NegLogSoftmax(Var, usize),
    /// `ln(clamp(x, lo, hi))`; zero gradient where clamped.
    LnClamped(Var, f64, f64),
    Sum(Vec<Var>),
    Scale(Var, f64),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients indexed like the tape's nodes.
pub struct Grads(Vec<Vec<f64>>);

impl Grads {
    pub fn wrt(&self, v: Var) -> &[f64] {
        &self.0[v.0]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_scaled(x: &[f64], scale: f64) -> Vec<f64> {
    let max = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(scale * v));
    let mut out: Vec<f64> = x.iter().map(|&v| (scale * v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// A matrix leaf (parameters) or constant.
    pub fn matrix(&mut self, m: &Mat) -> Var {
        self.push(m.data.clone(), m.rows, m.cols, Op::Leaf)
    }

    pub fn vector(&mut self, v: Vec<f64>) -> Var {
        let n = v.len();
        self.push(v, n, 1, Op::Leaf)
    }

    pub fn matvec(&mut self, m: Var, x: Var) -> Var {
        let (rows, cols) = (self.nodes[m.0].rows, self.nodes[m.0].cols);
        let mv = &self.nodes[m.0].value;
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), cols, "matvec shape mismatch");
        let out = (0..rows)
            .map(|r| {
                mv[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(xv)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        self.push(out, rows, 1, Op::MatVec(m, x))
    }

    pub fn mat_t_vec(&mut self, m: Var, x: Var) -> Var {
        let (rows, cols) = (self.nodes[m.0].rows, self.nodes[m.0].cols);
        let mv = &self.nodes[m.0].value;
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), rows, "mat_t_vec shape mismatch");
        let mut out = vec![0.0; cols];
        for (r, &xr) in xv.iter().enumerate() {
            if xr != 0.0 {
                for (o, &a) in out.iter_mut().zip(&mv[r * cols..(r + 1) * cols]) {
                    *o += a * xr;
                }
            }
        }
        self.push(out, cols, 1, Op::MatTVec(m, x))
    }

    pub fn row(&mut self, m: Var, i: usize) -> Var {
        let cols = self.nodes[m.0].cols;
        let out = self.nodes[m.0].value[i * cols..(i + 1) * cols].to_vec();
        self.push(out, cols, 1, Op::Row(m, i))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.nodes[a.0].value[start..start + len].to_vec();
        self.push(out, len, 1, Op::Slice(a, start))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        let (r, c) = (self.nodes[a.0].rows, self.nodes[a.0].cols);
        self.push(out, r, c, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x * y);
        let (r, c) = (self.nodes[a.0].rows, self.nodes[a.0].cols);
        self.push(out, r, c, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        let (r, c) = (self.nodes[a.0].rows, self.nodes[a.0].cols);
        self.push(out, r, c, op)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn softmax(&mut self, a: Var, scale: f64) -> Var {
        let out = softmax_scaled(&self.nodes[a.0].value, scale);
        let n = out.len();
        self.push(out, n, 1, Op::Softmax(a, scale))
    }

    pub fn neg_log_softmax(&mut self, logits: Var, target: usize) -> Var {
        let x = &self.nodes[logits.0].value;
        let max = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let out = vec![lse - x[target]];
        self.push(out, 1, 1, Op::NegLogSoftmax(logits, target))
    }

    pub fn ln_clamped(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi).ln(), Op::LnClamped(a, lo, hi))
    }

    /// Sum of scalars.
    pub fn sum(&mut self, xs: Vec<Var>) -> Var {
        let total = xs.iter().map(|v| self.nodes[v.0].value[0]).sum();
        self.push(vec![total], 1, 1, Op::Sum(xs))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Grads {
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[output.0][0] = 1.0;

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            if g.iter().all(|&x| x == 0.0) {
                grads[i] = g;
                continue;
            }
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatVec(m, x) => {
                    let (rows, cols) = (self.nodes[m.0].rows, self.nodes[m.0].cols);
                    let mv = &self.nodes[m.0].value;
                    let xv = &self.nodes[x.0].value;
                    let gm = &mut grads[m.0];
                    for r in 0..rows {
                        if g[r] != 0.0 {
                            for c in 0..cols {
                                gm[r * cols + c] += g[r] * xv[c];
                            }
                        }
                    }
                    let gx = &mut grads[x.0];
                    for r in 0..rows {
                        if g[r] != 0.0 {
                            for c in 0..cols {
                                gx[c] += g[r] * mv[r * cols + c];
                            }
                        }
                    }
                }
                Op::MatTVec(m, x) => {
                    let (rows, cols) = (self.nodes[m.0].rows, self.nodes[m.0].cols);
                    let mv = &self.nodes[m.0].value;
                    let xv = &self.nodes[x.0].value;
                    let gm = &mut grads[m.0];
                    for r in 0..rows {
                        if xv[r] != 0.0 {
                            for c in 0..cols {
                                gm[r * cols + c] += xv[r] * g[c];
                            }
                        }
                    }
                    let gx = &mut grads[x.0];
                    for r in 0..rows {
                        gx[r] += (0..cols).map(|c| mv[r * cols + c] * g[c]).sum::<f64>();
                    }
                }
                Op::Row(m, r) => {
                    let cols = self.nodes[m.0].cols;
                    for (gm, &gv) in grads[m.0][r * cols..(r + 1) * cols].iter_mut().zip(&g) {
                        *gm += gv;
                    }
                }
                Op::Slice(a, start) => {
                    for (ga, &gv) in grads[a.0][*start..*start + g.len()].iter_mut().zip(&g) {
                        *ga += gv;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g, |gv, _| gv, &[]);
                    accumulate(&mut grads[b.0], &g, |gv, _| gv, &[]);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for k in 0..g.len() {
                        grads[a.0][k] += g[k] * bv[k];
                        grads[b.0][k] += g[k] * av[k];
                    }
                }
                Op::OneMinus(a) => accumulate(&mut grads[a.0], &g, |gv, _| -gv, &node.value),
                Op::Sigmoid(a) => {
                    accumulate(&mut grads[a.0], &g, |gv, y| gv * y * (1.0 - y), &node.value)
                }
                Op::Tanh(a) => {
                    accumulate(&mut grads[a.0], &g, |gv, y| gv * (1.0 - y * y), &node.value)
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], &g, |gv, _| c * gv, &node.value),
                Op::Softmax(a, scale) => {
                    let y = &node.value;
                    let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    for k in 0..y.len() {
                        grads[a.0][k] += scale * y[k] * (g[k] - dot);
                    }
                }
                Op::NegLogSoftmax(a, target) => {
                    let p = softmax_scaled(&self.nodes[a.0].value, 1.0);
                    for (k, pk) in p.iter().enumerate() {
                        let delta = if k == *target { 1.0 } else { 0.0 };
                        grads[a.0][k] += g[0] * (pk - delta);
                    }
                }
                Op::LnClamped(a, lo, hi) => {
                    let av = &self.nodes[a.0].value;
                    for k in 0..g.len() {
                        let x = av[k];
                        if x > *lo && x < *hi {
                            grads[a.0][k] += g[k] / x;
                        }
                    }
                }
                Op::Sum(xs) => {
                    for x in xs {
                        grads[x.0][0] += g[0];
                    }
                }
            }
            grads[i] = g;
        }
        Grads(grads)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "elementwise shape mismatch");
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn accumulate(target: &mut [f64], g: &[f64], f: impl Fn(f64, f64) -> f64, y: &[f64]) {
    for k in 0..g.len() {
        target[k] += f(g[k], y.get(k).copied().unwrap_or(0.0));
    }
}
