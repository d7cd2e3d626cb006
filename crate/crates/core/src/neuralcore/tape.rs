//! Reverse-mode differentiation over a linear record of primitive ops.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec { w: Var, x: Var },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    MaxPool { inputs: Vec<Var>, argmax: Vec<usize> },
    SoftmaxXent { logits: Var, target: usize, probs: Vec<f64> },
    Sum(Vec<Var>),
    SumSquares(Var),
    Scale(Var, f64),
    Mask(Var, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Single-owner computation record. Ops are appended in evaluation order and
/// [`Tape::backward`] walks them in exact reverse.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// `None` when the value did not influence the output.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient as a tensor of the value's shape, zeros when untouched.
    pub fn tensor(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match self.get(v) {
            Some(g) => Tensor::new(shape, g.to_vec()).expect("gradient shape"),
            None => Tensor::zeros(&shape),
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
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

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// `W x` for a `[rows, cols]` matrix and a `[cols]` vector.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.shape().len() != 2 || !xt.is_vector() || wt.cols() != xt.len() {
            return Err(shape_err("matvec", wt, xt));
        }
        let (rows, cols) = (wt.rows(), wt.cols());
        let xd = xt.data();
        let out: Vec<f64> = (0..rows)
            .map(|r| {
                wt.data()[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(xd)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec { w, x }))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape() != bt.shape() {
            return Err(shape_err(op, at, bt));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (at, bt) = (self.value(a), self.value(b));
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (at, bt) = (self.value(a), self.value(b));
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// `W x + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let wx = self.matvec(w, x)?;
        if self.value(wx).shape() != self.value(b).shape() {
            return Err(shape_err("affine", self.value(w), self.value(b)));
        }
        self.add(wx, b)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let at = self.value(a);
        let data = at.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(at.shape().to_vec(), data).expect("same shape");
        self.push(value, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |v| v * c, Op::Scale(a, c))
    }

    /// Elementwise product with a constant mask.
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let at = self.value(a);
        if at.len() != mask.len() {
            return Err(shape_err("mask", at, &Tensor::vector(mask)));
        }
        let data = at.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mask(a, mask)))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if !t.is_vector() {
                return Err(shape_err("concat", t, t));
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(src);
        if !t.is_vector() || start + len > t.len() {
            return Err(shape_err("slice", t, &Tensor::zeros(&[start + len])));
        }
        let data = t.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Slice { src, start }))
    }

    /// Elementwise maximum over equal-shape inputs; ties go to the first input.
    pub fn max_pool(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("max_pool over an empty list".into()))?;
        for &v in &inputs[1..] {
            self.same_shape("max_pool", first, v)?;
        }
        let n = self.value(first).len();
        let mut argmax = vec![0usize; n];
        let mut out = self.value(first).data().to_vec();
        for (k, &v) in inputs.iter().enumerate().skip(1) {
            for (j, &x) in self.value(v).data().iter().enumerate() {
                if x > out[j] {
                    out[j] = x;
                    argmax[j] = k;
                }
            }
        }
        let value = Tensor::new(self.value(first).shape().to_vec(), out)?;
        Ok(self.push(
            value,
            Op::MaxPool {
                inputs: inputs.to_vec(),
                argmax,
            },
        ))
    }

    /// Softmax probabilities and the scalar loss `-ln p[target]`.
    pub fn softmax_xent(&mut self, logits: Var, target: usize) -> Result<(Vec<f64>, Var)> {
        let lt = self.value(logits);
        if !lt.is_vector() || lt.is_empty() {
            return Err(shape_err("softmax_xent", lt, lt));
        }
        if target >= lt.len() {
            return Err(Error::InvalidArgument(format!(
                "target class {target} out of range for {} logits",
                lt.len()
            )));
        }
        let d = lt.data();
        let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + d.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = log_z - d[target];
        let probs: Vec<f64> = d.iter().map(|&v| (v - log_z).exp()).collect();
        let var = self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                logits,
                target,
                probs: probs.clone(),
            },
        );
        Ok((probs, var))
    }

    /// Elementwise sum of equal-shape values.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("sum over an empty list".into()))?;
        let mut out = self.value(first).data().to_vec();
        for &p in &parts[1..] {
            self.same_shape("sum", first, p)?;
            for (o, x) in out.iter_mut().zip(self.value(p).data()) {
                *o += x;
            }
        }
        let value = Tensor::new(self.value(first).shape().to_vec(), out)?;
        Ok(self.push(value, Op::Sum(parts.to_vec())))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).sum_squares();
        self.push(Tensor::scalar(s), Op::SumSquares(a))
    }

    /// Gradients of the scalar `root` with respect to every recorded value.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rt = self.value(root);
        if rt.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar root, got shape {:?}",
                rt.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatVec { w, x } => {
                    let (wt, xt) = (self.value(*w), self.value(*x));
                    let cols = wt.cols();
                    self.accumulate(&mut grads, *w, |gw| {
                        for (r, gr) in g.iter().enumerate() {
                            for (c, xc) in xt.data().iter().enumerate() {
                                gw[r * cols + c] += gr * xc;
                            }
                        }
                    });
                    self.accumulate(&mut grads, *x, |gx| {
                        for (r, gr) in g.iter().enumerate() {
                            let row = &wt.data()[r * cols..(r + 1) * cols];
                            for (gxc, wrc) in gx.iter_mut().zip(row) {
                                *gxc += gr * wrc;
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        self.accumulate(&mut grads, v, |ga| add_into(ga, &g));
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), bi) in ga.iter_mut().zip(&g).zip(bv) {
                            *o += gi * bi;
                        }
                    });
                    self.accumulate(&mut grads, *b, |gb| {
                        for ((o, gi), ai) in gb.iter_mut().zip(&g).zip(av) {
                            *o += gi * ai;
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                            *o += gi * yi * (1.0 - yi);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                            *o += gi * (1.0 - yi * yi);
                        }
                    });
                }
                Op::Scale(a, c) => {
                    self.accumulate(&mut grads, *a, |ga| {
                        for (o, gi) in ga.iter_mut().zip(&g) {
                            *o += gi * c;
                        }
                    });
                }
                Op::Mask(a, m) => {
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), mi) in ga.iter_mut().zip(&g).zip(m) {
                            *o += gi * mi;
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        self.accumulate(&mut grads, p, |gp| add_into(gp, &g[offset..offset + n]));
                        offset += n;
                    }
                }
                Op::Slice { src, start } => {
                    self.accumulate(&mut grads, *src, |gs| {
                        add_into(&mut gs[*start..*start + g.len()], &g)
                    });
                }
                Op::MaxPool { inputs, argmax } => {
                    for (k, &v) in inputs.iter().enumerate() {
                        if !argmax.contains(&k) {
                            continue;
                        }
                        self.accumulate(&mut grads, v, |gv| {
                            for (j, &winner) in argmax.iter().enumerate() {
                                if winner == k {
                                    gv[j] += g[j];
                                }
                            }
                        });
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    target,
                    probs,
                } => {
                    self.accumulate(&mut grads, *logits, |gl| {
                        for (j, (o, p)) in gl.iter_mut().zip(probs).enumerate() {
                            let t = if j == *target { 1.0 } else { 0.0 };
                            *o += g[0] * (p - t);
                        }
                    });
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        self.accumulate(&mut grads, p, |gp| add_into(gp, &g));
                    }
                }
                Op::SumSquares(a) => {
                    let av = self.value(*a).data();
                    self.accumulate(&mut grads, *a, |ga| {
                        for (o, x) in ga.iter_mut().zip(av) {
                            *o += 2.0 * g[0] * x;
                        }
                    });
                }
            }
            grads[i] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        let n = self.nodes[v.0].value.len();
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        f(slot);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
