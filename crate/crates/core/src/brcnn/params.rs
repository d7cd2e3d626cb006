use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralcore::{LstmParams, LstmVars, Tape, Tensor, Var};

pub const WEIGHT_INIT_BOUND: f64 = 0.08;
pub const EMBED_INIT_BOUND: f64 = 0.05;

/// Embedding sizes; each channel's LSTM hidden size equals its embedding size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub word_dim: usize,
    pub rel_dim: usize,
    /// Output width of the dependency-unit convolution.
    pub conv_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word_dim: 200,
            rel_dim: 50,
            conv_dim: 200,
        }
    }
}

impl ModelDims {
    /// Width of `[h_a; h_ab; h_b]`, each a concatenated BiLSTM state.
    pub fn unit_dim(&self) -> usize {
        4 * self.word_dim + 2 * self.rel_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Embedding,
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub word_table: Tensor,
    pub rel_table: Tensor,
    pub word_fwd: LstmParams,
    pub word_bwd: LstmParams,
    pub rel_fwd: LstmParams,
    pub rel_bwd: LstmParams,
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    pub fine_fwd_w: Tensor,
    pub fine_fwd_b: Tensor,
    pub fine_bwd_w: Tensor,
    pub fine_bwd_b: Tensor,
    pub coarse_w: Tensor,
    pub coarse_b: Tensor,
}

/// Canonical parameter names, in storage and optimizer order.
pub const PARAM_NAMES: [&str; 22] = [
    "word_table",
    "rel_table",
    "word_fwd.w_x",
    "word_fwd.w_h",
    "word_fwd.b",
    "word_bwd.w_x",
    "word_bwd.w_h",
    "word_bwd.b",
    "rel_fwd.w_x",
    "rel_fwd.w_h",
    "rel_fwd.b",
    "rel_bwd.w_x",
    "rel_bwd.w_h",
    "rel_bwd.b",
    "conv.w",
    "conv.b",
    "fine_fwd.w",
    "fine_fwd.b",
    "fine_bwd.w",
    "fine_bwd.b",
    "coarse.w",
    "coarse.b",
];

pub fn param_kind(name: &str) -> ParamKind {
    if name.ends_with("_table") {
        ParamKind::Embedding
    } else if name.ends_with(".b") {
        ParamKind::Bias
    } else {
        ParamKind::Weight
    }
}

/// Shapes implied by the dimensions, vocabulary sizes and relation count, in canonical order.
pub fn expected_shapes(dims: &ModelDims, n_words: usize, n_rels: usize, k: usize) -> Vec<Vec<usize>> {
    let (dw, dr, dc) = (dims.word_dim, dims.rel_dim, dims.conv_dim);
    let lstm = |input: usize, hidden: usize| {
        vec![vec![4 * hidden, input], vec![4 * hidden, hidden], vec![4 * hidden]]
    };
    let mut shapes = vec![vec![n_words, dw], vec![n_rels, dr]];
    shapes.extend(lstm(dw, dw));
    shapes.extend(lstm(dw, dw));
    shapes.extend(lstm(dr, dr));
    shapes.extend(lstm(dr, dr));
    shapes.extend([
        vec![dc, dims.unit_dim()],
        vec![dc],
        vec![2 * k + 1, dc],
        vec![2 * k + 1],
        vec![2 * k + 1, dc],
        vec![2 * k + 1],
        vec![k + 1, 2 * dc],
        vec![k + 1],
    ]);
    shapes
}

impl ModelParams {
    pub fn zeros(dims: &ModelDims, n_words: usize, n_rels: usize, k: usize) -> Self {
        let tensors = expected_shapes(dims, n_words, n_rels, k)
            .iter()
            .map(|s| Tensor::zeros(s))
            .collect();
        ModelParams::from_tensors(tensors).expect("canonical shapes")
    }

    /// Uniform weights in ±0.08, zero biases, embeddings uniform in ±0.05.
    pub fn init(dims: &ModelDims, n_words: usize, n_rels: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = expected_shapes(dims, n_words, n_rels, k)
            .iter()
            .zip(PARAM_NAMES)
            .map(|(s, name)| match param_kind(name) {
                ParamKind::Embedding => Tensor::uniform(s, EMBED_INIT_BOUND, &mut rng),
                ParamKind::Weight => Tensor::uniform(s, WEIGHT_INIT_BOUND, &mut rng),
                ParamKind::Bias => Tensor::zeros(s),
            })
            .collect();
        ModelParams::from_tensors(tensors).expect("canonical shapes")
    }

    /// Rebuilds from tensors in canonical order.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != PARAM_NAMES.len() {
            return Err(Error::Schema(format!(
                "expected {} parameter tensors, got {}",
                PARAM_NAMES.len(),
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        let word_table = next();
        let rel_table = next();
        let word_fwd = LstmParams { w_x: next(), w_h: next(), b: next() };
        let word_bwd = LstmParams { w_x: next(), w_h: next(), b: next() };
        let rel_fwd = LstmParams { w_x: next(), w_h: next(), b: next() };
        let rel_bwd = LstmParams { w_x: next(), w_h: next(), b: next() };
        Ok(ModelParams {
            word_table,
            rel_table,
            word_fwd,
            word_bwd,
            rel_fwd,
            rel_bwd,
            conv_w: next(),
            conv_b: next(),
            fine_fwd_w: next(),
            fine_fwd_b: next(),
            fine_bwd_w: next(),
            fine_bwd_b: next(),
            coarse_w: next(),
            coarse_b: next(),
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.word_table, &self.rel_table];
        for l in [&self.word_fwd, &self.word_bwd, &self.rel_fwd, &self.rel_bwd] {
            out.extend([&l.w_x, &l.w_h, &l.b]);
        }
        out.extend([
            &self.conv_w,
            &self.conv_b,
            &self.fine_fwd_w,
            &self.fine_fwd_b,
            &self.fine_bwd_w,
            &self.fine_bwd_b,
            &self.coarse_w,
            &self.coarse_b,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.word_table, &mut self.rel_table];
        for l in [
            &mut self.word_fwd,
            &mut self.word_bwd,
            &mut self.rel_fwd,
            &mut self.rel_bwd,
        ] {
            out.extend([&mut l.w_x, &mut l.w_h, &mut l.b]);
        }
        out.extend([
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.fine_fwd_w,
            &mut self.fine_fwd_b,
            &mut self.fine_bwd_w,
            &mut self.fine_bwd_b,
            &mut self.coarse_w,
            &mut self.coarse_b,
        ]);
        out
    }

    pub fn named(&self) -> Vec<(&'static str, &Tensor)> {
        PARAM_NAMES.iter().copied().zip(self.tensors()).collect()
    }

    /// Weight matrices subject to the L2 penalty.
    pub fn weights(&self) -> Vec<&Tensor> {
        self.named()
            .into_iter()
            .filter(|(n, _)| param_kind(n) == ParamKind::Weight)
            .map(|(_, t)| t)
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    /// Puts every non-embedding tensor on the tape.
    pub fn register(&self, tape: &mut Tape) -> ParamVars {
        ParamVars {
            word_fwd: self.word_fwd.register(tape),
            word_bwd: self.word_bwd.register(tape),
            rel_fwd: self.rel_fwd.register(tape),
            rel_bwd: self.rel_bwd.register(tape),
            conv_w: tape.leaf(self.conv_w.clone()),
            conv_b: tape.leaf(self.conv_b.clone()),
            fine_fwd_w: tape.leaf(self.fine_fwd_w.clone()),
            fine_fwd_b: tape.leaf(self.fine_fwd_b.clone()),
            fine_bwd_w: tape.leaf(self.fine_bwd_w.clone()),
            fine_bwd_b: tape.leaf(self.fine_bwd_b.clone()),
            coarse_w: tape.leaf(self.coarse_w.clone()),
            coarse_b: tape.leaf(self.coarse_b.clone()),
        }
    }
}

/// Tape handles for the dense (non-embedding) parameters.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub word_fwd: LstmVars,
    pub word_bwd: LstmVars,
    pub rel_fwd: LstmVars,
    pub rel_bwd: LstmVars,
    pub conv_w: Var,
    pub conv_b: Var,
    pub fine_fwd_w: Var,
    pub fine_fwd_b: Var,
    pub fine_bwd_w: Var,
    pub fine_bwd_b: Var,
    pub coarse_w: Var,
    pub coarse_b: Var,
}

impl ParamVars {
    /// Vars for canonical positions 2.. (everything after the two tables).
    pub fn dense(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for l in [&self.word_fwd, &self.word_bwd, &self.rel_fwd, &self.rel_bwd] {
            out.extend([l.w_x, l.w_h, l.b]);
        }
        out.extend([
            self.conv_w,
            self.conv_b,
            self.fine_fwd_w,
            self.fine_fwd_b,
            self.fine_bwd_w,
            self.fine_bwd_b,
            self.coarse_w,
            self.coarse_b,
        ]);
        out
    }

    pub fn weights(&self) -> Vec<Var> {
        self.dense()
            .into_iter()
            .zip(&PARAM_NAMES[2..])
            .filter(|(_, n)| param_kind(n) == ParamKind::Weight)
            .map(|(v, _)| v)
            .collect()
    }
}

/// Gradient of one parameter tensor; embedding tables carry only touched rows.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrad {
    Dense(Tensor),
    Rows(BTreeMap<usize, Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub grads: Vec<ParamGrad>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let grads = params
            .named()
            .into_iter()
            .map(|(name, t)| match param_kind(name) {
                ParamKind::Embedding => ParamGrad::Rows(BTreeMap::new()),
                _ => ParamGrad::Dense(Tensor::zeros(t.shape())),
            })
            .collect();
        ModelGrads { grads }
    }

    /// `self += other`, slot by slot.
    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            match (a, b) {
                (ParamGrad::Dense(x), ParamGrad::Dense(y)) => {
                    for (p, q) in x.data_mut().iter_mut().zip(y.data()) {
                        *p += q;
                    }
                }
                (ParamGrad::Rows(x), ParamGrad::Rows(y)) => {
                    for (row, g) in y {
                        let slot = x.entry(*row).or_insert_with(|| vec![0.0; g.len()]);
                        for (p, q) in slot.iter_mut().zip(g) {
                            *p += q;
                        }
                    }
                }
                _ => panic!("mismatched gradient layouts"),
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.grads {
            match g {
                ParamGrad::Dense(t) => t.data_mut().iter_mut().for_each(|v| *v *= c),
                ParamGrad::Rows(rows) => rows
                    .values_mut()
                    .for_each(|r| r.iter_mut().for_each(|v| *v *= c)),
            }
        }
    }

    /// Dense tensors aligned with the parameter order.
    pub fn to_dense(&self, params: &ModelParams) -> Vec<Tensor> {
        self.grads
            .iter()
            .zip(params.tensors())
            .map(|(g, p)| match g {
                ParamGrad::Dense(t) => t.clone(),
                ParamGrad::Rows(rows) => {
                    let mut t = Tensor::zeros(p.shape());
                    for (r, v) in rows {
                        t.row_mut(*r).copy_from_slice(v);
                    }
                    t
                }
            })
            .collect()
    }
}
