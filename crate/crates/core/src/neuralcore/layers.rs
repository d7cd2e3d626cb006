use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// LSTM weights with the four gates stacked in the order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[4h, input]`
    pub w_x: Tensor,
    /// `[4h, h]`
    pub w_h: Tensor,
    /// `[4h]`
    pub b: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Tensor::zeros(&[4 * hidden, input]),
            w_h: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Uniform weights in `[-bound, bound]`, zero bias.
    pub fn uniform<R: Rng>(input: usize, hidden: usize, bound: f64, rng: &mut R) -> Self {
        LstmParams {
            w_x: Tensor::uniform(&[4 * hidden, input], bound, rng),
            w_h: Tensor::uniform(&[4 * hidden, hidden], bound, rng),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    pub fn register(&self, tape: &mut Tape) -> LstmVars {
        LstmVars {
            w_x: tape.leaf(self.w_x.clone()),
            w_h: tape.leaf(self.w_h.clone()),
            b: tape.leaf(self.b.clone()),
        }
    }
}

/// One LSTM step: `c = f*c_prev + i*g`, `h = o*tanh(c)`.
pub fn lstm_cell(
    tape: &mut Tape,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmVars,
) -> Result<(Var, Var)> {
    let hidden = tape.value(p.w_h).cols();
    if tape.value(h_prev).len() != hidden || tape.value(c_prev).len() != hidden {
        return Err(Error::Shape {
            op: "lstm_cell",
            left: tape.value(p.w_h).shape().to_vec(),
            right: tape.value(c_prev).shape().to_vec(),
        });
    }
    let zx = tape.matvec(p.w_x, x)?;
    let zh = tape.matvec(p.w_h, h_prev)?;
    let z = tape.sum(&[zx, zh, p.b])?;
    let zi = tape.slice(z, 0, hidden)?;
    let zf = tape.slice(z, hidden, hidden)?;
    let zg = tape.slice(z, 2 * hidden, hidden)?;
    let zo = tape.slice(z, 3 * hidden, hidden)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zg);
    let o = tape.sigmoid(zo);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Runs one direction over `seq` from zero states, returning hidden states in input order.
pub fn lstm_pass(tape: &mut Tape, seq: &[Var], p: &LstmVars, reverse: bool) -> Result<Vec<Var>> {
    let hidden = tape.value(p.w_h).cols();
    let mut h = tape.leaf(Tensor::zeros(&[hidden]));
    let mut c = tape.leaf(Tensor::zeros(&[hidden]));
    let mut out = vec![h; seq.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..seq.len()).rev())
    } else {
        Box::new(0..seq.len())
    };
    for t in order {
        let (nh, nc) = lstm_cell(tape, seq[t], h, c, p)?;
        h = nh;
        c = nc;
        out[t] = h;
    }
    Ok(out)
}

/// Bidirectional LSTM: per position, the left-to-right and right-to-left hidden states.
pub fn bilstm(
    tape: &mut Tape,
    seq: &[Var],
    fwd: &LstmVars,
    bwd: &LstmVars,
) -> Result<Vec<(Var, Var)>> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("bilstm over an empty sequence".into()));
    }
    let f = lstm_pass(tape, seq, fwd, false)?;
    let b = lstm_pass(tape, seq, bwd, true)?;
    Ok(f.into_iter().zip(b).collect())
}

/// Dependency-unit convolution `tanh(W [h_a; h_ab; h_b] + b)`.
pub fn conv_unit(tape: &mut Tape, h_a: Var, h_ab: Var, h_b: Var, w: Var, b: Var) -> Result<Var> {
    let unit = tape.concat(&[h_a, h_ab, h_b])?;
    let pre = tape.affine(unit, w, b)?;
    Ok(tape.tanh(pre))
}

/// `lambda * sum ||W||^2` over the given weight values.
pub fn l2_penalty(tape: &mut Tape, weights: &[Var], lambda: f64) -> Result<Var> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("negative L2 weight {lambda}")));
    }
    if weights.is_empty() {
        return Ok(tape.leaf(Tensor::scalar(0.0)));
    }
    let squares: Vec<Var> = weights.iter().map(|&w| tape.sum_squares(w)).collect();
    let total = tape.sum(&squares)?;
    Ok(tape.scale(total, lambda))
}

/// Plain-value counterpart of [`l2_penalty`].
pub fn l2_value(weights: &[&Tensor], lambda: f64) -> f64 {
    lambda * weights.iter().map(|w| w.sum_squares()).sum::<f64>()
}

/// Inverted-dropout mask: each entry is `1/keep` with probability `keep`, else 0.
pub fn dropout_mask(len: usize, keep: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Inverted dropout; the identity in eval mode or when `keep == 1`.
pub fn dropout(tape: &mut Tape, x: Var, keep: f64, seed: u64, training: bool) -> Result<Var> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability must lie in (0, 1], got {keep}"
        )));
    }
    if !training || keep == 1.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).len(), keep, seed);
    tape.mask(x, mask)
}
