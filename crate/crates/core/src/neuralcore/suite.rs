//! Finite-difference checks of every differentiable primitive on random inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{grad_check, GradCheckReport};
use super::layers::{conv_unit, lstm_cell, LstmParams, LstmVars};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Grad-checks the scalar that `build` records on a fresh tape from `params`.
pub fn check_tape_fn<F>(params: &[Tensor], step: f64, tolerance: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };
    let (tape, vars, out) = eval(params)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.tensor(v)).collect();
    grad_check(params, &analytic, step, tolerance, |ps| {
        let (tape, _, out) = eval(ps)?;
        Ok(tape.value(out).data()[0])
    })
}

/// Reduces a vector to a scalar through fixed random weights.
fn project(tape: &mut Tape, v: Var, weights: &Tensor) -> Result<Var> {
    let r = tape.leaf(weights.clone());
    tape.matvec(r, v)
}

/// Runs the check on affine, lstm_cell, conv_unit, max_pool and softmax_xent.
pub fn primitive_suite(seed: u64, step: f64, tolerance: f64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |shape: &[usize]| Tensor::uniform(shape, 1.0, &mut rng);
    let mut out = Vec::new();

    let params = vec![u(&[4]), u(&[3, 4]), u(&[3])];
    let proj = u(&[1, 3]);
    out.push((
        "affine",
        check_tape_fn(&params, step, tolerance, |t, v| {
            let y = t.affine(v[0], v[1], v[2])?;
            project(t, y, &proj)
        })?,
    ));

    let mut r2 = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let p = LstmParams::uniform(3, 4, 0.8, &mut r2);
    let bias: Vec<f64> = (0..16).map(|_| r2.gen_range(-0.5..0.5)).collect();
    let params = vec![
        p.w_x.clone(),
        p.w_h.clone(),
        Tensor::vector(bias),
        u(&[3]),
        u(&[4]),
        u(&[4]),
    ];
    let proj = u(&[1, 8]);
    out.push((
        "lstm_cell",
        check_tape_fn(&params, step, tolerance, |t, v| {
            let vars = LstmVars {
                w_x: v[0],
                w_h: v[1],
                b: v[2],
            };
            let (h, c) = lstm_cell(t, v[3], v[4], v[5], &vars)?;
            let both = t.concat(&[h, c])?;
            project(t, both, &proj)
        })?,
    ));

    let params = vec![u(&[2]), u(&[3]), u(&[2]), u(&[4, 7]), u(&[4])];
    let proj = u(&[1, 4]);
    out.push((
        "conv_unit",
        check_tape_fn(&params, step, tolerance, |t, v| {
            let y = conv_unit(t, v[0], v[1], v[2], v[3], v[4])?;
            project(t, y, &proj)
        })?,
    ));

    let params: Vec<Tensor> = (0..4).map(|_| u(&[6])).collect();
    let proj = u(&[1, 6]);
    out.push((
        "max_pool",
        check_tape_fn(&params, step, tolerance, |t, v| {
            let m = t.max_pool(v)?;
            project(t, m, &proj)
        })?,
    ));

    let params = vec![Tensor::uniform(&[7], 3.0, &mut rng)];
    out.push((
        "softmax_xent",
        check_tape_fn(&params, step, tolerance, |t, v| Ok(t.softmax_xent(v[0], 2)?.1))?,
    ));
    Ok(out)
}
