use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::{Error, Result};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Grad-checks a tape-built scalar function of `params` at step 1e-4.
fn check_tape_fn<F>(params: &[Tensor], tolerance: f64, build: F) -> GradCheckReport
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };
    let (tape, vars, out) = eval(params).unwrap();
    let grads = tape.backward(out).unwrap();
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.tensor(v)).collect();
    grad_check(params, &analytic, 1e-4, tolerance, |ps| {
        let (tape, _, out) = eval(ps)?;
        Ok(tape.value(out).data()[0])
    })
    .unwrap()
}

/// Projects a vector output onto fixed random weights so it becomes a scalar loss.
fn project(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let n = tape.value(v).len();
    let r = tape.leaf(Tensor::uniform(&[1, n], 1.0, &mut rng(seed)));
    tape.matvec(r, v)
}

fn naive_matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.rows()];
    for (r, o) in out.iter_mut().enumerate() {
        for (c, xc) in x.iter().enumerate() {
            *o += w.data()[r * w.cols() + c] * xc;
        }
    }
    out
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Independent plain-array LSTM step.
fn naive_lstm_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let zx = naive_matvec(&p.w_x, x);
    let zh = naive_matvec(&p.w_h, h);
    let z: Vec<f64> = (0..4 * n).map(|k| zx[k] + zh[k] + p.b.data()[k]).collect();
    let mut hn = vec![0.0; n];
    let mut cn = vec![0.0; n];
    for k in 0..n {
        let i = sig(z[k]);
        let f = sig(z[n + k]);
        let g = z[2 * n + k].tanh();
        let o = sig(z[3 * n + k]);
        cn[k] = f * c[k] + i * g;
        hn[k] = o * cn[k].tanh();
    }
    (hn, cn)
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn affine_identity_and_constant() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.5, -2.0, 0.25]));
    let eye = tape.leaf(Tensor::identity(3));
    let zero_b = tape.leaf(Tensor::zeros(&[3]));
    let y = tape.affine(x, eye, zero_b).unwrap();
    assert_eq!(tape.value(y).data(), &[1.5, -2.0, 0.25]);

    let zero_w = tape.leaf(Tensor::zeros(&[2, 3]));
    let c = tape.leaf(Tensor::vector(vec![4.0, -1.0]));
    let y = tape.affine(x, zero_w, c).unwrap();
    assert_eq!(tape.value(y).data(), &[4.0, -1.0]);
}

#[test]
fn affine_matches_naive_loops() {
    let mut r = rng(1);
    let w = Tensor::uniform(&[3, 4], 1.0, &mut r);
    let x = Tensor::uniform(&[4], 1.0, &mut r);
    let b = Tensor::uniform(&[3], 1.0, &mut r);
    let mut expected = vec![0.0; 3];
    for i in 0..3 {
        expected[i] = b.data()[i];
        for j in 0..4 {
            expected[i] += w.data()[i * 4 + j] * x.data()[j];
        }
    }
    let mut tape = Tape::new();
    let (xv, wv, bv) = (tape.leaf(x), tape.leaf(w), tape.leaf(b));
    let y = tape.affine(xv, wv, bv).unwrap();
    assert_close(tape.value(y).data(), &expected, 1e-12);
}

#[test]
fn affine_shape_error_names_both_shapes() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(&[5]));
    let w = tape.leaf(Tensor::zeros(&[3, 4]));
    let b = tape.leaf(Tensor::zeros(&[3]));
    match tape.affine(x, w, b) {
        Err(Error::Shape { left, right, .. }) => {
            assert_eq!(left, vec![3, 4]);
            assert_eq!(right, vec![5]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
    let w = tape.leaf(Tensor::zeros(&[3, 5]));
    let bad_b = tape.leaf(Tensor::zeros(&[2]));
    assert!(matches!(tape.affine(x, w, bad_b), Err(Error::Shape { .. })));
}

#[test]
fn affine_gradients() {
    let mut r = rng(2);
    let params = vec![
        Tensor::uniform(&[4], 1.0, &mut r),
        Tensor::uniform(&[3, 4], 1.0, &mut r),
        Tensor::uniform(&[3], 1.0, &mut r),
    ];
    let report = check_tape_fn(&params, 1e-4, |t, v| {
        let y = t.affine(v[0], v[1], v[2])?;
        project(t, y, 9)
    });
    assert!(report.passed, "{report:?}");
}

#[test]
fn lstm_zero_params() {
    let p = LstmParams::zeros(3, 2);
    let mut tape = Tape::new();
    let vars = p.register(&mut tape);
    let x = tape.leaf(Tensor::vector(vec![0.3, -0.7, 1.1]));
    let h0 = tape.leaf(Tensor::vector(vec![0.2, 0.9]));
    let c0 = tape.leaf(Tensor::vector(vec![1.2, -0.4]));
    let (h, c) = lstm_cell(&mut tape, x, h0, c0, &vars).unwrap();
    assert_close(tape.value(c).data(), &[0.6, -0.2], 1e-15);
    assert_close(
        tape.value(h).data(),
        &[0.5 * (0.6f64).tanh(), 0.5 * (-0.2f64).tanh()],
        1e-15,
    );

    let c0 = tape.leaf(Tensor::zeros(&[2]));
    let (h, _) = lstm_cell(&mut tape, x, h0, c0, &vars).unwrap();
    assert_eq!(tape.value(h).data(), &[0.0, 0.0]);
}

#[test]
fn lstm_dimension_mismatch() {
    let p = LstmParams::zeros(3, 2);
    let mut tape = Tape::new();
    let vars = p.register(&mut tape);
    let x = tape.leaf(Tensor::zeros(&[4]));
    let h0 = tape.leaf(Tensor::zeros(&[2]));
    let c0 = tape.leaf(Tensor::zeros(&[2]));
    assert!(lstm_cell(&mut tape, x, h0, c0, &vars).is_err());
    let x = tape.leaf(Tensor::zeros(&[3]));
    let bad_h = tape.leaf(Tensor::zeros(&[3]));
    assert!(lstm_cell(&mut tape, x, bad_h, c0, &vars).is_err());
}

#[test]
fn lstm_cell_gradients() {
    let mut r = rng(3);
    let p = LstmParams::uniform(3, 2, 0.8, &mut r);
    let mut b = p.b.clone();
    for v in b.data_mut() {
        *v = r.gen_range(-0.5..0.5);
    }
    let params = vec![
        p.w_x.clone(),
        p.w_h.clone(),
        b,
        Tensor::uniform(&[3], 1.0, &mut r),
        Tensor::uniform(&[2], 1.0, &mut r),
        Tensor::uniform(&[2], 1.0, &mut r),
    ];
    let report = check_tape_fn(&params, 1e-4, |t, v| {
        let vars = LstmVars {
            w_x: v[0],
            w_h: v[1],
            b: v[2],
        };
        let (h, c) = lstm_cell(t, v[3], v[4], v[5], &vars)?;
        let both = t.concat(&[h, c])?;
        project(t, both, 11)
    });
    assert!(report.passed, "{report:?}");
    assert_eq!(report.checked, 24 + 16 + 8 + 3 + 2 + 2);
}

#[test]
fn bilstm_single_step_and_empty() {
    let mut r = rng(4);
    let fwd = LstmParams::uniform(3, 2, 0.5, &mut r);
    let bwd = LstmParams::uniform(3, 2, 0.5, &mut r);
    let x = Tensor::uniform(&[3], 1.0, &mut r);
    let mut tape = Tape::new();
    let (fv, bv) = (fwd.register(&mut tape), bwd.register(&mut tape));
    let xv = tape.leaf(x.clone());
    let out = bilstm(&mut tape, &[xv], &fv, &bv).unwrap();
    assert_eq!(out.len(), 1);
    let zeros = [0.0, 0.0];
    let (hf, _) = naive_lstm_step(&fwd, x.data(), &zeros, &zeros);
    let (hb, _) = naive_lstm_step(&bwd, x.data(), &zeros, &zeros);
    assert_close(tape.value(out[0].0).data(), &hf, 1e-14);
    assert_close(tape.value(out[0].1).data(), &hb, 1e-14);
    assert!(bilstm(&mut tape, &[], &fv, &bv).is_err());
}

#[test]
fn bilstm_palindrome_symmetry() {
    let mut r = rng(5);
    let p = LstmParams::uniform(2, 3, 0.7, &mut r);
    let a = Tensor::uniform(&[2], 1.0, &mut r);
    let b = Tensor::uniform(&[2], 1.0, &mut r);
    let c = Tensor::uniform(&[2], 1.0, &mut r);
    let mut tape = Tape::new();
    let pv = p.register(&mut tape);
    let seq: Vec<Var> = [&a, &b, &c, &b, &a].iter().map(|t| tape.leaf((*t).clone())).collect();
    let out = bilstm(&mut tape, &seq, &pv, &pv).unwrap();
    for k in 0..5 {
        assert_close(
            tape.value(out[k].0).data(),
            tape.value(out[4 - k].1).data(),
            1e-15,
        );
    }
}

#[test]
fn bilstm_equals_two_independent_passes() {
    let mut r = rng(6);
    let fwd = LstmParams::uniform(3, 4, 0.5, &mut r);
    let bwd = LstmParams::uniform(3, 4, 0.5, &mut r);
    let xs: Vec<Tensor> = (0..5).map(|_| Tensor::uniform(&[3], 1.0, &mut r)).collect();
    let mut tape = Tape::new();
    let (fv, bv) = (fwd.register(&mut tape), bwd.register(&mut tape));
    let seq: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = bilstm(&mut tape, &seq, &fv, &bv).unwrap();

    let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
    for k in 0..5 {
        (h, c) = naive_lstm_step(&fwd, xs[k].data(), &h, &c);
        assert_close(tape.value(out[k].0).data(), &h, 1e-13);
    }
    let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
    for k in (0..5).rev() {
        (h, c) = naive_lstm_step(&bwd, xs[k].data(), &h, &c);
        assert_close(tape.value(out[k].1).data(), &h, 1e-13);
    }
}

#[test]
fn conv_unit_limits() {
    let mut tape = Tape::new();
    let ha = tape.leaf(Tensor::vector(vec![0.3, -0.2]));
    let hab = tape.leaf(Tensor::vector(vec![0.9]));
    let hb = tape.leaf(Tensor::vector(vec![-0.5, 0.1]));
    let w = tape.leaf(Tensor::zeros(&[3, 5]));
    let b = tape.leaf(Tensor::zeros(&[3]));
    let y = conv_unit(&mut tape, ha, hab, hb, w, b).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

    let big = tape.leaf(Tensor::filled(&[3], 15.0));
    let y = conv_unit(&mut tape, ha, hab, hb, w, big).unwrap();
    for v in tape.value(y).data() {
        assert!(*v > 1.0 - 1e-12);
    }
    let bad_w = tape.leaf(Tensor::zeros(&[3, 4]));
    assert!(conv_unit(&mut tape, ha, hab, hb, bad_w, b).is_err());
}

#[test]
fn conv_unit_matches_composition_and_gradients() {
    let mut r = rng(7);
    let params = vec![
        Tensor::uniform(&[2], 1.0, &mut r),
        Tensor::uniform(&[3], 1.0, &mut r),
        Tensor::uniform(&[2], 1.0, &mut r),
        Tensor::uniform(&[4, 7], 1.0, &mut r),
        Tensor::uniform(&[4], 1.0, &mut r),
    ];
    let mut cat = params[0].data().to_vec();
    cat.extend_from_slice(params[1].data());
    cat.extend_from_slice(params[2].data());
    let expected: Vec<f64> = naive_matvec(&params[3], &cat)
        .iter()
        .zip(params[4].data())
        .map(|(a, b)| (a + b).tanh())
        .collect();
    let mut tape = Tape::new();
    let v: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let y = conv_unit(&mut tape, v[0], v[1], v[2], v[3], v[4]).unwrap();
    assert_close(tape.value(y).data(), &expected, 1e-14);

    let report = check_tape_fn(&params, 1e-4, |t, v| {
        let y = conv_unit(t, v[0], v[1], v[2], v[3], v[4])?;
        project(t, y, 13)
    });
    assert!(report.passed, "{report:?}");
}

#[test]
fn max_pool_cases() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::vector(vec![1.0, -1.0]));
    let b = tape.leaf(Tensor::vector(vec![0.0, 5.0]));
    let single = tape.max_pool(&[a]).unwrap();
    assert_eq!(tape.value(single).data(), &[1.0, -1.0]);
    let m = tape.max_pool(&[a, b]).unwrap();
    assert_eq!(tape.value(m).data(), &[1.0, 5.0]);
    assert!(tape.max_pool(&[]).is_err());
    let c = tape.leaf(Tensor::zeros(&[3]));
    assert!(tape.max_pool(&[a, c]).is_err());
}

#[test]
fn max_pool_ties_route_gradient_to_first() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::vector(vec![2.0, 1.0]));
    let b = tape.leaf(Tensor::vector(vec![2.0, 3.0]));
    let m = tape.max_pool(&[a, b]).unwrap();
    let s = project(&mut tape, m, 1).unwrap();
    let g = tape.backward(s).unwrap();
    let (ga, gb) = (g.tensor(a), g.tensor(b));
    assert_ne!(ga.data()[0], 0.0);
    assert_eq!(gb.data()[0], 0.0);
    assert_eq!(ga.data()[1], 0.0);
    assert_ne!(gb.data()[1], 0.0);
}

#[test]
fn max_pool_brute_force_and_gradients() {
    let mut r = rng(8);
    let params: Vec<Tensor> = (0..4).map(|_| Tensor::uniform(&[6], 1.0, &mut r)).collect();
    let mut tape = Tape::new();
    let v: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let m = tape.max_pool(&v).unwrap();
    for j in 0..6 {
        let out = tape.value(m).data()[j];
        assert!(params.iter().all(|p| out >= p.data()[j]));
        assert!(params.iter().any(|p| out == p.data()[j]));
    }
    let report = check_tape_fn(&params, 1e-4, |t, v| {
        let m = t.max_pool(v)?;
        project(t, m, 17)
    });
    assert!(report.passed, "{report:?}");
}

#[test]
fn softmax_xent_cases() {
    let mut tape = Tape::new();
    let uniform = tape.leaf(Tensor::filled(&[7], 0.3));
    let (probs, loss) = tape.softmax_xent(uniform, 4).unwrap();
    assert!((tape.value(loss).data()[0] - 7f64.ln()).abs() < 1e-14);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let wide = tape.leaf(Tensor::vector(vec![1000.0, 0.0]));
    let (probs, loss) = tape.softmax_xent(wide, 0).unwrap();
    let l = tape.value(loss).data()[0];
    assert!(l.is_finite() && l.abs() < 1e-300);
    assert!(probs.iter().all(|p| p.is_finite()));

    assert!(tape.softmax_xent(wide, 2).is_err());
}

#[test]
fn softmax_xent_gradient_is_tight() {
    let mut r = rng(9);
    let params = vec![Tensor::uniform(&[5], 3.0, &mut r)];
    let report = check_tape_fn(&params, 1e-6, |t, v| Ok(t.softmax_xent(v[0], 2)?.1));
    assert!(report.passed, "{report:?}");
}

#[test]
fn l2_penalty_cases() {
    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::vector(vec![3.0]));
    let zero = l2_penalty(&mut tape, &[w], 0.0).unwrap();
    assert_eq!(tape.value(zero).data()[0], 0.0);
    let nine = l2_penalty(&mut tape, &[w], 1.0).unwrap();
    assert_eq!(tape.value(nine).data()[0], 9.0);
    assert!(l2_penalty(&mut tape, &[w], -1.0).is_err());

    let mut r = rng(10);
    let params = vec![
        Tensor::uniform(&[3, 2], 1.0, &mut r),
        Tensor::uniform(&[4], 1.0, &mut r),
    ];
    let mut naive = 0.0;
    for p in &params {
        for v in p.data() {
            naive += v * v;
        }
    }
    let mut tape = Tape::new();
    let v: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let pen = l2_penalty(&mut tape, &v, 0.37).unwrap();
    assert!((tape.value(pen).data()[0] - 0.37 * naive).abs() < 1e-14);
    assert!((l2_value(&[&params[0], &params[1]], 0.37) - 0.37 * naive).abs() < 1e-14);
    let report = check_tape_fn(&params, 1e-4, |t, v| l2_penalty(t, v, 0.37));
    assert!(report.passed, "{report:?}");
}

#[test]
fn dropout_modes() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
    assert_eq!(dropout(&mut tape, x, 1.0, 5, true).unwrap(), x);
    assert_eq!(dropout(&mut tape, x, 1.0, 5, false).unwrap(), x);
    assert_eq!(dropout(&mut tape, x, 0.3, 5, false).unwrap(), x);
    assert!(dropout(&mut tape, x, 0.0, 5, true).is_err());
    assert!(dropout(&mut tape, x, 1.5, 5, true).is_err());

    let a = dropout(&mut tape, x, 0.5, 5, true).unwrap();
    let b = dropout(&mut tape, x, 0.5, 5, true).unwrap();
    assert_eq!(tape.value(a), tape.value(b));
    for (o, i) in tape.value(a).data().iter().zip([1.0, 2.0, 3.0]) {
        assert!(*o == 0.0 || *o == 2.0 * i);
    }
}

#[test]
fn dropout_preserves_mean_in_expectation() {
    let n = 100_000;
    let input: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mean_in = input.iter().sum::<f64>() / n as f64;
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(input));
    let y = dropout(&mut tape, x, 0.5, 2024, true).unwrap();
    let mean_out = tape.value(y).data().iter().sum::<f64>() / n as f64;
    assert!((mean_out - mean_in).abs() / mean_in < 0.02, "{mean_out} vs {mean_in}");
}

#[test]
fn grad_check_quadratic_and_negative_control() {
    let w = vec![Tensor::scalar(3.0)];
    let f = |ps: &[Tensor]| Ok(ps[0].data()[0].powi(2));
    let good = grad_check(&w, &[Tensor::scalar(6.0)], 1e-4, 1e-8, f).unwrap();
    assert!(good.passed);
    assert!(good.max_rel_error < 1e-8);

    // a backward rule that forgot the factor 2 in d(w^2)/dw
    let corrupted = grad_check(&w, &[Tensor::scalar(3.0)], 1e-4, 1e-4, f).unwrap();
    assert!(!corrupted.passed);

    let nan = grad_check(&w, &[Tensor::scalar(6.0)], 1e-4, 1e-4, |_| Ok(f64::NAN));
    assert!(matches!(nan, Err(Error::NonFinite(_))));
}

#[test]
fn corrupted_backward_rule_is_caught() {
    // Gradient from a tape that silently drops the tanh derivative.
    let mut r = rng(12);
    let params = vec![Tensor::uniform(&[4], 1.5, &mut r)];
    let mut tape = Tape::new();
    let x = tape.leaf(params[0].clone());
    let y = tape.tanh(x);
    let s = project(&mut tape, y, 3).unwrap();
    let g = tape.backward(s).unwrap();
    let y_vals = tape.value(y).data().to_vec();
    let mut wrong = g.tensor(x);
    for (gv, yv) in wrong.data_mut().iter_mut().zip(&y_vals) {
        *gv /= 1.0 - yv * yv;
    }
    let report = grad_check(&params, &[wrong], 1e-4, 1e-4, |ps| {
        let mut t = Tape::new();
        let x = t.leaf(ps[0].clone());
        let y = t.tanh(x);
        let s = project(&mut t, y, 3)?;
        Ok(t.value(s).data()[0])
    })
    .unwrap();
    assert!(!report.passed);
}

#[test]
fn backward_requires_scalar_root() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(&[2]));
    assert!(tape.backward(x).is_err());
}

#[test]
fn elementwise_ops_gradients() {
    let mut r = rng(14);
    let params = vec![
        Tensor::uniform(&[5], 1.0, &mut r),
        Tensor::uniform(&[5], 1.0, &mut r),
    ];
    let report = check_tape_fn(&params, 1e-4, |t, v| {
        let s = t.sigmoid(v[0]);
        let m = t.mul(s, v[1])?;
        let a = t.add(m, v[0])?;
        let c = t.scale(a, -1.3);
        let sl = t.slice(c, 1, 3)?;
        let k = t.mask(sl, vec![2.0, 0.0, 1.0])?;
        let cat = t.concat(&[k, v[1]])?;
        project(t, cat, 21)
    });
    assert!(report.passed, "{report:?}");
}

proptest! {
    #[test]
    fn softmax_is_a_simplex_point(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn conv_unit_stays_inside_open_interval(seed in 0u64..1000) {
        let mut r = rng(seed);
        let mut tape = Tape::new();
        let ha = tape.leaf(Tensor::uniform(&[3], 1.0, &mut r));
        let hab = tape.leaf(Tensor::uniform(&[2], 1.0, &mut r));
        let hb = tape.leaf(Tensor::uniform(&[3], 1.0, &mut r));
        let w = tape.leaf(Tensor::uniform(&[4, 8], 2.0, &mut r));
        let b = tape.leaf(Tensor::uniform(&[4], 2.0, &mut r));
        let y = conv_unit(&mut tape, ha, hab, hb, w, b).unwrap();
        prop_assert!(tape.value(y).data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn lstm_gates_keep_states_finite(seed in 0u64..1000) {
        let mut r = rng(seed);
        let p = LstmParams::uniform(3, 2, 3.0, &mut r);
        let mut tape = Tape::new();
        let pv = p.register(&mut tape);
        let seq: Vec<Var> = (0..4).map(|_| tape.leaf(Tensor::uniform(&[3], 10.0, &mut r))).collect();
        let out = bilstm(&mut tape, &seq, &pv, &pv).unwrap();
        for (f, b) in out {
            prop_assert!(tape.value(f).all_finite() && tape.value(b).all_finite());
            prop_assert!(tape.value(f).data().iter().all(|v| v.abs() < 1.0));
        }
    }
}

#[test]
fn primitive_suite_passes_for_several_seeds() {
    for seed in 0..5 {
        for (name, report) in primitive_suite(seed, 1e-4, 1e-4).unwrap() {
            assert!(report.passed, "{name} seed {seed}: {report:?}");
        }
    }
}
