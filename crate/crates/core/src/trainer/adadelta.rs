use crate::brcnn::{ModelGrads, ModelParams, ParamGrad};
use crate::error::{Error, Result};
use crate::neuralcore::Tensor;

/// Running averages for AdaDelta, one pair of accumulators per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub eps: f64,
    /// E[g²]
    pub sq_grad: Vec<Tensor>,
    /// E[Δx²]
    pub sq_update: Vec<Tensor>,
}

impl AdaDeltaState {
    pub fn new(shapes: &[&[usize]], rho: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) || eps <= 0.0 || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "AdaDelta needs 0 <= rho < 1 and eps > 0, got rho = {rho}, eps = {eps}"
            )));
        }
        let zeros: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        Ok(AdaDeltaState {
            rho,
            eps,
            sq_grad: zeros.clone(),
            sq_update: zeros,
        })
    }

    pub fn for_params(params: &ModelParams, rho: f64, eps: f64) -> Result<Self> {
        let shapes: Vec<&[usize]> = params.tensors().into_iter().map(|t| t.shape()).collect();
        Self::new(&shapes, rho, eps)
    }
}

/// One coordinate of the update. The step size uses E[Δx²] from *before* this step.
#[inline]
fn update(x: &mut f64, g: f64, eg2: &mut f64, edx2: &mut f64, rho: f64, eps: f64) {
    *eg2 = rho * *eg2 + (1.0 - rho) * g * g;
    let dx = -((*edx2 + eps).sqrt() / (*eg2 + eps).sqrt()) * g;
    *edx2 = rho * *edx2 + (1.0 - rho) * dx * dx;
    *x += dx;
}

fn check_layout(n_params: usize, n_grads: usize, state: &AdaDeltaState) -> Result<()> {
    if n_params != n_grads || n_params != state.sq_grad.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_params} parameter tensors, {n_grads} gradients, {} accumulators",
            state.sq_grad.len()
        )));
    }
    Ok(())
}

fn check_shape(p: &Tensor, other: &[usize]) -> Result<()> {
    if p.shape() != other {
        return Err(Error::Shape {
            op: "adadelta_step",
            left: p.shape().to_vec(),
            right: other.to_vec(),
        });
    }
    Ok(())
}

/// Applies one AdaDelta update in place.
pub fn adadelta_step(params: Vec<&mut Tensor>, grads: &[Tensor], state: &mut AdaDeltaState) -> Result<()> {
    check_layout(params.len(), grads.len(), state)?;
    for (p, g) in params.iter().zip(grads) {
        check_shape(p, g.shape())?;
    }
    for (p, g) in params.iter().zip(&state.sq_grad) {
        check_shape(p, g.shape())?;
    }
    let (rho, eps) = (state.rho, state.eps);
    for (((p, g), eg2), edx2) in params
        .into_iter()
        .zip(grads)
        .zip(&mut state.sq_grad)
        .zip(&mut state.sq_update)
    {
        for (((x, &gv), a), b) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(eg2.data_mut())
            .zip(edx2.data_mut())
        {
            update(x, gv, a, b, rho, eps);
        }
    }
    Ok(())
}

/// Same update as [`adadelta_step`] for model gradients, reading untouched
/// embedding rows as zero gradient without materializing dense tables.
pub fn apply_model_grads(params: &mut ModelParams, grads: &ModelGrads, state: &mut AdaDeltaState) -> Result<()> {
    let tensors = params.tensors_mut();
    check_layout(tensors.len(), grads.grads.len(), state)?;
    let (rho, eps) = (state.rho, state.eps);
    for (((p, g), eg2), edx2) in tensors
        .into_iter()
        .zip(&grads.grads)
        .zip(&mut state.sq_grad)
        .zip(&mut state.sq_update)
    {
        check_shape(p, eg2.shape())?;
        match g {
            ParamGrad::Dense(g) => {
                check_shape(p, g.shape())?;
                for (((x, &gv), a), b) in p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(eg2.data_mut())
                    .zip(edx2.data_mut())
                {
                    update(x, gv, a, b, rho, eps);
                }
            }
            ParamGrad::Rows(rows) => {
                let width = p.cols();
                for (r, ((xr, ar), br)) in p
                    .data_mut()
                    .chunks_mut(width.max(1))
                    .zip(eg2.data_mut().chunks_mut(width.max(1)))
                    .zip(edx2.data_mut().chunks_mut(width.max(1)))
                    .enumerate()
                {
                    match rows.get(&r) {
                        Some(gr) => {
                            for (((x, &gv), a), b) in xr.iter_mut().zip(gr).zip(ar).zip(br) {
                                update(x, gv, a, b, rho, eps);
                            }
                        }
                        None => {
                            // zero gradient: no movement, accumulators decay
                            for (a, b) in ar.iter_mut().zip(br) {
                                *a *= rho;
                                *b *= rho;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brcnn::{ModelDims, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RHO: f64 = 0.95;
    const EPS: f64 = 1e-6;

    /// Scalar AdaDelta written out longhand, one named intermediate per line.
    fn hand_trace(x0: f64, grads: &[f64]) -> Vec<f64> {
        let (mut x, mut eg2, mut edx2) = (x0, 0.0f64, 0.0f64);
        let mut xs = vec![];
        for &g in grads {
            let new_eg2 = RHO * eg2 + (1.0 - RHO) * (g * g);
            let rms_dx = (edx2 + EPS).sqrt();
            let rms_g = (new_eg2 + EPS).sqrt();
            let dx = -(rms_dx / rms_g) * g;
            let new_edx2 = RHO * edx2 + (1.0 - RHO) * (dx * dx);
            x += dx;
            eg2 = new_eg2;
            edx2 = new_edx2;
            xs.push(x);
        }
        xs
    }

    fn run_scalar(x0: f64, grads: &[f64]) -> Vec<f64> {
        let mut x = Tensor::scalar(x0);
        let mut st = AdaDeltaState::new(&[&[1]], RHO, EPS).unwrap();
        grads
            .iter()
            .map(|&g| {
                adadelta_step(vec![&mut x], &[Tensor::scalar(g)], &mut st).unwrap();
                x.data()[0]
            })
            .collect()
    }

    #[test]
    fn three_step_trace() {
        let grads = [0.5, -1.25, 2.0];
        let got = run_scalar(1.0, &grads);
        let want = hand_trace(1.0, &grads);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn ten_step_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x0 = rng.gen_range(-2.0..2.0);
            let grads: Vec<f64> = (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let got = run_scalar(x0, &grads);
            let want = hand_trace(x0, &grads);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_step_closed_form() {
        for g in [1e-3, 0.3, -4.0] {
            let got = run_scalar(0.0, &[g])[0];
            let want = -(EPS.sqrt() / ((1.0 - RHO) * g * g + EPS).sqrt()) * g;
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_only_decays() {
        let mut x = Tensor::vector(vec![1.0, -2.0]);
        let mut st = AdaDeltaState::new(&[&[2]], RHO, EPS).unwrap();
        adadelta_step(vec![&mut x], &[Tensor::vector(vec![0.4, 0.1])], &mut st).unwrap();
        let (before_x, g2, dx2) = (x.clone(), st.sq_grad[0].clone(), st.sq_update[0].clone());
        adadelta_step(vec![&mut x], &[Tensor::zeros(&[2])], &mut st).unwrap();
        assert_eq!(x, before_x);
        for (a, b) in st.sq_grad[0].data().iter().zip(g2.data()) {
            assert_eq!(*a, RHO * b);
        }
        for (a, b) in st.sq_update[0].data().iter().zip(dx2.data()) {
            assert_eq!(*a, RHO * b);
        }
    }

    #[test]
    fn shape_and_config_errors() {
        let mut x = Tensor::zeros(&[2]);
        let mut st = AdaDeltaState::new(&[&[2]], RHO, EPS).unwrap();
        assert!(matches!(
            adadelta_step(vec![&mut x], &[Tensor::zeros(&[3])], &mut st),
            Err(Error::Shape { .. })
        ));
        assert!(adadelta_step(vec![&mut x], &[], &mut st).is_err());
        assert!(AdaDeltaState::new(&[&[2]], 1.0, EPS).is_err());
        assert!(AdaDeltaState::new(&[&[2]], RHO, 0.0).is_err());
    }

    #[test]
    fn sparse_rows_match_dense_update() {
        let dims = ModelDims {
            word_dim: 3,
            rel_dim: 2,
            conv_dim: 2,
        };
        let params = ModelParams::init(&dims, 5, 4, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut grads = ModelGrads::zeros_like(&params);
        for g in &mut grads.grads {
            match g {
                ParamGrad::Dense(t) => t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0)),
                ParamGrad::Rows(rows) => {
                    rows.insert(1, vec![0.5; 3]);
                    rows.insert(3, vec![-0.25; 3]);
                }
            }
        }
        // rel_table rows are 2 wide
        if let ParamGrad::Rows(rows) = &mut grads.grads[1] {
            for v in rows.values_mut() {
                v.truncate(2);
            }
        }
        let (mut sparse, mut dense) = (params.clone(), params.clone());
        let mut s1 = AdaDeltaState::for_params(&params, RHO, EPS).unwrap();
        let mut s2 = s1.clone();
        for _ in 0..3 {
            apply_model_grads(&mut sparse, &grads, &mut s1).unwrap();
            let d = grads.to_dense(&dense);
            adadelta_step(dense.tensors_mut(), &d, &mut s2).unwrap();
        }
        assert_eq!(sparse, dense);
        assert_eq!(s1, s2);
    }
}
