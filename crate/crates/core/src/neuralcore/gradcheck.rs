use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Denominators below this are clamped so near-zero gradients compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (tensor position, coordinate) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `f` around `params`,
/// coordinate by coordinate.
pub fn grad_check<F>(
    params: &[Tensor],
    analytic: &[Tensor],
    step: f64,
    tolerance: f64,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            analytic.len()
        )));
    }
    for (p, a) in params.iter().zip(analytic) {
        if p.shape() != a.shape() {
            return Err(Error::Shape {
                op: "grad_check",
                left: p.shape().to_vec(),
                right: a.shape().to_vec(),
            });
        }
    }
    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        tolerance,
        passed: true,
    };
    for t in 0..work.len() {
        for k in 0..work[t].len() {
            let orig = work[t].data()[k];
            work[t].data_mut()[k] = orig + step;
            let plus = f(&work)?;
            work[t].data_mut()[k] = orig - step;
            let minus = f(&work)?;
            work[t].data_mut()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "objective is not finite near tensor {t} coordinate {k}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[t].data()[k], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((t, k));
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}
