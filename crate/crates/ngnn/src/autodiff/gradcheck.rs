//! Central finite-difference gradient checking.
//!
//! Everything here evaluates a black-box scalar function; nothing inspects
//! the tape, so these utilities stay an independent oracle for the analytic
//! gradients the tape produces.

use super::tensor::Tensor;

/// Default perturbation step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Numeric gradient of `f` w.r.t. every entry of `inputs` via central
/// differences: (f(x+h) - f(x-h)) / 2h.
pub fn finite_diff<F>(mut f: F, inputs: &[Tensor], step: f64) -> Vec<Vec<f64>>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    #[allow(clippy::needless_range_loop)]
    for ti in 0..inputs.len() {
        let mut g = vec![0.0; inputs[ti].numel()];
        for ei in 0..inputs[ti].numel() {
            let orig = work[ti].data()[ei];
            work[ti].data_mut()[ei] = orig + step;
            let plus = f(&work);
            work[ti].data_mut()[ei] = orig - step;
            let minus = f(&work);
            work[ti].data_mut()[ei] = orig;
            g[ei] = (plus - minus) / (2.0 * step);
        }
        grads.push(g);
    }
    grads
}

/// Worst relative error between an analytic and a numeric gradient.
///
/// Per entry: |a - n| / max(|a|, |n|, floor). The floor keeps near-zero
/// entries, where the central-difference truncation error dominates, from
/// reporting spurious relative errors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // f(x) = sum(x^2), grad = 2x.
        let x = Tensor::column(vec![0.3, -0.7, 1.1]);
        let grads = finite_diff(
            |ins| ins[0].data().iter().map(|v| v * v).sum(),
            std::slice::from_ref(&x),
            DEFAULT_STEP,
        );
        let expected: Vec<f64> = x.data().iter().map(|v| 2.0 * v).collect();
        let err = max_relative_error(&expected, &grads[0], 1e-8);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn relative_error_floor_suppresses_noise() {
        let err = max_relative_error(&[0.0], &[1e-12], 1e-6);
        assert!(err < 1e-5);
    }
}
