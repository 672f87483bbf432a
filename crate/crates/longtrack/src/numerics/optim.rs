//! SGD with classical momentum and a finite-difference gradient checker.

use crate::{Error, Result};

/// Velocity buffer plus hyperparameters for SGD with momentum.
///
/// The update is the classical form `v <- mu*v + g`, `theta <- theta - lr*v`.
#[derive(Debug, Clone)]
pub struct SgdMomentumState {
    velocity: Vec<f64>,
    learning_rate: f64,
    momentum: f64,
}

impl SgdMomentumState {
    pub fn new(param_len: usize, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Invalid(format!(
                "momentum must be in [0,1), got {momentum}"
            )));
        }
        Ok(SgdMomentumState {
            velocity: vec![0.0; param_len],
            learning_rate,
            momentum,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
    pub fn momentum(&self) -> f64 {
        self.momentum
    }
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

/// One momentum step, in place over `params`.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut SgdMomentumState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::Shape(format!(
            "sgd step over {} params, {} grads, {} velocity entries",
            params.len(),
            grads.len(),
            state.velocity.len()
        )));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocity) {
        *v = state.momentum * *v + g;
        *p -= state.learning_rate * *v;
    }
    Ok(())
}

/// Max relative error between `analytic_grad` and the central finite
/// difference of `f`, coordinate by coordinate:
/// `|g_fd - g_an| / max(1e-8, |g_fd| + |g_an|)`.
pub fn finite_diff_check<F>(
    f: F,
    params: &[f64],
    analytic_grad: &[f64],
    eps: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if params.len() != analytic_grad.len() {
        return Err(Error::Shape(format!(
            "{} params vs {} gradient entries",
            params.len(),
            analytic_grad.len()
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        work[i] = params[i] + eps;
        let hi = f(&work);
        work[i] = params[i] - eps;
        let lo = f(&work);
        work[i] = params[i];
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at perturbed coordinate {i}"
            )));
        }
        let fd = (hi - lo) / (2.0 * eps);
        let an = analytic_grad[i];
        let rel = (fd - an).abs() / (1e-8f64).max(fd.abs() + an.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_momentum_is_vanilla_sgd() {
        let mut params = vec![1.0];
        let mut state = SgdMomentumState::new(1, 0.01, 0.0).unwrap();
        sgd_momentum_step(&mut params, &[10.0], &mut state).unwrap();
        assert!((params[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut params = vec![0.5, -0.25];
        let mut state = SgdMomentumState::new(2, 0.1, 0.9).unwrap();
        sgd_momentum_step(&mut params, &[0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![0.5, -0.25]);
    }

    #[test]
    fn momentum_recurrence_over_two_steps() {
        // v1 = 1, step 0.01; v2 = 0.9*1 + 1 = 1.9, step 0.019
        let mut params = vec![0.0];
        let mut state = SgdMomentumState::new(1, 0.01, 0.9).unwrap();
        sgd_momentum_step(&mut params, &[1.0], &mut state).unwrap();
        assert!((params[0] - (-0.01)).abs() < 1e-15);
        sgd_momentum_step(&mut params, &[1.0], &mut state).unwrap();
        assert!((params[0] - (-0.029)).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut params = vec![0.0; 3];
        let mut state = SgdMomentumState::new(3, 0.01, 0.9).unwrap();
        assert!(sgd_momentum_step(&mut params, &[0.0; 2], &mut state).is_err());
    }

    #[test]
    fn finite_diff_on_square() {
        let f = |x: &[f64]| x[0] * x[0];
        let err = finite_diff_check(f, &[3.0], &[6.0], 1e-6).unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn finite_diff_flags_wrong_gradient() {
        let f = |x: &[f64]| x[0] * x[0];
        let err = finite_diff_check(f, &[3.0], &[5.0], 1e-6).unwrap();
        // |6 - 5| / (6 + 5)
        assert!((err - 1.0 / 11.0).abs() < 1e-6, "err = {err}");
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let f = |x: &[f64]| (x[0] - 1.0).ln();
        assert!(finite_diff_check(f, &[0.5], &[0.0], 1e-3).is_err());
    }
}
