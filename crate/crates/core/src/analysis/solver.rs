//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with central
//! difference Jacobians.

use nalgebra::{DMatrix, DVector};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// RMS of the residuals at `params`.
    pub residual_rms: f64,
}

fn residuals(model: &impl Fn(&[f64], f64) -> f64, p: &[f64], xs: &[f64], ys: &[f64]) -> DVector<f64> {
    DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| model(p, x) - y))
}

fn jacobian(model: &impl Fn(&[f64], f64) -> f64, p: &[f64], scales: &[f64], xs: &[f64]) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(xs.len(), p.len());
    let mut probe = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * (p[k].abs() + scales[k]);
        probe[k] = p[k] + h;
        let up: Vec<f64> = xs.iter().map(|&x| model(&probe, x)).collect();
        probe[k] = p[k] - h;
        for (i, &x) in xs.iter().enumerate() {
            jac[(i, k)] = (up[i] - model(&probe, x)) / (2.0 * h);
        }
        probe[k] = p[k];
    }
    jac
}

/// Minimises `Σ (model(p, xᵢ) − yᵢ)²` from `p0`. `scales` gives a typical
/// magnitude per parameter, used for finite-difference steps and for the
/// relative step test when a parameter is near zero.
pub fn least_squares(
    model: impl Fn(&[f64], f64) -> f64,
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
    scales: &[f64],
) -> Solution {
    let mut p = p0.to_vec();
    let mut r = residuals(&model, &p, xs, ys);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS && !converged {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&model, &p, scales, xs);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        loop {
            let mut damped = jtj.clone();
            for k in 0..p.len() {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break;
                }
                continue;
            };
            let rel = step
                .iter()
                .zip(&p)
                .zip(scales)
                .map(|((d, q), s)| d.abs() / (q.abs() + s))
                .fold(0.0, f64::max);
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(q, d)| q + d).collect();
            let r_trial = residuals(&model, &trial, xs, ys);
            let cost_trial = r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial <= cost {
                p = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda * 0.3).max(1e-12);
                converged = rel < STEP_TOLERANCE;
                break;
            }
            if rel < STEP_TOLERANCE {
                // No representable improvement remains.
                converged = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                converged = true;
                break;
            }
        }
    }
    Solution {
        residual_rms: (cost / xs.len().max(1) as f64).sqrt(),
        params: p,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        let model = |p: &[f64], x: f64| p[0] * (-x / p[1]).exp();
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| model(&[3.0, 2.5], x)).collect();
        let s = least_squares(model, &xs, &ys, &[1.0, 1.0], &[1.0, 1.0]);
        assert!(s.converged);
        assert!((s.params[0] - 3.0).abs() < 1e-10);
        assert!((s.params[1] - 2.5).abs() < 1e-10);
        assert!(s.residual_rms < 1e-12);
    }

    #[test]
    fn linear_model_matches_normal_equations() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.1, 2.9, 5.2, 7.1, 8.8];
        let s = least_squares(|p, x| p[0] + p[1] * x, &xs, &ys, &[0.0, 0.0], &[1.0, 1.0]);
        // Closed-form slope and intercept.
        let n = xs.len() as f64;
        let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        assert!((s.params[1] - slope).abs() < 1e-9);
        assert!((s.params[0] - icpt).abs() < 1e-9);
    }
}
