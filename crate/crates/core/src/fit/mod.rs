//! Damped least-squares (Levenberg–Marquardt) engine with analytic Jacobians
//! for the models used throughout the toolkit.

mod models;
mod seed;

pub use models::{Bound, FitModel};
pub use seed::seed_multi_lorentzian;

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error)]
pub enum FitError<S: Real> {
    #[error("x, y and sigma must have equal lengths > n_params")]
    DimensionMismatch,
    #[error("sigma must be strictly positive")]
    InvalidSigma,
    #[error("Jacobian is rank-deficient and damping cannot proceed")]
    SingularJacobian,
    #[error("not converged after {} iterations (chi2_reduced = {})", .0.n_iterations, .0.chi2_reduced)]
    NotConverged(Box<FitResult<S>>),
    #[error("fewer than {needed} local minima found in spectrum")]
    TooFewDips { needed: usize },
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<S> {
    pub model_id: String,
    pub params: Vec<S>,
    /// Covariance matrix (n×n, row-major) from (JᵀWJ)⁻¹ at the solution.
    pub covariance: Vec<S>,
    pub chi2_reduced: S,
    pub n_iterations: usize,
    pub converged: bool,
}

impl<S: Real> FitResult<S> {
    /// 1σ uncertainty of parameter `i`.
    pub fn sigma(&self, i: usize) -> S {
        let n = self.params.len();
        self.covariance[i * n + i].max(S::zero()).sqrt()
    }
}

const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;

/// Weighted Levenberg–Marquardt minimization of Σ((y−f(x;p))/σ)².
///
/// Damping: λ₀ = 1e−3·max(diag JᵀWJ), ×2 on a rejected step, ÷3 on an
/// accepted one. Bounds are enforced by clamping proposed steps.
pub fn lm_fit<S: Real>(
    model: &FitModel,
    x: &[S],
    y: &[S],
    sigma: &[S],
    p0: &[S],
) -> Result<FitResult<S>, FitError<S>> {
    lm_fit_bounded(model, x, y, sigma, p0, &model.default_bounds())
}

pub fn lm_fit_bounded<S: Real>(
    model: &FitModel,
    x: &[S],
    y: &[S],
    sigma: &[S],
    p0: &[S],
    bounds: &[Bound<S>],
) -> Result<FitResult<S>, FitError<S>> {
    let n = model.n_params();
    let m = x.len();
    if y.len() != m || sigma.len() != m || p0.len() != n || bounds.len() != n || m <= n {
        return Err(FitError::DimensionMismatch);
    }
    if sigma.iter().any(|&s| !(s > S::zero())) {
        return Err(FitError::InvalidSigma);
    }

    let weights: Vec<S> = sigma.iter().map(|&s| S::one() / (s * s)).collect();
    let mut p: Vec<S> = p0
        .iter()
        .zip(bounds)
        .map(|(&v, b)| b.clamp(v))
        .collect();

    let cost_of = |p: &[S]| -> S {
        x.iter()
            .zip(y)
            .zip(&weights)
            .map(|((&xi, &yi), &wi)| {
                let r = yi - model.eval(xi, p);
                wi * r * r
            })
            .sum()
    };

    let mut cost = cost_of(&p);
    let mut jac = vec![S::zero(); m * n];
    let mut lambda = S::zero();
    let mut n_iterations = 0;
    let mut converged = false;

    for iter in 0..MAX_ITERATIONS {
        n_iterations = iter + 1;

        // J, JᵀWJ and JᵀW·r at the current point
        let mut row = vec![S::zero(); n];
        let mut a = vec![S::zero(); n * n];
        let mut g = vec![S::zero(); n];
        for (i, &xi) in x.iter().enumerate() {
            model.jacobian_row(xi, &p, &mut row);
            jac[i * n..(i + 1) * n].copy_from_slice(&row);
            let r = y[i] - model.eval(xi, &p);
            let w = weights[i];
            for j in 0..n {
                g[j] = g[j] + w * row[j] * r;
                for k in j..n {
                    a[j * n + k] = a[j * n + k] + w * row[j] * row[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                a[j * n + k] = a[k * n + j];
            }
        }

        let max_diag = (0..n).map(|j| a[j * n + j]).fold(S::zero(), S::max);
        if !(max_diag > S::zero()) {
            return Err(FitError::SingularJacobian);
        }
        if lambda == S::zero() {
            lambda = S::of(1e-3);
        }

        // equilibrate: Â = D^{-1/2}·A·D^{-1/2} with D = diag(A), so damping
        // λ on the unit diagonal scales each parameter by its own curvature
        // (parameters here span ~10 orders of magnitude)
        let floor = S::of(1e-30) * max_diag;
        let scale: Vec<S> = (0..n)
            .map(|j| a[j * n + j].max(floor).sqrt())
            .collect();
        let mut a_hat = vec![S::zero(); n * n];
        for j in 0..n {
            for k in 0..n {
                a_hat[j * n + k] = a[j * n + k] / (scale[j] * scale[k]);
            }
        }
        let g_hat: Vec<S> = (0..n).map(|j| g[j] / scale[j]).collect();

        // inner loop: grow damping until a step is accepted
        let mut accepted = false;
        for _ in 0..64 {
            let mut damped = a_hat.clone();
            for j in 0..n {
                damped[j * n + j] = damped[j * n + j] + lambda;
            }
            let delta = match cholesky_solve(&damped, &g_hat, n) {
                Some(d) => d.iter().zip(&scale).map(|(&dh, &s)| dh / s).collect::<Vec<S>>(),
                None => {
                    lambda = lambda * S::of(2.0);
                    continue;
                }
            };
            let trial: Vec<S> = p
                .iter()
                .zip(&delta)
                .zip(bounds)
                .map(|((&pi, &di), b)| b.clamp(pi + di))
                .collect();
            let trial_cost = cost_of(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let step_rel = p
                    .iter()
                    .zip(&trial)
                    .map(|(&a, &b)| ((b - a) / a.abs().max(S::one())).abs())
                    .fold(S::zero(), S::max);
                let cost_rel = if cost > S::zero() {
                    (cost - trial_cost) / cost
                } else {
                    S::zero()
                };
                p = trial;
                cost = trial_cost;
                lambda = lambda / S::of(3.0);
                accepted = true;
                if step_rel < S::of(STEP_TOL) && cost_rel < S::of(COST_TOL) {
                    converged = true;
                }
                break;
            }
            lambda = lambda * S::of(2.0);
        }
        if !accepted {
            // damping saturated; treat the current point as stationary
            converged = true;
        }
        if converged {
            break;
        }
    }

    let result = finalize(model, x, y, &weights, &jac, p, cost, n_iterations, converged);
    if converged {
        Ok(result)
    } else {
        Err(FitError::NotConverged(Box::new(result)))
    }
}

#[allow(clippy::too_many_arguments)]
fn finalize<S: Real>(
    model: &FitModel,
    x: &[S],
    _y: &[S],
    weights: &[S],
    _jac: &[S],
    p: Vec<S>,
    cost: S,
    n_iterations: usize,
    converged: bool,
) -> FitResult<S> {
    let n = p.len();
    let m = x.len();
    // rebuild JᵀWJ at the final point
    let mut a = vec![S::zero(); n * n];
    let mut row = vec![S::zero(); n];
    for (i, &xi) in x.iter().enumerate() {
        model.jacobian_row(xi, &p, &mut row);
        for j in 0..n {
            for k in 0..n {
                a[j * n + k] = a[j * n + k] + weights[i] * row[j] * row[k];
            }
        }
    }
    // invert through the equilibrated form for conditioning
    let max_diag = (0..n).map(|j| a[j * n + j]).fold(S::of(1.0), S::max);
    let floor = S::of(1e-30) * max_diag;
    let scale: Vec<S> = (0..n).map(|j| a[j * n + j].max(floor).sqrt()).collect();
    let mut a_hat = vec![S::zero(); n * n];
    for j in 0..n {
        for k in 0..n {
            a_hat[j * n + k] = a[j * n + k] / (scale[j] * scale[k]);
        }
    }
    let inv_hat = invert_spd(&a_hat, n).unwrap_or_else(|| {
        // ridge fallback for boundary-stuck or degenerate fits
        let mut ridged = a_hat.clone();
        for j in 0..n {
            ridged[j * n + j] = ridged[j * n + j] + S::of(1e-12);
        }
        invert_spd(&ridged, n).unwrap_or_else(|| vec![S::infinity(); n * n])
    });
    let mut covariance = vec![S::zero(); n * n];
    for j in 0..n {
        for k in 0..n {
            covariance[j * n + k] = inv_hat[j * n + k] / (scale[j] * scale[k]);
        }
    }
    let dof = (m - n).max(1);
    FitResult {
        model_id: model.model_id(),
        params: p,
        covariance,
        chi2_reduced: cost / S::of(dof as f64),
        n_iterations,
        converged,
    }
}

/// Solve A·x = b for symmetric positive-definite A (row-major n×n).
fn cholesky_solve<S: Real>(a: &[S], b: &[S], n: usize) -> Option<Vec<S>> {
    let l = cholesky(a, n)?;
    // forward substitution L·y = b
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s = s - l[i * n + j] * y[j];
        }
        y[i] = s / l[i * n + i];
    }
    // back substitution Lᵀ·x = y
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s = s - l[j * n + i] * x[j];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

fn cholesky<S: Real>(a: &[S], n: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > S::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn invert_spd<S: Real>(a: &[S], n: usize) -> Option<Vec<S>> {
    let mut inv = vec![S::zero(); n * n];
    for col in 0..n {
        let mut e = vec![S::zero(); n];
        e[col] = S::one();
        let x = cholesky_solve(a, &e, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

/// Full Jacobian matrix (m×n, row-major) of a model at `p`.
pub fn jacobian<S: Real>(model: &FitModel, x: &[S], p: &[S]) -> Vec<S> {
    let n = model.n_params();
    let mut out = vec![S::zero(); x.len() * n];
    let mut row = vec![S::zero(); n];
    for (i, &xi) in x.iter().enumerate() {
        model.jacobian_row(xi, p, &mut row);
        out[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fd_jacobian_check(model: &FitModel, p: &[f64], x_range: (f64, f64), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = model.n_params();
        for _ in 0..100 {
            let x = rng.gen_range(x_range.0..x_range.1);
            let mut analytic = vec![0.0; n];
            model.jacobian_row(x, p, &mut analytic);
            for j in 0..n {
                let h = if p[j] != 0.0 { 1e-6 * p[j].abs() } else { 1e-9 };
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[j] += h;
                pm[j] -= h;
                let fd = (model.eval(x, &pp) - model.eval(x, &pm)) / (2.0 * h);
                let scale = analytic[j].abs().max(fd.abs()).max(1e-30);
                assert!(
                    (analytic[j] - fd).abs() / scale < 1e-5
                        || (analytic[j] - fd).abs() < 1e-12,
                    "{model:?} param {j}: analytic {} vs fd {}",
                    analytic[j],
                    fd
                );
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        fd_jacobian_check(
            &FitModel::MultiLorentzian(2),
            &[1000.0, 3.42e9, 110e6, 0.2, 3.52e9, 120e6, 0.25],
            (3.2e9, 3.8e9),
            1,
        );
        fd_jacobian_check(&FitModel::Saturation, &[3.6e6, 0.5], (0.05, 10.0), 2);
        fd_jacobian_check(&FitModel::ExpDecay, &[0.8, 17e-6, 0.1], (0.0, 1e-4), 3);
        fd_jacobian_check(
            &FitModel::RabiTwoTone,
            &[0.5, 0.3, 120e-9, 20e6, 0.3, 0.15, 150e-9, 35e6, -0.4],
            (0.0, 5e-7),
            4,
        );
    }

    #[test]
    fn lorentzian_center_derivative_zero_at_center() {
        let model = FitModel::MultiLorentzian(1);
        let p = [1000.0, 3.47e9, 110e6, 0.2];
        let mut row = vec![0.0; 4];
        model.jacobian_row(3.47e9, &p, &mut row);
        assert_eq!(row[1], 0.0);
    }

    #[test]
    fn exp_decay_amp_derivative_at_zero() {
        let model = FitModel::ExpDecay;
        let mut row = vec![0.0; 3];
        model.jacobian_row(0.0, &[2.0, 5.0, 1.0], &mut row);
        assert_eq!(row[0], 1.0);
    }

    fn lorentzian_data(noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let truth = vec![1000.0, 3.42e9, 110e6, 0.2, 3.52e9, 110e6, 0.2];
        let model = FitModel::MultiLorentzian(2);
        let x: Vec<f64> = (0..400)
            .map(|i| 3.2e9 + 0.6e9 * i as f64 / 399.0)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let f = model.eval(xi, &truth);
                f * (1.0 + noise * normal.sample(&mut rng))
            })
            .collect();
        let sigma: Vec<f64> = y.iter().map(|&v| (noise * v).max(1e-9)).collect();
        (x, y, sigma, truth)
    }

    #[test]
    fn double_lorentzian_round_trip() {
        let (x, y, sigma, truth) = lorentzian_data(0.01, 7);
        let p0 = vec![950.0, 3.40e9, 90e6, 0.15, 3.54e9, 130e6, 0.25];
        let model = FitModel::MultiLorentzian(2);
        let fit = lm_fit(&model, &x, &y, &sigma, &p0).unwrap();
        assert!(fit.converged);
        // statistical sigma on each center is ~0.75 MHz for this noise level
        assert!((fit.params[1] - truth[1]).abs() < 2.5e6, "c1 {}", fit.params[1]);
        assert!((fit.params[4] - truth[4]).abs() < 2.5e6, "c2 {}", fit.params[4]);
        assert!((fit.params[2] / truth[2] - 1.0).abs() < 0.05);
        assert!((fit.params[5] / truth[5] - 1.0).abs() < 0.05);
    }

    #[test]
    fn exact_data_from_truth_converges_fast() {
        let truth = vec![1000.0, 3.47e9, 110e6, 0.3];
        let model = FitModel::MultiLorentzian(1);
        let x: Vec<f64> = (0..100)
            .map(|i| 3.2e9 + 0.5e9 * i as f64 / 99.0)
            .collect();
        let y: Vec<f64> = x.iter().map(|&xi| model.eval(xi, &truth)).collect();
        let sigma = vec![1.0; x.len()];
        let fit = lm_fit(&model, &x, &y, &sigma, &truth).unwrap();
        assert!(fit.converged);
        assert!(fit.n_iterations <= 2, "took {}", fit.n_iterations);
        assert!(fit.chi2_reduced < 1e-15);
    }

    #[test]
    fn saturation_ratio_recovery() {
        // two datasets whose I_sat ratio is 3.5 and P_sat ratio is 1/5
        let model = FitModel::Saturation;
        let gen = |i_sat: f64, p_sat: f64, seed: u64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let x: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let y: Vec<f64> = x
                .iter()
                .map(|&p| i_sat / (1.0 + p_sat / p) * (1.0 + 0.03 * normal.sample(&mut rng)))
                .collect();
            let sigma: Vec<f64> = y.iter().map(|&v| 0.03 * v.abs().max(1.0)).collect();
            (x, y, sigma)
        };
        let (x1, y1, s1) = gen(3.5e6, 0.4, 11);
        let (x2, y2, s2) = gen(1.0e6, 2.0, 12);
        let f1 = lm_fit(&model, &x1, &y1, &s1, &[2e6, 1.0]).unwrap();
        let f2 = lm_fit(&model, &x2, &y2, &s2, &[2e6, 1.0]).unwrap();
        let i_ratio = f1.params[0] / f2.params[0];
        let p_ratio = f2.params[1] / f1.params[1];
        assert!((i_ratio / 3.5 - 1.0).abs() < 0.10, "i_ratio {i_ratio}");
        assert!((p_ratio / 5.0 - 1.0).abs() < 0.10, "p_ratio {p_ratio}");
    }

    #[test]
    fn rescaling_invariance() {
        let (x, y, sigma, _) = lorentzian_data(0.01, 3);
        let model = FitModel::MultiLorentzian(2);
        let p0 = vec![950.0, 3.40e9, 90e6, 0.15, 3.54e9, 130e6, 0.25];
        let f1 = lm_fit(&model, &x, &y, &sigma, &p0).unwrap();
        let k = 7.3;
        let y2: Vec<f64> = y.iter().map(|v| v * k).collect();
        let s2: Vec<f64> = sigma.iter().map(|v| v * k).collect();
        let mut p0k = p0.clone();
        p0k[0] *= k;
        let f2 = lm_fit(&model, &x, &y2, &s2, &p0k).unwrap();
        assert_relative_eq!(f2.params[0] / k, f1.params[0], max_relative = 1e-8);
        for j in 1..7 {
            assert_relative_eq!(f2.params[j], f1.params[j], max_relative = 1e-8);
        }
    }

    #[test]
    fn covariance_sigma_matches_scatter() {
        // fitted-center 1σ from the covariance vs scatter over 200 realizations
        let model = FitModel::MultiLorentzian(1);
        let truth = vec![1000.0, 3.47e9, 110e6, 0.2];
        let x: Vec<f64> = (0..200)
            .map(|i| 3.2e9 + 0.54e9 * i as f64 / 199.0)
            .collect();
        let mut centers = Vec::new();
        let mut reported = 0.0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let y: Vec<f64> = x
                .iter()
                .map(|&xi| model.eval(xi, &truth) + 5.0 * normal.sample(&mut rng))
                .collect();
            let sigma = vec![5.0; x.len()];
            let fit = lm_fit(&model, &x, &y, &sigma, &truth).unwrap();
            centers.push(fit.params[1]);
            reported = fit.sigma(1);
        }
        let mean = centers.iter().sum::<f64>() / centers.len() as f64;
        let var = centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>()
            / (centers.len() - 1) as f64;
        let scatter = var.sqrt();
        let ratio = reported / scatter;
        assert!((0.666..1.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dimension_mismatch() {
        let model = FitModel::Saturation;
        let err = lm_fit(&model, &[1.0, 2.0], &[1.0], &[1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(err, Err(FitError::DimensionMismatch)));
    }

    #[test]
    fn invalid_sigma() {
        let model = FitModel::Saturation;
        let err = lm_fit(
            &model,
            &[1.0, 2.0, 3.0],
            &[1.0, 1.5, 1.8],
            &[1.0, 0.0, 1.0],
            &[1.0, 1.0],
        );
        assert!(matches!(err, Err(FitError::InvalidSigma)));
    }
}
