//! Maximum-likelihood logistic regression via Newton/IRLS with step-halving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats::{bernoulli_loglik_term, expit};

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const PROB_EDGE: f64 = 1e-10;
const DIVERGENCE_NORM: f64 = 15.0;

/// A fitted logistic regression model. Coefficients start with the intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedLogit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    /// Fitted probabilities reached the working range boundary while the
    /// coefficient norm diverged; estimates returned as-is.
    pub separation_detected: bool,
}

impl FittedLogit {
    /// Linear predictor for one design row (without intercept column).
    #[inline]
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len() + 1, self.coefficients.len());
        let mut eta = self.coefficients[0];
        for (b, x) in self.coefficients[1..].iter().zip(row) {
            eta += b * x;
        }
        eta
    }
}

/// Fits `response ~ intercept + design` by IRLS, halving the step when the
/// log-likelihood would decrease. Converges when the gradient max-norm
/// drops below 1e-8; iteration cap 100.
pub fn fit_logistic(design: &Matrix, response: &[u8]) -> Result<FittedLogit> {
    let (fit, _trace) = fit_logistic_traced(design, response)?;
    Ok(fit)
}

/// Like [`fit_logistic`] but also returns the per-iteration log-likelihoods.
pub fn fit_logistic_traced(design: &Matrix, response: &[u8]) -> Result<(FittedLogit, Vec<f64>)> {
    let n = design.rows();
    let p = design.cols();
    let d = p + 1;
    if response.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: response.len(),
        });
    }
    if n <= p {
        return Err(Error::Invalid(format!(
            "logistic fit needs more rows ({n}) than predictors ({p})"
        )));
    }

    let mut beta = vec![0.0; d];
    let mut eta = vec![0.0; n];
    let mut ll = loglik(&eta, response);
    let mut trace = vec![ll];
    let mut grad = vec![0.0; d];
    let mut iterations = 0;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        let probs: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();

        gradient(design, response, &probs, &mut grad);
        let grad_norm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if grad_norm < GRAD_TOL {
            break;
        }

        // Newton direction from the weighted normal equations.
        let mut hess = vec![0.0; d * d];
        for i in 0..n {
            let w = (probs[i] * (1.0 - probs[i])).max(1e-12);
            let row = design.row(i);
            for a in 0..d {
                let xa = if a == 0 { 1.0 } else { row[a - 1] };
                for b in a..d {
                    let xb = if b == 0 { 1.0 } else { row[b - 1] };
                    hess[a * d + b] += w * xa * xb;
                }
            }
        }
        let mut step = grad.clone();
        solve_spd(&mut hess, &mut step, d)?;

        // Step-halving keeps the log-likelihood non-decreasing.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + scale * s)
                .collect();
            let cand_eta = linear_predictors(design, &cand);
            let cand_ll = loglik(&cand_eta, response);
            if cand_ll >= ll - 1e-12 {
                beta = cand;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        trace.push(ll);
        if !accepted {
            break;
        }
    }

    let probs: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
    gradient(design, response, &probs, &mut grad);
    let grad_norm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));

    let at_edge = probs
        .iter()
        .any(|&p| p < PROB_EDGE || p > 1.0 - PROB_EDGE);
    let coef_norm = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let separation_detected = at_edge && coef_norm > DIVERGENCE_NORM;
    let converged = grad_norm < GRAD_TOL && !separation_detected;

    Ok((
        FittedLogit {
            coefficients: beta,
            converged,
            iterations,
            final_gradient_norm: grad_norm,
            separation_detected,
        },
        trace,
    ))
}

/// Fitted probabilities for new rows; entries strictly inside (0, 1).
pub fn predict_prob(fit: &FittedLogit, design: &Matrix) -> Result<Vec<f64>> {
    if design.cols() + 1 != fit.coefficients.len() {
        return Err(Error::Dimension {
            expected: fit.coefficients.len() - 1,
            found: design.cols(),
        });
    }
    Ok((0..design.rows())
        .map(|i| {
            expit(fit.linear_predictor(design.row(i)))
                .max(1e-300)
                .min(1.0 - 1e-16)
        })
        .collect())
}

/// Bernoulli log-likelihood at the given linear predictors.
pub fn loglik(eta: &[f64], response: &[u8]) -> f64 {
    eta.iter()
        .zip(response)
        .map(|(&e, &y)| bernoulli_loglik_term(e, y as f64))
        .sum()
}

pub fn linear_predictors(design: &Matrix, beta: &[f64]) -> Vec<f64> {
    (0..design.rows())
        .map(|i| {
            let mut eta = beta[0];
            for (b, x) in beta[1..].iter().zip(design.row(i)) {
                eta += b * x;
            }
            eta
        })
        .collect()
}

fn gradient(design: &Matrix, response: &[u8], probs: &[f64], grad: &mut [f64]) {
    grad.fill(0.0);
    for i in 0..design.rows() {
        let r = response[i] as f64 - probs[i];
        grad[0] += r;
        for (g, x) in grad[1..].iter_mut().zip(design.row(i)) {
            *g += r * x;
        }
    }
}

/// Solves `A x = b` in place for a symmetric positive-definite `A` stored in
/// the upper triangle; `b` is overwritten with the solution.
pub(crate) fn solve_spd(a: &mut [f64], b: &mut [f64], d: usize) -> Result<()> {
    // Cholesky A = L L^T, filling the lower triangle.
    let scale = (0..d).fold(0.0f64, |acc, i| acc.max(a[i * d + i].abs()));
    for j in 0..d {
        for i in j..d {
            // upper-triangle storage: element (j, i)
            let mut sum = a[j * d + i];
            for k in 0..j {
                sum -= a[i * d + k].mul_add(a[j * d + k], 0.0);
            }
            if i == j {
                if sum <= scale * 1e-12 {
                    return Err(Error::RankDeficient { pivot: j });
                }
                a[j * d + j] = sum.sqrt();
            } else {
                a[i * d + j] = sum / a[j * d + j];
            }
        }
    }
    // Forward then backward substitution.
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= a[i * d + k] * b[k];
        }
        b[i] = sum / a[i * d + i];
    }
    for i in (0..d).rev() {
        let mut sum = b[i];
        for k in i + 1..d {
            sum -= a[k * d + i] * b[k];
        }
        b[i] = sum / a[i * d + i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn intercept_only_mean_half_gives_zero() {
        let design = Matrix::zeros(4, 0);
        let fit = fit_logistic(&design, &[0, 1, 0, 1]).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-9);
    }

    #[test]
    fn intercept_only_mean_three_quarters_gives_log3() {
        let design = Matrix::zeros(8, 0);
        let fit = fit_logistic(&design, &[1, 1, 1, 0, 1, 1, 1, 0]).unwrap();
        assert!((fit.coefficients[0] - 3f64.ln()).abs() < 1e-8);
        assert!((fit.coefficients[0] - 1.0986).abs() < 1e-4);
    }

    fn synthetic(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = crate::rng::stream(seed, &[1]);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let design = Matrix::from_rows(&rows).unwrap();
        let response: Vec<u8> = (0..n)
            .map(|i| {
                let eta = 0.4 - 1.1 * design.get(i, 0) + 0.7 * design.get(i, 1);
                u8::from(rng.random_range(0.0..1.0) < expit(eta))
            })
            .collect();
        (design, response)
    }

    #[test]
    fn beats_every_point_on_a_coefficient_grid() {
        let (design, response) = synthetic(40, 7);
        let fit = fit_logistic(&design, &response).unwrap();
        let fit_ll = loglik(&linear_predictors(&design, &fit.coefficients), &response);

        // Grid-search oracle: step 0.05 over [-3, 3]^3.
        let steps = 121;
        let val = |k: usize| -3.0 + 0.05 * k as f64;
        let mut best = f64::NEG_INFINITY;
        for a in 0..steps {
            for b in 0..steps {
                for c in 0..steps {
                    let beta = [val(a), val(b), val(c)];
                    let ll = loglik(&linear_predictors(&design, &beta), &response);
                    if ll > best {
                        best = ll;
                    }
                }
            }
        }
        assert!(
            fit_ll >= best - 1e-9,
            "fit log-lik {fit_ll} below grid best {best}"
        );
    }

    #[test]
    fn score_equations_hold_at_convergence() {
        let (design, response) = synthetic(80, 3);
        let fit = fit_logistic(&design, &response).unwrap();
        assert!(fit.converged);
        let eta = linear_predictors(&design, &fit.coefficients);
        for j in 0..=design.cols() {
            let mut s = 0.0;
            for i in 0..design.rows() {
                let x = if j == 0 { 1.0 } else { design.get(i, j - 1) };
                s += (response[i] as f64 - expit(eta[i])) * x;
            }
            assert!(s.abs() < 1e-6, "score for column {j} is {s}");
        }
    }

    #[test]
    fn loglik_trace_is_non_decreasing() {
        let (design, response) = synthetic(60, 11);
        let (_, trace) = fit_logistic_traced(&design, &response).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn predictions_match_scalar_expit_and_rescaling_leaves_them_unchanged() {
        let (design, response) = synthetic(50, 5);
        let fit = fit_logistic(&design, &response).unwrap();
        let probs = predict_prob(&fit, &design).unwrap();
        for i in 0..design.rows() {
            let eta = fit.coefficients[0]
                + fit.coefficients[1] * design.get(i, 0)
                + fit.coefficients[2] * design.get(i, 1);
            assert!((probs[i] - expit(eta)).abs() < 1e-12);
            assert!(probs[i] > 0.0 && probs[i] < 1.0);
        }

        // Affine rescale of a predictor column: coefficients transform,
        // predictions stay the same.
        let mut scaled_rows = Vec::new();
        for i in 0..design.rows() {
            let r = design.row(i);
            scaled_rows.push(vec![5.0 * r[0] - 2.0, r[1]]);
        }
        let scaled = Matrix::from_rows(&scaled_rows).unwrap();
        let fit2 = fit_logistic(&scaled, &response).unwrap();
        let probs2 = predict_prob(&fit2, &scaled).unwrap();
        for i in 0..design.rows() {
            assert!((probs[i] - probs2[i]).abs() < 1e-6);
        }
        assert!((fit2.coefficients[1] * 5.0 - fit.coefficients[1]).abs() < 1e-5);
    }

    #[test]
    fn zero_coefficients_predict_one_half_and_known_value() {
        let fit = FittedLogit {
            coefficients: vec![0.0, 0.0],
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            separation_detected: false,
        };
        let design = Matrix::from_rows(&[vec![0.3], vec![-2.0]]).unwrap();
        let probs = predict_prob(&fit, &design).unwrap();
        assert_eq!(probs, vec![0.5, 0.5]);

        let fit = FittedLogit {
            coefficients: vec![0.0, 1.0],
            ..fit
        };
        let design = Matrix::from_rows(&[vec![0.2]]).unwrap();
        let probs = predict_prob(&fit, &design).unwrap();
        assert!((probs[0] - 0.5498).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let fit = FittedLogit {
            coefficients: vec![0.0, 1.0],
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            separation_detected: false,
        };
        assert!(predict_prob(&fit, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn separation_is_flagged_not_fatal() {
        // Perfectly separable data.
        let design =
            Matrix::from_rows(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]]).unwrap();
        let fit = fit_logistic(&design, &[0, 0, 1, 1]).unwrap();
        assert!(fit.separation_detected);
        assert!(!fit.converged);
        assert!(fit.coefficients[1] > 0.0);
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let v = i as f64 / 10.0;
                vec![v, 2.0 * v]
            })
            .collect();
        let design = Matrix::from_rows(&rows).unwrap();
        let response: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        assert!(matches!(
            fit_logistic(&design, &response),
            Err(Error::RankDeficient { .. })
        ));
    }
}
