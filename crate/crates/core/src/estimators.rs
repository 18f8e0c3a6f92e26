//! Sequence-model estimators built on the BH critical values, plus the
//! one-step oracle used to analyze SLOPE under Gaussian designs.

use crate::error::{check_len, invalid, Result};
use crate::linalg::Design;
use crate::sorted_l1::{magnitude_order, prox_sorted_l1, sorted_magnitudes, WeightVector};
use crate::weights::bh_weights;

/// Output of a thresholding rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFit {
    pub beta_hat: Vec<f64>,
    /// `+inf` when nothing is rejected.
    pub threshold: f64,
    pub rejections: usize,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be positive and finite, got {sigma}")))
    }
}

/// Number of BH step-up rejections: the last rank `i` with
/// `|y|_(i) >= sigma * lambda_i`, or 0.
pub fn bh_step_up_count(y: &[f64], lambda: &WeightVector) -> Result<usize> {
    check_len(lambda.len(), y.len())?;
    let mags = sorted_magnitudes(y);
    Ok(mags
        .iter()
        .zip(lambda.as_slice())
        .rposition(|(m, l)| m >= l)
        .map_or(0, |i| i + 1))
}

/// Number of step-down rejections: the first rank that fails ends the run.
pub fn bh_step_down_count(y: &[f64], lambda: &WeightVector) -> Result<usize> {
    check_len(lambda.len(), y.len())?;
    let mags = sorted_magnitudes(y);
    Ok(mags
        .iter()
        .zip(lambda.as_slice())
        .take_while(|(m, l)| m >= l)
        .count())
}

/// Hard thresholding at the magnitude of the last BH step-up rejection.
pub fn fdr_hard_threshold(y: &[f64], q: f64, sigma: f64) -> Result<ThresholdFit> {
    check_sigma(sigma)?;
    let lambda = bh_weights(q, y.len().max(1), sigma)?;
    if y.is_empty() {
        return Ok(ThresholdFit { beta_hat: vec![], threshold: f64::INFINITY, rejections: 0 });
    }
    let r = bh_step_up_count(y, &lambda)?;
    if r == 0 {
        return Ok(ThresholdFit {
            beta_hat: vec![0.0; y.len()],
            threshold: f64::INFINITY,
            rejections: 0,
        });
    }
    let threshold = sorted_magnitudes(y)[r - 1];
    let beta_hat: Vec<f64> = y.iter().map(|&v| if v.abs() >= threshold { v } else { 0.0 }).collect();
    let rejections = beta_hat.iter().filter(|v| **v != 0.0).count();
    Ok(ThresholdFit { beta_hat, threshold, rejections })
}

/// SLOPE under an orthogonal design, given `X'y`.
pub fn slope_orthogonal(y: &[f64], lambda: &WeightVector) -> Result<Vec<f64>> {
    prox_sorted_l1(y, lambda)
}

/// Soft-thresholds the `i`-th largest magnitude at `sigma * lambda^BH_i`.
///
/// Not monotone in `|y|` and not continuous in `y`: ranks decide the amount
/// of shrinkage.
pub fn sequential_fdr_soft(y: &[f64], q: f64, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    if y.is_empty() {
        return Ok(vec![]);
    }
    let lambda = bh_weights(q, y.len(), sigma)?;
    let mut out = vec![0.0; y.len()];
    for (rank, &i) in magnitude_order(y).iter().enumerate() {
        let shrunk = (y[i].abs() - lambda.as_slice()[rank]).max(0.0);
        out[i] = if y[i] < 0.0 { -shrunk } else { shrunk };
    }
    Ok(out)
}

/// `SURE(t) = p sigma^2 + sum_i min(y_i^2, t^2) - 2 sigma^2 #{i : |y_i| <= t}`.
pub fn sure_value(y: &[f64], sigma: f64, t: f64) -> f64 {
    let s2 = sigma * sigma;
    let capped: f64 = y.iter().map(|v| (v * v).min(t * t)).sum();
    let below = y.iter().filter(|v| v.abs() <= t).count();
    y.len() as f64 * s2 + capped - 2.0 * s2 * below as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SureFit {
    pub lambda_hat: f64,
    pub beta_hat: Vec<f64>,
    /// Candidate thresholds, ascending, and SURE at each.
    pub candidates: Vec<f64>,
    pub sure_values: Vec<f64>,
}

/// Soft thresholding at the minimizer of SURE over `grid` and every `|y_i|`.
///
/// Ties go to the smallest threshold.
pub fn sure_soft_threshold(y: &[f64], sigma: f64, grid: &[f64]) -> Result<SureFit> {
    check_sigma(sigma)?;
    if grid.is_empty() {
        return Err(invalid("grid", "must be nonempty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("grid", "must be strictly increasing, finite and nonnegative"));
    }
    let mut candidates: Vec<f64> = grid.iter().copied().chain(y.iter().map(|v| v.abs())).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let sure_values: Vec<f64> = candidates.iter().map(|&t| sure_value(y, sigma, t)).collect();
    let best = sure_values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < sure_values[best] { i } else { best });
    let lambda_hat = candidates[best];
    let beta_hat = soft_threshold(y, lambda_hat);
    Ok(SureFit { lambda_hat, beta_hat, candidates, sure_values })
}

pub fn soft_threshold(y: &[f64], t: f64) -> Vec<f64> {
    y.iter().map(|&v| v.signum() * (v.abs() - t).max(0.0)).collect()
}

/// One proximal gradient step from the truth: `prox_lambda(beta + X'z)`.
pub fn one_step_oracle(x: &Design, z: &[f64], beta: &[f64], lambda: &WeightVector) -> Result<Vec<f64>> {
    check_len(x.n(), z.len())?;
    check_len(x.p(), beta.len())?;
    let xtz = x.tr_mul_vec(z);
    let point: Vec<f64> = beta.iter().zip(&xtz).map(|(b, g)| b + g).collect();
    prox_sorted_l1(&point, lambda)
}
