//! Accelerated proximal gradient for
//! `min_b 1/2 ||y - X b||^2 + J_lambda(b)`, certified by a duality gap.
//!
//! The dual of the program is the projection of `y` onto
//! `{nu : X' nu is majorized by lambda}`. Any residual `y - X b`, shrunk by
//! the largest factor that makes it dual feasible, gives a lower bound on
//! the optimal value, so the gap bounds the suboptimality of `b`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result, SlopeError};
use crate::linalg::{cholesky_solve, dot, norm2_sq, Design};
use crate::sorted_l1::{
    magnitude_order, majorization_scale, majorizes_within, prox_sorted_l1, sorted_l1_norm, WeightVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Target relative duality gap, `gap / primal`.
    pub tol: f64,
    /// Power iterations for the initial Lipschitz estimate.
    pub power_iters: usize,
    pub lipschitz_safety: f64,
    /// Dual feasibility slack, relative to `lambda_1`, for the residual check.
    pub kkt_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 20_000,
            tol: 1e-8,
            power_iters: 30,
            lipschitz_safety: 1.01,
            kkt_slack: 1e-6,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub beta_hat: Vec<f64>,
    pub iterations: usize,
    /// Absolute duality gap at `beta_hat`.
    pub duality_gap: f64,
    pub relative_gap: f64,
    /// `X'(y - X beta_hat)` is majorized by `lambda` within the slack.
    pub kkt_majorization_ok: bool,
    pub objective: f64,
    pub converged: bool,
}

/// Primal value, dual value and dual feasibility of the residual at `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub residual_feasible: bool,
}

impl Certificate {
    pub fn relative_gap(&self) -> f64 {
        if self.primal > 0.0 {
            self.gap / self.primal
        } else {
            self.gap
        }
    }
}

fn check_problem(x: &Design, y: &[f64], lambda: &WeightVector) -> Result<()> {
    check_len(x.n(), y.len())?;
    check_len(x.p(), lambda.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SlopeError::NonFinite("y"));
    }
    Ok(())
}

pub fn primal_objective(x: &Design, y: &[f64], lambda: &WeightVector, b: &[f64]) -> Result<f64> {
    check_problem(x, y, lambda)?;
    check_len(x.p(), b.len())?;
    let fitted = x.mul_vec(b);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, f)| (a - f).powi(2)).sum();
    Ok(0.5 * rss + sorted_l1_norm(b, lambda)?)
}

/// Gap certificate given the residual `nu = y - X b` and `g = X' nu`.
fn certify(y: &[f64], lambda: &WeightVector, b: &[f64], nu: &[f64], g: &[f64], slack: f64) -> Certificate {
    let nu_sq = norm2_sq(nu);
    let penalty: f64 = crate::sorted_l1::sorted_magnitudes(b)
        .iter()
        .zip(lambda.as_slice())
        .map(|(m, l)| m * l)
        .sum();
    let primal = 0.5 * nu_sq + penalty;
    let t = majorization_scale(g, lambda.as_slice());
    let dual = t * dot(nu, y) - 0.5 * t * t * nu_sq;
    let residual_feasible = majorizes_within(lambda.as_slice(), g, slack * lambda.first()).unwrap_or(false);
    Certificate {
        primal,
        dual,
        gap: (primal - dual).max(0.0),
        residual_feasible,
    }
}

/// `primal(b) - dual(t * (y - X b))` with `t` the largest factor in `(0, 1]`
/// making the scaled residual dual feasible.
pub fn duality_gap(x: &Design, y: &[f64], lambda: &WeightVector, b: &[f64]) -> Result<f64> {
    Ok(certificate(x, y, lambda, b, 0.0)?.gap)
}

pub fn certificate(x: &Design, y: &[f64], lambda: &WeightVector, b: &[f64], slack: f64) -> Result<Certificate> {
    check_problem(x, y, lambda)?;
    check_len(x.p(), b.len())?;
    let fitted = x.mul_vec(b);
    let nu: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    let g = x.tr_mul_vec(&nu);
    Ok(certify(y, lambda, b, &nu, &g, slack))
}

/// FISTA with backtracking and function-value restart, started from zero.
///
/// A step that would increase the objective is discarded and retaken as a
/// plain proximal gradient step from the current iterate, so the accepted
/// objective values never increase.
pub fn fit_slope(x: &Design, y: &[f64], lambda: &WeightVector, opts: &SolverOptions) -> Result<SlopeFit> {
    check_problem(x, y, lambda)?;
    opts.validate()?;
    let (n, p) = (x.n(), x.p());

    let mut lip = x.gram_spectral_radius(opts.power_iters) * opts.lipschitz_safety;
    if !(lip > 0.0) {
        lip = 1.0;
    }

    // current iterate and its fitted values X b
    let mut b = vec![0.0; p];
    let mut xb = vec![0.0; n];
    let mut nu = y.to_vec();
    let mut g = x.tr_mul_vec(&nu);
    let mut cert = certify(y, lambda, &b, &nu, &g, opts.kkt_slack);
    let mut objective = cert.primal;
    let done = |c: &Certificate| c.relative_gap() <= opts.tol && c.residual_feasible;
    if done(&cert) {
        return Ok(finish(b, 0, cert, true));
    }

    // extrapolated point
    let mut z = b.clone();
    let mut xz = xb.clone();
    let mut momentum = 1.0_f64;
    let mut grad_z: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut step_point = vec![0.0; p];
    let mut xb_new = vec![0.0; n];

    for iter in 1..=opts.max_iter {
        let rz: Vec<f64> = xz.iter().zip(y).map(|(f, a)| f - a).collect();
        let fz = 0.5 * norm2_sq(&rz);

        // backtracking on the quadratic upper bound
        let b_new = loop {
            for ((s, zj), gj) in step_point.iter_mut().zip(&z).zip(&grad_z) {
                *s = zj - gj / lip;
            }
            let candidate = prox_sorted_l1(&step_point, &lambda.scaled(1.0 / lip)?)?;
            x.mul_vec_into(&candidate, &mut xb_new);
            let f_new = 0.5 * xb_new.iter().zip(y).map(|(f, a)| (f - a).powi(2)).sum::<f64>();
            let d: Vec<f64> = candidate.iter().zip(&z).map(|(c, zj)| c - zj).collect();
            let bound = fz + dot(&grad_z, &d) + 0.5 * lip * norm2_sq(&d);
            if f_new <= bound + 1e-12 * fz.abs().max(f64::MIN_POSITIVE) {
                break candidate;
            }
            lip *= 2.0;
        };

        for ((v, a), f) in nu.iter_mut().zip(y).zip(&xb_new) {
            *v = a - f;
        }
        x.tr_mul_vec_into(&nu, &mut g);
        let new_cert = certify(y, lambda, &b_new, &nu, &g, opts.kkt_slack);

        // momentum == 1 means z == b, a plain step that can only rise by roundoff
        if new_cert.primal > objective && momentum > 1.0 {
            // restart: drop momentum and retake the step from b
            momentum = 1.0;
            z.copy_from_slice(&b);
            xz.copy_from_slice(&xb);
            grad_z = gradient_at(x, y, &xb);
            continue;
        }

        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        for j in 0..p {
            z[j] = b_new[j] + beta * (b_new[j] - b[j]);
        }
        for i in 0..n {
            xz[i] = xb_new[i] + beta * (xb_new[i] - xb[i]);
        }
        momentum = next_momentum;
        b = b_new;
        xb.copy_from_slice(&xb_new);
        objective = new_cert.primal;
        cert = new_cert;

        if done(&cert) {
            if let Some((polished, polished_cert)) = polish(x, y, lambda, &b, opts.kkt_slack) {
                if polished_cert.gap <= cert.gap && polished_cert.residual_feasible {
                    return Ok(finish(polished, iter, polished_cert, true));
                }
            }
            return Ok(finish(b, iter, cert, true));
        }
        // gradient at the new extrapolated point
        let rz: Vec<f64> = xz.iter().zip(y).map(|(f, a)| f - a).collect();
        x.tr_mul_vec_into(&rz, &mut grad_z);
    }
    Ok(finish(b, opts.max_iter, cert, false))
}

const CLUSTER_RTOL: f64 = 1e-6;

/// Exact minimizer over the cluster structure of `b`: the support, signs
/// and groups of equal magnitude are held fixed, which makes the penalty
/// linear and the problem an unconstrained least squares in one amplitude
/// per cluster. Returned only if the amplitudes keep the same strict order.
fn polish(x: &Design, y: &[f64], lambda: &WeightVector, b: &[f64], slack: f64) -> Option<(Vec<f64>, Certificate)> {
    let order = magnitude_order(b);
    let lam = lambda.as_slice();
    // (members, summed weight) per cluster, largest magnitude first
    let mut clusters: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut prev = f64::NAN;
    for (rank, &j) in order.iter().enumerate() {
        let m = b[j].abs();
        if m == 0.0 {
            break;
        }
        // iterates approach a tie only in the limit
        if prev - m <= CLUSTER_RTOL * prev {
            let last = clusters.last_mut().unwrap();
            last.0.push(j);
            last.1 += lam[rank];
        } else {
            clusters.push((vec![j], lam[rank]));
        }
        prev = m;
    }
    let m = clusters.len();
    if m == 0 || m > x.n() {
        return None;
    }
    let n = x.n();
    // columns of the collapsed design, one per cluster
    let mut cols = vec![vec![0.0; n]; m];
    for (col, (members, _)) in cols.iter_mut().zip(&clusters) {
        for &j in members {
            let s = b[j].signum();
            for (i, c) in col.iter_mut().enumerate() {
                *c += s * x.get(i, j);
            }
        }
    }
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for a in 0..m {
        for c in 0..=a {
            let v = dot(&cols[a], &cols[c]);
            gram[a * m + c] = v;
            gram[c * m + a] = v;
        }
        rhs[a] = dot(&cols[a], y) - clusters[a].1;
    }
    let amp = cholesky_solve(&gram, &rhs)?;
    if amp.iter().any(|&v| !(v > 0.0)) || amp.windows(2).any(|w| w[0] <= w[1]) {
        return None;
    }
    let mut polished = vec![0.0; b.len()];
    for ((members, _), &a) in clusters.iter().zip(&amp) {
        for &j in members {
            polished[j] = b[j].signum() * a;
        }
    }
    let fitted = x.mul_vec(&polished);
    let nu: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    let g = x.tr_mul_vec(&nu);
    let cert = certify(y, lambda, &polished, &nu, &g, slack);
    Some((polished, cert))
}

fn gradient_at(x: &Design, y: &[f64], xb: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = xb.iter().zip(y).map(|(f, a)| f - a).collect();
    x.tr_mul_vec(&r)
}

fn finish(beta_hat: Vec<f64>, iterations: usize, cert: Certificate, converged: bool) -> SlopeFit {
    SlopeFit {
        beta_hat,
        iterations,
        duality_gap: cert.gap,
        relative_gap: cert.relative_gap(),
        kkt_majorization_ok: cert.residual_feasible,
        objective: cert.primal,
        converged,
    }
}

/// Solution of SLOPE restricted to the columns in `T`, lifted back to `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSlopeFit {
    /// Lifted coefficients with certificates evaluated on the full program.
    pub fit: SlopeFit,
    /// `X_{T^c}'(y - X_T b_T)` is majorized by the weights left after
    /// dropping the `|T|` largest; when true the lift solves the full program.
    pub certificate_holds: bool,
}

pub fn fit_reduced_slope(
    x: &Design,
    y: &[f64],
    lambda: &WeightVector,
    support: &[usize],
    opts: &SolverOptions,
) -> Result<ReducedSlopeFit> {
    check_problem(x, y, lambda)?;
    if support.is_empty() {
        return Err(SlopeError::EmptyIndexSet);
    }
    let p = x.p();
    let mut in_t = vec![false; p];
    for &j in support {
        if j >= p {
            return Err(SlopeError::IndexOutOfRange { index: j, dim: p });
        }
        if in_t[j] {
            return Err(invalid("support", format!("index {j} repeated")));
        }
        in_t[j] = true;
    }
    let m = support.len();
    let reduced = fit_slope(&x.select_columns(support)?, y, &lambda.head(m)?, opts)?;

    let mut beta = vec![0.0; p];
    for (&j, &v) in support.iter().zip(&reduced.beta_hat) {
        beta[j] = v;
    }
    let fitted = x.mul_vec(&beta);
    let nu: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    let g = x.tr_mul_vec(&nu);
    let off: Vec<f64> = (0..p).filter(|&j| !in_t[j]).map(|j| g[j]).collect();
    let certificate_holds = off.is_empty()
        || majorizes_within(lambda.tail(m), &off, opts.kkt_slack * lambda.first())?;

    let cert = certify(y, lambda, &beta, &nu, &g, opts.kkt_slack);
    let fit = SlopeFit {
        beta_hat: beta,
        iterations: reduced.iterations,
        duality_gap: cert.gap,
        relative_gap: cert.relative_gap(),
        kkt_majorization_ok: cert.residual_feasible,
        objective: cert.primal,
        converged: reduced.converged,
    };
    Ok(ReducedSlopeFit { fit, certificate_holds })
}

/// Lasso as SLOPE with constant weights.
pub fn lasso_fit(x: &Design, y: &[f64], lam: f64, opts: &SolverOptions) -> Result<SlopeFit> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lam}")));
    }
    fit_slope(x, y, &WeightVector::constant(x.p(), lam)?, opts)
}
