//! The sorted-L1 norm `J(b) = sum_i lambda_i |b|_(i)`, its proximal map and
//! the majorization order that characterizes the prox's dual feasible set.
//!
//! Magnitudes are always ranked with a stable sort, so ties keep their
//! original index order and every permutation produced here is deterministic.

use crate::error::{check_len, invalid, Result, SlopeError};
use crate::isotonic::isotonic_nonincreasing;

/// A nonincreasing, nonnegative penalty sequence with a positive first entry.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("lambda", "weight vector must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SlopeError::NonFinite("lambda"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid("lambda", "weights must be nonincreasing"));
        }
        if values[values.len() - 1] < 0.0 {
            return Err(invalid("lambda", "weights must be nonnegative"));
        }
        if values[0] <= 0.0 {
            return Err(invalid("lambda", "weights must not be all zero"));
        }
        Ok(WeightVector(values))
    }

    /// `(value, ..., value)` of length `p`; the Lasso penalty.
    pub fn constant(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    /// `c * lambda` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("scale", format!("must be positive, got {c}")));
        }
        Ok(WeightVector(self.0.iter().map(|v| v * c).collect()))
    }

    /// The `m` largest weights `(lambda_1, ..., lambda_m)`.
    pub fn head(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(invalid("m", format!("must lie in 1..={}", self.len())));
        }
        Ok(WeightVector(self.0[..m].to_vec()))
    }

    /// The weights left after dropping the `m` largest, `(lambda_{m+1}, ..., lambda_p)`.
    ///
    /// Returned as a slice since the tail may be empty or identically zero.
    pub fn tail(&self, m: usize) -> &[f64] {
        &self.0[m.min(self.len())..]
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Indices ordering `|a|` nonincreasingly; ties keep index order.
pub fn magnitude_order(a: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].abs().total_cmp(&a[i].abs()));
    order
}

/// `|a|` sorted nonincreasingly.
pub fn sorted_magnitudes(a: &[f64]) -> Vec<f64> {
    let mut m: Vec<f64> = a.iter().map(|v| v.abs()).collect();
    m.sort_by(|x, y| y.total_cmp(x));
    m
}

/// `J_lambda(b) = sum_i lambda_i |b|_(i)`.
pub fn sorted_l1_norm(b: &[f64], lambda: &WeightVector) -> Result<f64> {
    check_len(lambda.len(), b.len())?;
    Ok(sorted_magnitudes(b)
        .iter()
        .zip(lambda.as_slice())
        .map(|(m, l)| m * l)
        .sum())
}

/// True iff every prefix sum of `|a|` sorted dominates the corresponding
/// prefix sum of `|b|` sorted.
pub fn majorizes(a: &[f64], b: &[f64]) -> Result<bool> {
    majorizes_within(a, b, 0.0)
}

/// [`majorizes`] with an absolute slack on every prefix comparison.
pub fn majorizes_within(a: &[f64], b: &[f64], slack: f64) -> Result<bool> {
    check_len(a.len(), b.len())?;
    let sa = sorted_magnitudes(a);
    let sb = sorted_magnitudes(b);
    let (mut pa, mut pb) = (0.0, 0.0);
    for (x, y) in sa.iter().zip(&sb) {
        pa += x;
        pb += y;
        if pa + slack < pb {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest `t` in `(0, 1]` such that `t * g` is majorized by `lambda`,
/// i.e. the minimum over prefixes of `sum lambda / sum |g|`.
pub(crate) fn majorization_scale(g: &[f64], lambda: &[f64]) -> f64 {
    let mags = sorted_magnitudes(g);
    let (mut pl, mut pg) = (0.0, 0.0);
    let mut t: f64 = 1.0;
    for (m, l) in mags.iter().zip(lambda) {
        pl += l;
        pg += m;
        if pg > 0.0 {
            t = t.min(pl / pg);
        }
    }
    t
}

/// Which finite algorithm evaluates the prox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxMethod {
    /// Single pass over a stack of pooled blocks, clamping each block at zero.
    #[default]
    Stack,
    /// Pool adjacent violators on `|y|_sorted - lambda`, then clamp at zero.
    Pava,
    /// Run both and fail if any coordinate differs by more than 1e-12.
    Checked,
}

/// Per-coordinate agreement required between [`ProxMethod::Stack`] and
/// [`ProxMethod::Pava`] in checked mode.
pub const PROX_AGREEMENT_TOL: f64 = 1e-12;

/// `argmin_b 1/2 ||y - b||^2 + J_lambda(b)`.
pub fn prox_sorted_l1(y: &[f64], lambda: &WeightVector) -> Result<Vec<f64>> {
    prox_sorted_l1_with(y, lambda, ProxMethod::Stack)
}

pub fn prox_sorted_l1_with(y: &[f64], lambda: &WeightVector, method: ProxMethod) -> Result<Vec<f64>> {
    check_len(lambda.len(), y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SlopeError::NonFinite("y"));
    }
    Ok(match method {
        ProxMethod::Stack => prox_unchecked(y, lambda.as_slice(), stack_sorted),
        ProxMethod::Pava => prox_unchecked(y, lambda.as_slice(), pava_sorted),
        ProxMethod::Checked => {
            let stack = prox_unchecked(y, lambda.as_slice(), stack_sorted);
            let pava = prox_unchecked(y, lambda.as_slice(), pava_sorted);
            for (index, (&s, &p)) in stack.iter().zip(&pava).enumerate() {
                if (s - p).abs() > PROX_AGREEMENT_TOL {
                    return Err(SlopeError::AlgorithmDisagreement { index, stack: s, pava: p });
                }
            }
            stack
        }
    })
}

/// Prox for an arbitrary nonincreasing nonnegative weight slice, which may
/// be all zero (the identity map) or shorter-lived than a [`WeightVector`].
pub(crate) fn prox_with_slice(y: &[f64], lambda: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), lambda.len());
    prox_unchecked(y, lambda, stack_sorted)
}

/// Sort magnitudes, solve the ordered nonnegative problem, undo the sort and
/// restore signs.
fn prox_unchecked(y: &[f64], lambda: &[f64], solve: fn(&[f64], &[f64]) -> Vec<f64>) -> Vec<f64> {
    let order = magnitude_order(y);
    let sorted: Vec<f64> = order.iter().map(|&i| y[i].abs()).collect();
    let fitted = solve(&sorted, lambda);
    let mut out = vec![0.0; y.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if y[i] < 0.0 { -fitted[rank] } else { fitted[rank] };
    }
    out
}

/// Stack algorithm on nonnegative nonincreasing `y`: each new coordinate
/// opens a block and blocks merge while the clamped average fails to
/// decrease.
fn stack_sorted(y: &[f64], lambda: &[f64]) -> Vec<f64> {
    struct Block {
        start: usize,
        end: usize,
        sum: f64,
        value: f64,
    }
    let mut stack: Vec<Block> = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let sum = y[i] - lambda[i];
        stack.push(Block { start: i, end: i, sum, value: sum.max(0.0) });
        while stack.len() > 1 && stack[stack.len() - 2].value <= stack[stack.len() - 1].value {
            let top = stack.pop().unwrap();
            let b = stack.last_mut().unwrap();
            b.end = top.end;
            b.sum += top.sum;
            b.value = (b.sum / (b.end - b.start + 1) as f64).max(0.0);
        }
    }
    let mut x = vec![0.0; y.len()];
    for b in &stack {
        x[b.start..=b.end].fill(b.value);
    }
    x
}

/// Isotonic regression of `y - lambda`, clamped at zero afterwards.
fn pava_sorted(y: &[f64], lambda: &[f64]) -> Vec<f64> {
    let shifted: Vec<f64> = y.iter().zip(lambda).map(|(a, l)| a - l).collect();
    isotonic_nonincreasing(&shifted, None)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect()
}

/// Checks `||prox_lambda(a)|| <= ||(|a| - lambda)_+||` with `|a|` sorted.
pub fn prox_norm_bound_holds(a: &[f64], lambda: &WeightVector) -> Result<bool> {
    let prox = prox_sorted_l1(a, lambda)?;
    let lhs: f64 = prox.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhs: f64 = sorted_magnitudes(a)
        .iter()
        .zip(lambda.as_slice())
        .map(|(m, l)| (m - l).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(lhs <= rhs * (1.0 + 1e-12) + 1e-15)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn weight_vector_invariants() {
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![1.0, 2.0]).is_err());
        assert!(WeightVector::new(vec![1.0, -0.5]).is_err());
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
        // trailing zeros are allowed
        assert!(WeightVector::new(vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn head_and_tail() {
        let l = w(&[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(l.head(2).unwrap().as_slice(), &[4.0, 3.0]);
        assert_eq!(l.tail(2), &[2.0, 1.0]);
        assert!(l.tail(4).is_empty());
        assert!(l.head(0).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(sorted_l1_norm(&[0.0, 0.0, 0.0], &w(&[3.0, 2.0, 1.0])).unwrap(), 0.0);
        assert_eq!(sorted_l1_norm(&[1.0, -3.0, 2.0], &w(&[3.0, 2.0, 1.0])).unwrap(), 14.0);
        assert_eq!(sorted_l1_norm(&[5.0, 5.0], &w(&[2.0, 1.0])).unwrap(), 15.0);
        assert!(matches!(
            sorted_l1_norm(&[1.0], &w(&[2.0, 1.0])),
            Err(SlopeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn majorization_examples() {
        assert!(majorizes(&[2.0, 1.0], &[1.5, 1.4]).unwrap());
        assert!(!majorizes(&[2.0, 1.0], &[2.1, 0.0]).unwrap());
        assert!(majorizes(&[-3.0, 0.5, 2.0], &[-3.0, 0.5, 2.0]).unwrap());
        assert!(majorizes(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn stable_order_on_ties() {
        assert_eq!(magnitude_order(&[1.0, -3.0, 3.0, 0.0, -1.0]), vec![1, 2, 0, 4, 3]);
    }

    #[test]
    fn prox_examples() {
        for method in [ProxMethod::Stack, ProxMethod::Pava, ProxMethod::Checked] {
            let p = |y: &[f64], l: &[f64]| prox_sorted_l1_with(y, &w(l), method).unwrap();
            assert_eq!(p(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]), vec![0.0; 3]);
            assert_eq!(p(&[5.0, 3.0], &[2.0, 1.0]), vec![3.0, 2.0]);
            assert_eq!(p(&[3.5, -3.0], &[2.0, 1.0]), vec![1.75, -1.75]);
            assert_eq!(p(&[0.0; 4], &[1.0; 4]), vec![0.0; 4]);
        }
    }

    #[test]
    fn prox_handles_unsorted_input_and_zero_tail_weights() {
        // magnitudes (4, 2, 1): shifted by (2, 0, 0) gives (2, 2, 1)
        let out = prox_sorted_l1(&[-1.0, 4.0, 2.0], &w(&[2.0, 0.0, 0.0])).unwrap();
        assert_eq!(out, vec![-1.0, 2.0, 2.0]);
    }

    #[test]
    fn prox_rejects_bad_input() {
        assert!(prox_sorted_l1(&[1.0], &w(&[1.0, 1.0])).is_err());
        assert!(matches!(
            prox_sorted_l1(&[f64::INFINITY], &w(&[1.0])),
            Err(SlopeError::NonFinite(_))
        ));
    }

    #[test]
    fn prox_norm_bound_examples() {
        assert!(prox_norm_bound_holds(&[5.0, 3.0], &w(&[2.0, 1.0])).unwrap());
        assert!(prox_norm_bound_holds(&[2.0, 1.0], &w(&[2.0, 1.0])).unwrap());
        assert!(prox_norm_bound_holds(&[1.0], &w(&[2.0, 1.0])).is_err());
    }

    #[test]
    fn majorization_scale_is_largest_feasible_factor() {
        let lambda = [3.0, 2.0, 1.0];
        let g = [4.0, 4.0, 0.0];
        let t = majorization_scale(&g, &lambda);
        // prefixes: 3/4, 5/8, 6/8
        assert_eq!(t, 5.0 / 8.0);
        let scaled: Vec<f64> = g.iter().map(|v| v * t).collect();
        assert!(majorizes(&lambda, &scaled).unwrap());
        assert_eq!(majorization_scale(&[0.5, 0.1, 0.0], &lambda), 1.0);
    }
}
