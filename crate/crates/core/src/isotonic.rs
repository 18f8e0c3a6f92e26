//! Pool adjacent violators for least-squares isotonic regression.

/// Least-squares fit of `values` under the constraint
/// `fit[0] >= fit[1] >= ... >= fit[n-1]`, with optional positive weights.
///
/// Blocks are pooled left to right; each new point is merged backwards into
/// its predecessor for as long as the ordering is violated.
pub fn isotonic_nonincreasing(values: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    if let Some(w) = weights {
        assert_eq!(w.len(), values.len(), "weights must match values");
    }
    let n = values.len();
    // (weighted sum, total weight, number of points)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(n);
    for (i, &v) in values.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        blocks.push((v * w, w, 1));
        while blocks.len() > 1 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 / prev.1 >= last.0 / last.1 {
                break;
            }
            blocks.pop();
            let merged = blocks.last_mut().unwrap();
            merged.0 += last.0;
            merged.1 += last.1;
            merged.2 += last.2;
        }
    }

    let mut fit = Vec::with_capacity(n);
    for (sum, weight, count) in blocks {
        let mean = sum / weight;
        fit.extend(std::iter::repeat(mean).take(count));
    }
    fit
}

/// Nondecreasing counterpart of [`isotonic_nonincreasing`].
pub fn isotonic_nondecreasing(values: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    let reversed: Vec<f64> = values.iter().rev().copied().collect();
    let rev_weights: Option<Vec<f64>> = weights.map(|w| w.iter().rev().copied().collect());
    let mut fit = isotonic_nonincreasing(&reversed, rev_weights.as_deref());
    fit.reverse();
    fit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sse(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    }

    #[test]
    fn already_monotone_is_identity() {
        let v = [5.0, 3.0, 3.0, -1.0];
        assert_eq!(isotonic_nonincreasing(&v, None), v.to_vec());
    }

    #[test]
    fn pools_single_violation() {
        let fit = isotonic_nonincreasing(&[1.5, 2.0], None);
        assert_eq!(fit, vec![1.75, 1.75]);
    }

    #[test]
    fn cascading_merge() {
        // (1, 2) pool to 1.5, then 4 joins them at 7/3, which stays below 3
        let fit = isotonic_nonincreasing(&[3.0, 1.0, 2.0, 4.0], None);
        assert_eq!(fit, vec![3.0, 7.0 / 3.0, 7.0 / 3.0, 7.0 / 3.0]);
    }

    #[test]
    fn weights_shift_the_pooled_mean() {
        let fit = isotonic_nonincreasing(&[1.0, 3.0], Some(&[3.0, 1.0]));
        assert_eq!(fit, vec![1.5, 1.5]);
    }

    #[test]
    fn nondecreasing_mirror() {
        let fit = isotonic_nondecreasing(&[2.0, 1.0, 3.0], None);
        assert_eq!(fit, vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn empty_input() {
        assert!(isotonic_nonincreasing(&[], None).is_empty());
    }

    #[test]
    fn beats_every_monotone_grid_candidate() {
        // brute force over a coarse grid of monotone sequences of length 3
        let v = [0.3, 1.2, -0.4];
        let fit = isotonic_nonincreasing(&v, None);
        let best = sse(&fit, &v);
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        for &a in &grid {
            for &b in grid.iter().filter(|&&b| b <= a) {
                for &c in grid.iter().filter(|&&c| c <= b) {
                    assert!(best <= sse(&[a, b, c], &v) + 1e-12);
                }
            }
        }
    }
}
