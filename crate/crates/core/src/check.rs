//! Brute-force reference solvers and randomized property checks for the
//! sorted-L1 prox. Used by `selfcheck` and the acceptance suite.
//!
//! Nothing here calls the stack or PAVA routines except as the subject under
//! test.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::norm2;
use crate::sorted_l1::{
    majorizes, prox_norm_bound_holds, prox_sorted_l1, prox_sorted_l1_with, prox_with_slice,
    ProxMethod, WeightVector,
};

/// Prox by exhaustive search, for `p` up to about 16.
///
/// After sorting magnitudes the solution is constant on consecutive blocks
/// and zero past the last block, i.e. a nonnegative combination of prefix
/// indicators. Every choice of block endpoints is enumerated; the
/// least-squares fit for a choice is the vector of block means of
/// `|y|_sorted - lambda`, kept if it is nonincreasing and nonnegative. The
/// best kept candidate is the minimizer.
pub fn prox_oracle(y: &[f64], lambda: &[f64]) -> Vec<f64> {
    let p = y.len();
    assert_eq!(p, lambda.len());
    assert!(p <= 20, "exhaustive oracle is exponential in p");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| y[j].abs().total_cmp(&y[i].abs()));
    let w: Vec<f64> = order.iter().zip(lambda).map(|(&i, l)| y[i].abs() - l).collect();

    let mut best = vec![0.0; p];
    let mut best_obj: f64 = w.iter().map(|v| v * v).sum();
    for mask in 1u32..(1 << p) {
        // bit k set: a block ends at index k
        let mut fit = vec![0.0; p];
        let mut start = 0;
        let mut prev = f64::INFINITY;
        let mut feasible = true;
        for k in 0..p {
            if mask & (1 << k) != 0 {
                let mean = w[start..=k].iter().sum::<f64>() / (k + 1 - start) as f64;
                if mean < 0.0 || mean > prev {
                    feasible = false;
                    break;
                }
                fit[start..=k].fill(mean);
                prev = mean;
                start = k + 1;
            }
        }
        if !feasible {
            continue;
        }
        let obj: f64 = w.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
        if obj < best_obj {
            best_obj = obj;
            best = fit;
        }
    }
    let mut out = vec![0.0; p];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = best[rank] * y[i].signum();
    }
    out
}

/// Outcome of one randomized property over many instances.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    /// Largest observed violation (0 when the property held everywhere).
    pub worst: f64,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    name: &'static str,
    instances: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { name, instances: 0, failures: 0, worst: 0.0 }
    }

    /// Records an instance whose violation is `excess` (holds iff `excess <= 0`).
    fn record(&mut self, excess: f64) {
        self.instances += 1;
        if excess > 0.0 || excess.is_nan() {
            self.failures += 1;
            self.worst = self.worst.max(excess);
        }
    }

    fn report(self) -> PropertyReport {
        PropertyReport {
            name: self.name,
            instances: self.instances,
            failures: self.failures,
            worst: self.worst,
        }
    }
}

/// Relative floor for inequality checks that are exact in real arithmetic.
const ROUNDOFF: f64 = 1e-12;

/// Random nonincreasing weights in `[0, 3]`, sometimes with ties or a zero tail.
pub fn random_weights(rng: &mut impl Rng, p: usize) -> WeightVector {
    let mut v: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..3.0)).collect();
    if p > 1 && rng.gen_bool(0.2) {
        let i = rng.gen_range(1..p);
        v[i] = v[i - 1];
    }
    v.sort_by(|a, b| b.total_cmp(a));
    if p > 1 && rng.gen_bool(0.1) {
        let i = rng.gen_range(1..p);
        v[i..].fill(0.0);
    }
    v[0] = v[0].max(0.1);
    WeightVector::new(v).expect("constructed nonincreasing")
}

/// Random vector on roughly the weights' scale, sometimes with tied magnitudes and zeros.
pub fn random_vector(rng: &mut impl Rng, p: usize) -> Vec<f64> {
    let scale = rng.gen_range(0.5..4.0);
    let mut a: Vec<f64> = (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    if p > 1 && rng.gen_bool(0.2) {
        let (i, j) = (rng.gen_range(0..p), rng.gen_range(0..p));
        a[j] = if rng.gen_bool(0.5) { a[i] } else { -a[i] };
    }
    if rng.gen_bool(0.1) {
        let i = rng.gen_range(0..p);
        a[i] = 0.0;
    }
    a
}

/// A point in the convex hull of signed permutations of `lambda`, shrunk by
/// a factor below one, hence majorized by `lambda`.
fn random_majorized(rng: &mut impl Rng, lambda: &[f64]) -> Vec<f64> {
    let p = lambda.len();
    let mut out = vec![0.0; p];
    let parts = 3;
    let mut weights: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    for w in weights {
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(rng);
        for (i, &j) in perm.iter().enumerate() {
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            out[j] += w * s * lambda[i];
        }
    }
    let shrink = rng.gen_range(0.5..0.999);
    out.iter_mut().for_each(|v| *v *= shrink);
    out
}

/// A vector that majorizes `b`: add nonnegative mass to the sorted
/// magnitudes, move some mass towards the front, then shuffle and flip signs.
fn random_majorizing(rng: &mut impl Rng, b: &[f64]) -> Vec<f64> {
    let p = b.len();
    let mut a = crate::sorted_l1::sorted_magnitudes(b);
    for v in a.iter_mut() {
        *v += rng.gen_range(0.0..0.5);
    }
    if p > 1 {
        let j = rng.gen_range(1..p);
        let i = rng.gen_range(0..j);
        let t = rng.gen_range(0.0..=1.0) * a[j];
        a[j] -= t;
        a[i] += t;
    }
    a.shuffle(rng);
    a.iter_mut().for_each(|v| {
        if rng.gen_bool(0.5) {
            *v = -*v;
        }
    });
    a
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Largest prefix excess of `|b|_sorted` over `|a|_sorted`; `<= 0` iff `a` majorizes `b`.
fn majorization_excess(a: &[f64], b: &[f64]) -> f64 {
    let sa = crate::sorted_l1::sorted_magnitudes(a);
    let sb = crate::sorted_l1::sorted_magnitudes(b);
    let (mut pa, mut pb, mut worst) = (0.0, 0.0, f64::NEG_INFINITY);
    for (x, y) in sa.iter().zip(&sb) {
        pa += x;
        pb += y;
        worst = worst.max(pb - pa);
    }
    worst
}

/// Prox agreement with [`prox_oracle`] (Euclidean, `oracle_tol`) and
/// between the two prox algorithms (per coordinate, 1e-12).
pub fn check_prox_oracle(instances: usize, max_p: usize, seed: u64, oracle_tol: f64) -> Vec<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = Tally::new("prox matches brute-force oracle");
    let mut agree = Tally::new("stack and PAVA prox agree");
    for _ in 0..instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let y = random_vector(&mut rng, p);
        let stack = prox_sorted_l1_with(&y, &lambda, ProxMethod::Stack).unwrap();
        let pava = prox_sorted_l1_with(&y, &lambda, ProxMethod::Pava).unwrap();
        let reference = prox_oracle(&y, lambda.as_slice());
        oracle.record(dist(&stack, &reference) - oracle_tol);
        let max_diff = stack.iter().zip(&pava).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        agree.record(max_diff - crate::sorted_l1::PROX_AGREEMENT_TOL);
    }
    vec![oracle.report(), agree.report()]
}

/// Majorization facts and the prox norm bound, each over `instances` random draws.
pub fn check_majorization_facts(instances: usize, max_p: usize, seed: u64) -> Vec<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut norm_dom = Tally::new("majorization implies norm dominance");
    while norm_dom.instances < instances {
        let p = rng.gen_range(1..=max_p);
        let b = random_vector(&mut rng, p);
        let a = random_majorizing(&mut rng, &b);
        // the construction majorizes up to roundoff; redraw the rare misses
        if !majorizes(&a, &b).unwrap() {
            continue;
        }
        let (na, nb) = (norm2(&a), norm2(&b));
        norm_dom.record(nb - na - ROUNDOFF * na.max(1.0));
    }

    let mut zero = Tally::new("prox vanishes on vectors majorized by lambda");
    while zero.instances < instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let a = random_majorized(&mut rng, lambda.as_slice());
        if !majorizes(lambda.as_slice(), &a).unwrap() {
            continue;
        }
        let prox = prox_sorted_l1(&a, &lambda).unwrap();
        zero.record(prox.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }

    let mut residual = Tally::new("lambda majorizes a - prox(a)");
    for _ in 0..instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let a = random_vector(&mut rng, p);
        let prox = prox_sorted_l1(&a, &lambda).unwrap();
        let r: Vec<f64> = a.iter().zip(&prox).map(|(x, y)| x - y).collect();
        let scale: f64 = lambda.as_slice().iter().sum::<f64>() + a.iter().map(|v| v.abs()).sum::<f64>();
        residual.record(majorization_excess(lambda.as_slice(), &r) - ROUNDOFF * scale);
    }

    let mut restriction = Tally::new("restricted prox dominates off-set coordinates");
    for _ in 0..instances {
        let p = rng.gen_range(2..=max_p.max(2));
        let lambda = random_weights(&mut rng, p);
        let a = random_vector(&mut rng, p);
        let m = rng.gen_range(1..p);
        let mut idx: Vec<usize> = (0..p).collect();
        idx.shuffle(&mut rng);
        let rest = &idx[m..];
        let prox = prox_sorted_l1(&a, &lambda).unwrap();
        let lhs = norm2(&rest.iter().map(|&j| prox[j]).collect::<Vec<_>>());
        let a_rest: Vec<f64> = rest.iter().map(|&j| a[j]).collect();
        let rhs = norm2(&prox_with_slice(&a_rest, lambda.tail(m)));
        restriction.record(lhs - rhs - ROUNDOFF * rhs.max(1.0));
    }

    let mut bound = Tally::new("prox norm bounded by shrunken magnitudes");
    for _ in 0..instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let a = random_vector(&mut rng, p);
        bound.record(if prox_norm_bound_holds(&a, &lambda).unwrap() { 0.0 } else { 1.0 });
    }

    let mut monotone = Tally::new("prox is monotone on nonnegative inputs");
    for _ in 0..instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let y: Vec<f64> = random_vector(&mut rng, p).iter().map(|v| v.abs()).collect();
        let y2: Vec<f64> = y.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
        let (lo, hi) = (prox_sorted_l1(&y, &lambda).unwrap(), prox_sorted_l1(&y2, &lambda).unwrap());
        let excess = lo.iter().zip(&hi).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        monotone.record(excess - ROUNDOFF * y2.iter().fold(1.0, |m: f64, v| m.max(*v)));
    }

    let mut nonexp = Tally::new("prox is nonexpansive");
    for _ in 0..instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let a = random_vector(&mut rng, p);
        let b = random_vector(&mut rng, p);
        let (pa, pb) = (prox_sorted_l1(&a, &lambda).unwrap(), prox_sorted_l1(&b, &lambda).unwrap());
        let d = dist(&a, &b);
        nonexp.record(dist(&pa, &pb) - d - ROUNDOFF * d.max(1.0));
    }

    let mut order = Tally::new("prox preserves magnitude order and signs");
    for _ in 0..instances {
        let p = rng.gen_range(1..=max_p);
        let lambda = random_weights(&mut rng, p);
        let a = random_vector(&mut rng, p);
        let prox = prox_sorted_l1(&a, &lambda).unwrap();
        let mut bad = 0.0_f64;
        for i in 0..p {
            if prox[i] != 0.0 && prox[i].signum() != a[i].signum() {
                bad = 1.0;
            }
            for j in 0..p {
                if a[i].abs() >= a[j].abs() && prox[i].abs() < prox[j].abs() {
                    bad = bad.max(prox[j].abs() - prox[i].abs());
                }
            }
        }
        order.record(bad);
    }

    vec![
        norm_dom.report(),
        zero.report(),
        residual.report(),
        restriction.report(),
        bound.report(),
        monotone.report(),
        nonexp.report(),
        order.report(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        assert_eq!(prox_oracle(&[5.0, 3.0], &[2.0, 1.0]), vec![3.0, 2.0]);
        assert_eq!(prox_oracle(&[3.5, -3.0], &[2.0, 1.0]), vec![1.75, -1.75]);
        assert_eq!(prox_oracle(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]), vec![0.0; 3]);
    }

    #[test]
    fn generators_respect_their_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = rng.gen_range(1..8);
            let lambda = random_weights(&mut rng, p);
            let a = random_majorized(&mut rng, lambda.as_slice());
            assert!(majorizes(lambda.as_slice(), &a).unwrap());
            let b = random_vector(&mut rng, p);
            let c = random_majorizing(&mut rng, &b);
            assert!(majorization_excess(&c, &b) <= 1e-12);
        }
    }

    #[test]
    fn small_suites_pass() {
        for r in check_prox_oracle(200, 8, 1, 1e-8) {
            assert!(r.passed(), "{r:?}");
        }
        for r in check_majorization_facts(200, 8, 2) {
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.instances, 200);
        }
    }
}
