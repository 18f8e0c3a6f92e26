//! Penalty schedules: Benjamini-Hochberg critical values, their inflated
//! version, and the `sqrt(2 log(p/j))` sequence.

use crate::error::{invalid, Result};
use crate::sorted_l1::WeightVector;
use libm::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Phi(x)`, accurate for large positive `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Phi^{-1}(alpha)` for `0 < alpha < 1`.
///
/// Wichura's AS241 rational approximation followed by one Newton step on the
/// smaller of the two tail probabilities, so extreme quantiles keep their
/// relative accuracy.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    let (tail, sign) = if alpha < 0.5 { (alpha, -1.0) } else { (1.0 - alpha, 1.0) };
    Ok(sign * upper_quantile_refined(tail))
}

/// `Phi^{-1}(1 - tail)` for `0 < tail < 1`, computed without forming
/// `1 - tail`.
pub fn normal_quantile_upper(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(invalid("tail", format!("must lie in (0, 1), got {tail}")));
    }
    if tail == 0.5 {
        return Ok(0.0);
    }
    if tail < 0.5 {
        Ok(upper_quantile_refined(tail))
    } else {
        Ok(-upper_quantile_refined(1.0 - tail))
    }
}

/// Positive `z` with `1 - Phi(z) = tail`, for `0 < tail < 1/2`.
fn upper_quantile_refined(tail: f64) -> f64 {
    let z = -as241(tail);
    let pdf = normal_pdf(z);
    if pdf > 0.0 {
        z + (normal_sf(z) - tail) / pdf
    } else {
        z
    }
}

/// AS241 (PPND16), about 1e-16 relative accuracy.
fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(invalid("q", format!("must lie in (0, 1), got {q}")))
    }
}

fn check_p(p: usize) -> Result<()> {
    if p >= 1 {
        Ok(())
    } else {
        Err(invalid("p", "must be at least 1"))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be positive and finite, got {sigma}")))
    }
}

/// `lambda_i = sigma * Phi^{-1}(1 - i q / (2p))` for `i = 1..=p`.
pub fn bh_weights(q: f64, p: usize, sigma: f64) -> Result<WeightVector> {
    check_q(q)?;
    check_p(p)?;
    check_sigma(sigma)?;
    let values = (1..=p)
        .map(|i| normal_quantile_upper(i as f64 * q / (2.0 * p as f64)).map(|z| sigma * z))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(values)
}

/// `(1 + epsilon)` times the BH schedule.
pub fn inflated_bh_weights(q: f64, epsilon: f64, p: usize, sigma: f64) -> Result<WeightVector> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("must be nonnegative, got {epsilon}")));
    }
    bh_weights(q, p, sigma)?.scaled(1.0 + epsilon)
}

/// Raw `sigma * sqrt(2 log(p / j))` sequence; the last entry is always zero,
/// so for `p = 1` the schedule is identically zero.
pub fn sqrtlog_values(p: usize, sigma: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    check_sigma(sigma)?;
    let pf = p as f64;
    Ok((1..=p)
        .map(|j| if j == p { 0.0 } else { sigma * (2.0 * (pf / j as f64).ln()).sqrt() })
        .collect())
}

/// [`sqrtlog_values`] as a penalty; fails for `p = 1`, where every weight is zero.
pub fn sqrtlog_weights(p: usize, sigma: f64) -> Result<WeightVector> {
    WeightVector::new(sqrtlog_values(p, sigma)?)
}

/// `sum_{j <= k} lambda_j^2`.
pub fn weight_energy(lambda: &WeightVector, k: usize) -> Result<f64> {
    if k == 0 || k > lambda.len() {
        return Err(invalid("k", format!("must lie in 1..={}, got {k}", lambda.len())));
    }
    Ok(lambda.as_slice()[..k].iter().map(|v| v * v).sum())
}

/// Which schedule to materialize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    Bh { q: f64 },
    InflatedBh { q: f64, epsilon: f64 },
    SqrtLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSchedule {
    pub kind: WeightKind,
    pub p: usize,
    pub sigma: f64,
}

impl WeightSchedule {
    pub fn materialize(&self) -> Result<WeightVector> {
        match self.kind {
            WeightKind::Bh { q } => bh_weights(q, self.p, self.sigma),
            WeightKind::InflatedBh { q, epsilon } => inflated_bh_weights(q, epsilon, self.p, self.sigma),
            WeightKind::SqrtLog => sqrtlog_weights(self.p, self.sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference quantiles from 60-digit bisection on erfc, evaluated at the
    // exact binary value of each alpha.
    const REFERENCE: &[(f64, f64)] = &[
        (0.975, 1.959_963_984_540_054_2),
        (0.9875, 2.241_402_727_604_945_4),
        (0.95, 1.644_853_626_951_472_7),
        (0.925, 1.439_531_470_938_455_9),
        (0.90, 1.281_551_565_544_600_5),
        (0.3, -0.524_400_512_708_040_8),
        (0.02425, -1.972_961_051_311_884_9),
        (0.999999, 4.753_424_308_817_088),
        (1e-5, -4.264_890_793_922_824_6),
        (1e-10, -6.361_340_902_404_056),
        (1e-20, -9.262_340_089_798_408),
        (1e-100, -21.273_453_560_965_324),
        (1e-300, -37.047_096_299_361_2),
        (0.9999999999999999, 8.209_536_151_601_387),
    ];

    #[test]
    fn quantile_matches_high_precision_reference() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        for &(alpha, expected) in REFERENCE {
            let got = normal_quantile(alpha).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn quantile_symmetry() {
        // dyadic alphas, so 1 - alpha is exact
        for alpha in [2f64.powi(-40), 2f64.powi(-20), 0.0078125, 0.25, 0.375, 0.4375] {
            let lo = normal_quantile(alpha).unwrap();
            let hi = normal_quantile(1.0 - alpha).unwrap();
            assert!((lo + hi).abs() <= 1e-12 * lo.abs().max(1.0), "alpha={alpha}");
        }
    }

    #[test]
    fn quantile_domain() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn bh_examples() {
        let l = bh_weights(0.2, 4, 1.0).unwrap();
        let expected = [1.9600, 1.6449, 1.4395, 1.2816];
        for (got, want) in l.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 5e-5, "{got} vs {want}");
        }
        let l = bh_weights(0.05, 2, 2.0).unwrap();
        assert_relative_eq!(l.first(), 4.482_805_455_209_890_8, max_relative = 1e-13);
    }

    #[test]
    fn bh_strictly_decreasing_and_monotone_in_parameters() {
        let base = bh_weights(0.1, 50, 1.0).unwrap();
        assert!(base.as_slice().windows(2).all(|w| w[0] > w[1]));
        let bigger_sigma = bh_weights(0.1, 50, 1.5).unwrap();
        let bigger_q = bh_weights(0.2, 50, 1.0).unwrap();
        for i in 0..50 {
            assert!(bigger_sigma.as_slice()[i] > base.as_slice()[i]);
            assert!(bigger_q.as_slice()[i] < base.as_slice()[i]);
        }
    }

    #[test]
    fn bh_domain_errors() {
        assert!(bh_weights(0.0, 4, 1.0).is_err());
        assert!(bh_weights(1.0, 4, 1.0).is_err());
        assert!(bh_weights(0.1, 0, 1.0).is_err());
        assert!(bh_weights(0.1, 4, 0.0).is_err());
        assert!(inflated_bh_weights(0.1, -0.5, 4, 1.0).is_err());
    }

    #[test]
    fn inflated_is_scalar_multiple() {
        let base = bh_weights(0.1, 10, 1.0).unwrap();
        let infl = inflated_bh_weights(0.1, 0.1, 10, 1.0).unwrap();
        for (a, b) in base.as_slice().iter().zip(infl.as_slice()) {
            assert_eq!(a * 1.1, *b);
        }
    }

    #[test]
    fn sqrtlog_examples() {
        assert_eq!(sqrtlog_values(1, 1.0).unwrap(), vec![0.0]);
        assert!(sqrtlog_weights(1, 1.0).is_err());
        let v = sqrtlog_values(4, 1.0).unwrap();
        let expected = [
            (2.0 * 4f64.ln()).sqrt(),
            (2.0 * 2f64.ln()).sqrt(),
            (2.0 * (4.0f64 / 3.0).ln()).sqrt(),
            0.0,
        ];
        assert_eq!(v, expected.to_vec());
        let v = sqrtlog_values(10, 3.0).unwrap();
        assert_relative_eq!(v[0], 6.437_898_078_868_041_7, max_relative = 1e-14);
        assert!(v.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn energy_examples() {
        let l = WeightVector::new(vec![2.0, 1.0]).unwrap();
        assert_eq!(weight_energy(&l, 2).unwrap(), 5.0);
        assert_eq!(weight_energy(&l, 1).unwrap(), 4.0);
        assert!(weight_energy(&l, 0).is_err());
        assert!(weight_energy(&l, 3).is_err());
    }

    #[test]
    fn energy_ratio_near_one_for_large_p() {
        let p = 1_000_000;
        let k = 10;
        let l = bh_weights(0.1, p, 1.0).unwrap();
        let ratio = weight_energy(&l, k).unwrap() / (2.0 * k as f64 * (p as f64 / k as f64).ln());
        assert!((0.9..=1.2).contains(&ratio), "ratio={ratio}");
    }

    #[test]
    fn energy_ratio_trends_to_one() {
        let k = 10;
        let gaps: Vec<f64> = [1_000usize, 10_000, 100_000, 1_000_000]
            .iter()
            .map(|&p| {
                let l = bh_weights(0.1, p, 1.0).unwrap();
                let r = weight_energy(&l, k).unwrap() / (2.0 * k as f64 * (p as f64 / k as f64).ln());
                (r - 1.0).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn schedule_materializes() {
        let s = WeightSchedule { kind: WeightKind::InflatedBh { q: 0.1, epsilon: 0.1 }, p: 5, sigma: 2.0 };
        assert_eq!(s.materialize().unwrap(), inflated_bh_weights(0.1, 0.1, 5, 2.0).unwrap());
    }
}
