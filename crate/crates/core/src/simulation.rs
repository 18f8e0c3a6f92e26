//! Replicated experiments on Gaussian or identity designs.
//!
//! Every replicate draws its design, signal and noise from its own ChaCha8
//! stream, keyed by `(seed, replicate, purpose)`, so the output does not
//! depend on how replicates are scheduled across threads. Gaussian variates
//! come from `rand_distr::StandardNormal` (ziggurat).

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result, SlopeError};
use crate::estimators::{fdr_hard_threshold, sequential_fdr_soft, soft_threshold, sure_soft_threshold};
use crate::linalg::{norm2_sq, Design};
use crate::solver::{fit_slope, lasso_fit, SolverOptions};
use crate::sorted_l1::{prox_sorted_l1, WeightVector};
use crate::weights::{bh_weights, WeightKind, WeightSchedule};

const STREAM_DESIGN: u64 = 0;
const STREAM_SIGNAL: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAMS_PER_REPLICATE: u64 = 3;

/// Entries of `beta_hat` count as discoveries above this multiple of `lambda_1`.
pub const SUPPORT_FLOOR: f64 = 1e-10;

fn stream(seed: u64, replicate: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 * STREAMS_PER_REPLICATE + purpose);
    rng
}

/// Magnitude of the nonzero coefficients, in response units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AmplitudeRule {
    /// `multiplier * sqrt(2 log p)`.
    Constant { multiplier: f64 },
    /// `multiplier * lambda^BH_1(q)` at unit noise level.
    ConstantBh { multiplier: f64, q: f64 },
    /// Amplitude `tau`, one nonzero per block; requires block placement.
    BlockPrior { tau: f64 },
    /// `base + step * (k - 1 - j)` for the `j`-th nonzero, so consecutive
    /// amplitudes differ by `step`.
    Spaced { base: f64, step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    FirstK,
    UniformRandom,
    /// One index drawn uniformly in each of `k` consecutive blocks.
    BlockUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub k: usize,
    pub amplitude: AmplitudeRule,
    pub placement: Placement,
    /// Flip each sign with probability 1/2.
    #[serde(default)]
    pub random_signs: bool,
}

impl SignalSpec {
    fn amplitudes(&self, p: usize) -> Result<Vec<f64>> {
        let k = self.k;
        let amps = match self.amplitude {
            AmplitudeRule::Constant { multiplier } => {
                vec![multiplier * (2.0 * (p as f64).ln()).sqrt(); k]
            }
            AmplitudeRule::ConstantBh { multiplier, q } => {
                vec![multiplier * bh_weights(q, p, 1.0)?.first(); k]
            }
            AmplitudeRule::BlockPrior { tau } => {
                if self.placement != Placement::BlockUniform {
                    return Err(invalid("placement", "the block prior needs block-uniform placement"));
                }
                vec![tau; k]
            }
            AmplitudeRule::Spaced { base, step } => {
                (0..k).map(|j| base + step * (k - 1 - j) as f64).collect()
            }
        };
        if amps.iter().any(|a| !a.is_finite()) {
            return Err(SlopeError::NonFinite("amplitude"));
        }
        Ok(amps)
    }
}

/// Ground-truth coefficients with exactly `spec.k` nonzeros (given nonzero amplitudes).
pub fn gen_signal(spec: &SignalSpec, p: usize, seed: u64) -> Result<Vec<f64>> {
    gen_signal_with(spec, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn gen_signal_with(spec: &SignalSpec, p: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let k = spec.k;
    if k > p {
        return Err(invalid("k", format!("sparsity {k} exceeds p = {p}")));
    }
    let amps = spec.amplitudes(p)?;
    let positions: Vec<usize> = match spec.placement {
        Placement::FirstK => (0..k).collect(),
        Placement::UniformRandom => {
            let mut idx = index::sample(rng, p, k).into_vec();
            idx.sort_unstable();
            idx
        }
        Placement::BlockUniform => (0..k)
            .map(|b| {
                let lo = b * p / k;
                let hi = (b + 1) * p / k;
                rng.gen_range(lo..hi)
            })
            .collect(),
    };
    let mut beta = vec![0.0; p];
    for (&i, &a) in positions.iter().zip(&amps) {
        let flip = spec.random_signs && rng.gen::<bool>();
        beta[i] = if flip { -a } else { a };
    }
    Ok(beta)
}

/// `n x p` design with i.i.d. `N(0, 1/n)` entries.
pub fn gen_design(n: usize, p: usize, seed: u64) -> Result<Design> {
    gen_design_with(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn gen_design_with(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<Design> {
    let scale = 1.0 / (n as f64).sqrt();
    let data: Vec<f64> = (0..n * p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    Design::new(n, p, data)
}

/// Size of the resolvent set used by [`run_experiment`]:
/// `max(ceil(2k / (1 - q)), k + min(floor(sqrt(k n / log p)), floor(sqrt p)))`,
/// capped at `p - 1`. `None` when the cap falls below `k`.
pub fn resolvent_size(k: usize, n: usize, p: usize, q: f64) -> Option<usize> {
    if p < 2 {
        return None;
    }
    let pf = p as f64;
    let d = ((k as f64 * n as f64 / pf.ln()).sqrt().floor()).min(pf.sqrt().floor()) as usize;
    let fdr_part = (2.0 * k as f64 / (1.0 - q)).ceil() as usize;
    let size = fdr_part.max(k + d).min(p - 1);
    (size >= k).then_some(size)
}

/// `S` plus the `size - |S|` indices off `S` with the largest `|X_i' z|`,
/// returned sorted.
pub fn resolvent_set(x: &Design, z: &[f64], support: &[usize], size: usize) -> Result<Vec<usize>> {
    check_len(x.n(), z.len())?;
    resolvent_from_scores(&x.tr_mul_vec(z), support, size)
}

fn resolvent_from_scores(scores: &[f64], support: &[usize], size: usize) -> Result<Vec<usize>> {
    let p = scores.len();
    if let Some(&bad) = support.iter().find(|&&i| i >= p) {
        return Err(SlopeError::IndexOutOfRange { index: bad, dim: p });
    }
    let mut in_support = vec![false; p];
    support.iter().for_each(|&i| in_support[i] = true);
    let s = in_support.iter().filter(|&&b| b).count();
    if size < s || size >= p {
        return Err(invalid("size", format!("need |S| = {s} <= size < p = {p}, got {size}")));
    }
    let mut off: Vec<usize> = (0..p).filter(|&i| !in_support[i]).collect();
    // stable: ties keep index order
    off.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()));
    let mut set: Vec<usize> = (0..p).filter(|&i| in_support[i]).collect();
    set.extend_from_slice(&off[..size - s]);
    set.sort_unstable();
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Slope,
    Lasso,
    FdrHard,
    SeqFdr,
    Sure,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Slope, Method::Lasso, Method::FdrHard, Method::SeqFdr, Method::Sure];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Slope => "slope",
            Method::Lasso => "lasso",
            Method::FdrHard => "fdr-hard",
            Method::SeqFdr => "seq-fdr",
            Method::Sure => "sure",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = SlopeError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid("method", format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// i.i.d. `N(0, 1/n)` entries.
    #[default]
    Gaussian,
    /// `X = I`; requires `n == p`. Never materialized.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightFamily {
    #[default]
    Bh,
    Sqrtlog,
}

fn default_sure_grid() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub sigma: f64,
    #[serde(default)]
    pub design: DesignKind,
    /// FDR level for the BH schedule and the thresholding competitors.
    pub q: f64,
    #[serde(default)]
    pub weights: WeightFamily,
    /// SLOPE uses `(1 + epsilon)` times the base schedule.
    #[serde(default)]
    pub epsilon: f64,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub signal: SignalShape,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Thresholds tried by SURE in addition to every `|X_i' y|`.
    #[serde(default = "default_sure_grid")]
    pub sure_grid: Vec<f64>,
    /// Write FDP and V histogram tables.
    #[serde(default)]
    pub histograms: bool,
}

/// [`SignalSpec`] without the sparsity, which the config holds at top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalShape {
    pub amplitude: AmplitudeRule,
    pub placement: Placement,
    #[serde(default)]
    pub random_signs: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(invalid("n", "n and p must be at least 1"));
        }
        if self.k > self.p {
            return Err(invalid("k", format!("sparsity {} exceeds p = {}", self.k, self.p)));
        }
        if self.design == DesignKind::Identity && self.n != self.p {
            return Err(invalid("n", "the identity design needs n == p"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive and finite, got {}", self.sigma)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(invalid("q", format!("must lie in (0, 1), got {}", self.q)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be nonnegative, got {}", self.epsilon)));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "must list at least one method"));
        }
        if self.methods.iter().enumerate().any(|(i, m)| self.methods[..i].contains(m)) {
            return Err(invalid("methods", "must not repeat a method"));
        }
        self.signal_spec().amplitudes(self.p)?;
        Ok(())
    }

    pub fn signal_spec(&self) -> SignalSpec {
        SignalSpec {
            k: self.k,
            amplitude: self.signal.amplitude,
            placement: self.signal.placement,
            random_signs: self.signal.random_signs,
        }
    }

    /// SLOPE weights, noise level included.
    pub fn lambda(&self) -> Result<WeightVector> {
        let kind = match self.weights {
            WeightFamily::Bh => WeightKind::Bh { q: self.q },
            WeightFamily::Sqrtlog => WeightKind::SqrtLog,
        };
        WeightSchedule { kind, p: self.p, sigma: self.sigma }
            .materialize()?
            .scaled(1.0 + self.epsilon)
    }
}

/// Per-replicate, per-method outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub replicate: usize,
    pub method: Method,
    /// `||beta_hat - beta||^2`.
    pub mse: f64,
    /// `||X beta_hat - X beta||^2`.
    pub pred_err: f64,
    pub v: usize,
    pub r: usize,
    pub fdp: f64,
    pub tpp: f64,
    /// `mse / (2 sigma^2 k log(p / k))`; NaN when `k` is 0 or `p`.
    pub mse_ratio: f64,
    /// Whether the supports of `beta`, `beta_hat` and the one-step oracle
    /// sit inside the resolvent set. SLOPE only.
    pub support_in_resolvent: Option<bool>,
    /// `V <= q k / (1 - q)`.
    pub v_bound_ok: bool,
    pub converged: bool,
    pub iterations: usize,
    pub duality_gap: f64,
}

/// What [`compute_metrics`] needs besides the vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricContext {
    pub sigma: f64,
    pub q: f64,
    /// `|beta_hat_i|` above this counts as a discovery.
    pub support_floor: f64,
}

/// Loss and discovery counts; `x = None` stands for the identity design.
pub fn compute_metrics(beta: &[f64], beta_hat: &[f64], x: Option<&Design>, ctx: &MetricContext) -> Result<TrialMetrics> {
    check_len(beta.len(), beta_hat.len())?;
    let p = beta.len();
    let diff: Vec<f64> = beta_hat.iter().zip(beta).map(|(a, b)| a - b).collect();
    let mse = norm2_sq(&diff);
    let pred_err = match x {
        Some(x) => {
            check_len(x.p(), p)?;
            norm2_sq(&x.mul_vec(&diff))
        }
        None => mse,
    };
    let k = beta.iter().filter(|b| **b != 0.0).count();
    let mut r = 0;
    let mut v = 0;
    for (bh, b) in beta_hat.iter().zip(beta) {
        if bh.abs() > ctx.support_floor {
            r += 1;
            if *b == 0.0 {
                v += 1;
            }
        }
    }
    let mse_ratio = if k == 0 || k == p {
        f64::NAN
    } else {
        mse / (2.0 * ctx.sigma * ctx.sigma * k as f64 * (p as f64 / k as f64).ln())
    };
    Ok(TrialMetrics {
        replicate: 0,
        method: Method::Slope,
        mse,
        pred_err,
        v,
        r,
        fdp: v as f64 / r.max(1) as f64,
        tpp: (r - v) as f64 / k.max(1) as f64,
        mse_ratio,
        support_in_resolvent: None,
        v_bound_ok: v as f64 <= ctx.q / (1.0 - ctx.q) * k as f64,
        converged: true,
        iterations: 0,
        duality_gap: 0.0,
    })
}

struct MethodOutput {
    beta_hat: Vec<f64>,
    converged: bool,
    iterations: usize,
    duality_gap: f64,
}

impl MethodOutput {
    fn closed_form(beta_hat: Vec<f64>) -> Self {
        MethodOutput { beta_hat, converged: true, iterations: 0, duality_gap: 0.0 }
    }
}

fn run_replicate(cfg: &ExperimentConfig, lambda: &WeightVector, replicate: usize) -> Result<Vec<TrialMetrics>> {
    let (n, p) = (cfg.n, cfg.p);
    let x = match cfg.design {
        DesignKind::Gaussian => Some(gen_design_with(n, p, &mut stream(cfg.seed, replicate, STREAM_DESIGN))?),
        DesignKind::Identity => None,
    };
    let beta = gen_signal_with(&cfg.signal_spec(), p, &mut stream(cfg.seed, replicate, STREAM_SIGNAL))?;
    let mut noise_rng = stream(cfg.seed, replicate, STREAM_NOISE);
    let z: Vec<f64> = (0..n).map(|_| cfg.sigma * noise_rng.sample::<f64, _>(StandardNormal)).collect();

    let y: Vec<f64> = match &x {
        Some(x) => x.mul_vec(&beta).iter().zip(&z).map(|(a, b)| a + b).collect(),
        None => beta.iter().zip(&z).map(|(a, b)| a + b).collect(),
    };
    let xty = match &x {
        Some(x) => x.tr_mul_vec(&y),
        None => y.clone(),
    };
    let ctx = MetricContext { sigma: cfg.sigma, q: cfg.q, support_floor: SUPPORT_FLOOR * lambda.first() };

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let res = match method {
            Method::Slope => match &x {
                Some(x) => {
                    let fit = fit_slope(x, &y, lambda, &cfg.solver)?;
                    MethodOutput {
                        beta_hat: fit.beta_hat,
                        converged: fit.converged,
                        iterations: fit.iterations,
                        duality_gap: fit.duality_gap,
                    }
                }
                None => MethodOutput::closed_form(prox_sorted_l1(&y, lambda)?),
            },
            Method::Lasso => match &x {
                Some(x) => {
                    let fit = lasso_fit(x, &y, lambda.first(), &cfg.solver)?;
                    MethodOutput {
                        beta_hat: fit.beta_hat,
                        converged: fit.converged,
                        iterations: fit.iterations,
                        duality_gap: fit.duality_gap,
                    }
                }
                None => MethodOutput::closed_form(soft_threshold(&y, lambda.first())),
            },
            Method::FdrHard => MethodOutput::closed_form(fdr_hard_threshold(&xty, cfg.q, cfg.sigma)?.beta_hat),
            Method::SeqFdr => MethodOutput::closed_form(sequential_fdr_soft(&xty, cfg.q, cfg.sigma)?),
            Method::Sure => MethodOutput::closed_form(sure_soft_threshold(&xty, cfg.sigma, &cfg.sure_grid)?.beta_hat),
        };
        let mut m = compute_metrics(&beta, &res.beta_hat, x.as_ref(), &ctx)?;
        m.replicate = replicate;
        m.method = method;
        m.converged = res.converged;
        m.iterations = res.iterations;
        m.duality_gap = res.duality_gap;
        if method == Method::Slope {
            m.support_in_resolvent = localization(cfg, x.as_ref(), &z, &beta, &res.beta_hat, lambda, ctx.support_floor)?;
        }
        out.push(m);
    }
    Ok(out)
}

/// Checks `supp(beta) + supp(beta_hat) + supp(beta_tilde)` against the
/// resolvent set, where `beta_tilde = prox(beta + X'z)`.
fn localization(
    cfg: &ExperimentConfig,
    x: Option<&Design>,
    z: &[f64],
    beta: &[f64],
    beta_hat: &[f64],
    lambda: &WeightVector,
    floor: f64,
) -> Result<Option<bool>> {
    let Some(size) = resolvent_size(cfg.k, cfg.n, cfg.p, cfg.q) else {
        return Ok(None);
    };
    let xtz = match x {
        Some(x) => x.tr_mul_vec(z),
        None => z.to_vec(),
    };
    let support: Vec<usize> = (0..beta.len()).filter(|&i| beta[i] != 0.0).collect();
    if support.len() > size {
        return Ok(None);
    }
    let point: Vec<f64> = beta.iter().zip(&xtz).map(|(b, g)| b + g).collect();
    let beta_tilde = prox_sorted_l1(&point, lambda)?;
    let set = resolvent_from_scores(&xtz, &support, size)?;
    let mut inside = vec![false; beta.len()];
    set.iter().for_each(|&i| inside[i] = true);
    let ok = (0..beta.len()).all(|i| inside[i] || (beta_hat[i].abs() <= floor && beta_tilde[i].abs() <= floor));
    Ok(Some(ok))
}

/// Mean, standard error and quantiles over the finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Stat {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Stat {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let count = v.len();
        if count == 0 {
            let nan = f64::NAN;
            return Stat { count, mean: nan, se: nan, q05: nan, q25: nan, median: nan, q75: nan, q95: nan };
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            f64::NAN
        };
        // linear interpolation between order statistics
        let quantile = |prob: f64| {
            let h = prob * (count - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Stat {
            count,
            mean,
            se,
            q05: quantile(0.05),
            q25: quantile(0.25),
            median: quantile(0.5),
            q75: quantile(0.75),
            q95: quantile(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub mse: Stat,
    pub pred_err: Stat,
    pub fdp: Stat,
    pub v: Stat,
    pub r: Stat,
    pub tpp: Stat,
    pub mse_ratio: Stat,
    pub v_bound_fraction: f64,
    pub converged_fraction: f64,
    /// Fraction of replicates localized by the resolvent set, when checked.
    pub resolvent_fraction: Option<f64>,
}

impl MethodSummary {
    pub fn from_trials(method: Method, trials: &[TrialMetrics]) -> MethodSummary {
        let rows: Vec<&TrialMetrics> = trials.iter().filter(|t| t.method == method).collect();
        let stat = |f: fn(&TrialMetrics) -> f64| Stat::from_values(rows.iter().map(|t| f(t)));
        let fraction = |hits: usize, total: usize| if total == 0 { f64::NAN } else { hits as f64 / total as f64 };
        let checked: Vec<bool> = rows.iter().filter_map(|t| t.support_in_resolvent).collect();
        MethodSummary {
            method,
            trials: rows.len(),
            mse: stat(|t| t.mse),
            pred_err: stat(|t| t.pred_err),
            fdp: stat(|t| t.fdp),
            v: stat(|t| t.v as f64),
            r: stat(|t| t.r as f64),
            tpp: stat(|t| t.tpp),
            mse_ratio: stat(|t| t.mse_ratio),
            v_bound_fraction: fraction(rows.iter().filter(|t| t.v_bound_ok).count(), rows.len()),
            converged_fraction: fraction(rows.iter().filter(|t| t.converged).count(), rows.len()),
            resolvent_fraction: (!checked.is_empty())
                .then(|| fraction(checked.iter().filter(|&&b| b).count(), checked.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub resolvent_size: Option<usize>,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Replicate-major, methods in config order.
    pub trials: Vec<TrialMetrics>,
    pub summary: ExperimentSummary,
}

impl ExperimentResult {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.methods.iter().find(|m| m.method == method)
    }

    pub fn trials_for(&self, method: Method) -> impl Iterator<Item = &TrialMetrics> {
        self.trials.iter().filter(move |t| t.method == method)
    }
}

/// Runs every replicate on the current rayon pool and merges in replicate order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let lambda = cfg.lambda()?;
    let per_replicate: Vec<Result<Vec<TrialMetrics>>> =
        (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, &lambda, r)).collect();
    let mut trials = Vec::with_capacity(cfg.replicates * cfg.methods.len());
    for rows in per_replicate {
        trials.extend(rows?);
    }
    let methods = cfg.methods.iter().map(|&m| MethodSummary::from_trials(m, &trials)).collect();
    let summary = ExperimentSummary {
        config: cfg.clone(),
        resolvent_size: resolvent_size(cfg.k, cfg.n, cfg.p, cfg.q),
        methods,
    };
    Ok(ExperimentResult { trials, summary })
}

/// Column names of [`trials_csv`].
pub const TRIAL_COLUMNS: [&str; 14] = [
    "replicate",
    "method",
    "mse",
    "pred_err",
    "v",
    "r",
    "fdp",
    "tpp",
    "mse_ratio",
    "support_in_resolvent",
    "v_bound_ok",
    "converged",
    "iterations",
    "duality_gap",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// One header line, then one row per trial; floats via [`format_f64`].
pub fn trials_csv(trials: &[TrialMetrics]) -> String {
    let mut out = TRIAL_COLUMNS.join(",");
    out.push('\n');
    for t in trials {
        let row = [
            t.replicate.to_string(),
            t.method.to_string(),
            format_f64(t.mse),
            format_f64(t.pred_err),
            t.v.to_string(),
            t.r.to_string(),
            format_f64(t.fdp),
            format_f64(t.tpp),
            format_f64(t.mse_ratio),
            t.support_in_resolvent.map_or(String::new(), |b| b.to_string()),
            t.v_bound_ok.to_string(),
            t.converged.to_string(),
            t.iterations.to_string(),
            format_f64(t.duality_gap),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Whitespace-delimited FDP histogram, one count column per method.
pub fn fdp_histogram(trials: &[TrialMetrics], methods: &[Method], bins: usize) -> String {
    let bins = bins.max(1);
    let mut counts = vec![vec![0usize; methods.len()]; bins];
    for t in trials {
        if let Some(col) = methods.iter().position(|m| *m == t.method) {
            let bin = ((t.fdp * bins as f64) as usize).min(bins - 1);
            counts[bin][col] += 1;
        }
    }
    let mut out = format!("# fdp_lo fdp_hi {}\n", join_methods(methods));
    for (b, row) in counts.iter().enumerate() {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        out.push_str(&format!("{lo} {hi} {}\n", join_counts(row)));
    }
    out
}

/// Whitespace-delimited table of how often each false-discovery count occurs.
pub fn v_histogram(trials: &[TrialMetrics], methods: &[Method]) -> String {
    let max_v = trials.iter().map(|t| t.v).max().unwrap_or(0);
    let mut counts = vec![vec![0usize; methods.len()]; max_v + 1];
    for t in trials {
        if let Some(col) = methods.iter().position(|m| *m == t.method) {
            counts[t.v][col] += 1;
        }
    }
    let mut out = format!("# v {}\n", join_methods(methods));
    for (v, row) in counts.iter().enumerate() {
        out.push_str(&format!("{v} {}\n", join_counts(row)));
    }
    out
}

fn join_methods(methods: &[Method]) -> String {
    methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(" ")
}

fn join_counts(row: &[usize]) -> String {
    row.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}
