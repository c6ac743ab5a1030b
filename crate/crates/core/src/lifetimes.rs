//! Population lifetime models: the empirical mean-lifetime baseline and
//! Weibull / log-normal fits with conditional expected remaining life
//! E[Z | Z > t] - t.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::numeric::{gauss_legendre_unit_512, ln_normal_pdf, ln_normal_sf, normal_hazard};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LifetimeError {
    #[error("lifetime sample needs at least 2 values, got {0}")]
    TooFew(usize),
    #[error("lifetimes must be positive and finite, got {0}")]
    NonPositive(f64),
    #[error("degenerate sample: {0}")]
    Degenerate(&'static str),
    #[error("weibull MLE did not converge after {iterations} iterations (last shape {last_shape}, scale {last_scale})")]
    NoConvergence { iterations: usize, last_shape: f64, last_scale: f64 },
    #[error("survival at t={t} is {survival:e}; conditional sampling is unreliable, use quadrature mode")]
    TailUnderflow { t: f64, survival: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot parse lifetime model: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeSample {
    lifetimes: Vec<f64>,
}

impl LifetimeSample {
    pub fn new(lifetimes: Vec<f64>) -> Result<Self, LifetimeError> {
        if lifetimes.len() < 2 {
            return Err(LifetimeError::TooFew(lifetimes.len()));
        }
        if let Some(&bad) = lifetimes.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(LifetimeError::NonPositive(bad));
        }
        Ok(Self { lifetimes })
    }

    pub fn from_cycles(cycles: &[u32]) -> Result<Self, LifetimeError> {
        Self::new(cycles.iter().map(|&c| c as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.lifetimes
    }

    pub fn len(&self) -> usize {
        self.lifetimes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifetimes.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.lifetimes.iter().sum::<f64>() / self.len() as f64
    }
}

/// Mean lifetime minus elapsed cycles, unclamped.
pub fn empirical_expected_rul(sample: &LifetimeSample, t: f64) -> f64 {
    sample.mean() - t
}

pub fn clamp_rul(value: f64, clamp_zero: bool) -> f64 {
    if clamp_zero {
        value.max(0.0)
    } else {
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Weibull,
    LogNormal,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Weibull => "weibull",
            Family::LogNormal => "lognormal",
        }
    }
}

impl FromStr for Family {
    type Err = LifetimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weibull" => Ok(Family::Weibull),
            "lognormal" | "log-normal" => Ok(Family::LogNormal),
            other => Err(LifetimeError::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Weibull with scale `a` (cycles) and shape `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub a: f64,
    pub b: f64,
}

/// Log-normal with log-scale location `a` and log-scale deviation `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalParams {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LifetimeModel {
    Weibull(WeibullParams),
    LogNormal(LogNormalParams),
}

impl LifetimeModel {
    pub fn new(family: Family, a: f64, b: f64) -> Result<Self, LifetimeError> {
        if !(a.is_finite() && b.is_finite() && b > 0.0) {
            return Err(LifetimeError::InvalidParams(format!("a={a}, b={b}")));
        }
        match family {
            Family::Weibull if a > 0.0 => Ok(Self::Weibull(WeibullParams { a, b })),
            Family::Weibull => Err(LifetimeError::InvalidParams(format!("weibull scale {a} <= 0"))),
            Family::LogNormal => Ok(Self::LogNormal(LogNormalParams { a, b })),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Weibull(_) => Family::Weibull,
            Self::LogNormal(_) => Family::LogNormal,
        }
    }

    pub fn params(&self) -> (f64, f64) {
        match *self {
            Self::Weibull(WeibullParams { a, b }) | Self::LogNormal(LogNormalParams { a, b }) => (a, b),
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Weibull(WeibullParams { a, b }) => {
                let x = z / a;
                b / a * x.powf(b - 1.0) * (-x.powf(b)).exp()
            }
            Self::LogNormal(LogNormalParams { a, b }) => {
                let w = (z.ln() - a) / b;
                (ln_normal_pdf(w)).exp() / (b * z)
            }
        }
    }

    pub fn ln_survival(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Weibull(WeibullParams { a, b }) => -(z / a).powf(b),
            Self::LogNormal(LogNormalParams { a, b }) => ln_normal_sf((z.ln() - a) / b),
        }
    }

    pub fn survival(&self, z: f64) -> f64 {
        self.ln_survival(z).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        -self.ln_survival(z).exp_m1()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Weibull(WeibullParams { a, b }) => a * gamma(1.0 + 1.0 / b),
            Self::LogNormal(LogNormalParams { a, b }) => (a + 0.5 * b * b).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Weibull(WeibullParams { a, b }) => {
                let u: f64 = 1.0 - rng.random::<f64>();
                a * (-u.ln()).powf(1.0 / b)
            }
            Self::LogNormal(LogNormalParams { a, b }) => {
                let n: f64 = rng.sample(StandardNormal);
                (a + b * n).exp()
            }
        }
    }

    /// Mean residual life E[Z - t | Z > t] by 512-point Gauss-Legendre
    /// quadrature, deterministic.
    pub fn mean_residual_life(&self, t: f64) -> f64 {
        let (a, b) = self.params();
        residual_life_with_grad(self.family(), a, b, t).value
    }
}

impl fmt::Display for LifetimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.params();
        write!(f, "family={} a={a:?} b={b:?}", self.family().name())
    }
}

impl FromStr for LifetimeModel {
    type Err = LifetimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut family = None;
        let mut a = None;
        let mut b = None;
        for token in s.split_whitespace() {
            let (key, value) =
                token.split_once('=').ok_or_else(|| LifetimeError::Parse(token.to_string()))?;
            let num = || value.parse::<f64>().map_err(|_| LifetimeError::Parse(token.to_string()));
            match key {
                "family" => family = Some(value.parse::<Family>()?),
                "a" => a = Some(num()?),
                "b" => b = Some(num()?),
                _ => return Err(LifetimeError::Parse(format!("unknown key {key:?}"))),
            }
        }
        match (family, a, b) {
            (Some(f), Some(a), Some(b)) => LifetimeModel::new(f, a, b),
            _ => Err(LifetimeError::Parse(format!("incomplete model description {s:?}"))),
        }
    }
}

/// Mean residual life together with its partial derivatives in (a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualLife {
    pub value: f64,
    pub d_a: f64,
    pub d_b: f64,
}

/// E[Z | Z > t] - t = ∫_0^∞ S(t+u)/S(t) du, integrated with the 512-point
/// rule after mapping u = L s / (1 - s). The derivatives differentiate the
/// integrand at fixed nodes; L only shapes the node placement.
pub fn residual_life_with_grad(family: Family, a: f64, b: f64, t: f64) -> ResidualLife {
    let (nodes, weights) = gauss_legendre_unit_512();
    let t = t.max(0.0);
    match family {
        Family::Weibull => {
            let h = |z: f64| if z <= 0.0 { 0.0 } else { (z / a).powf(b) };
            let dh = |z: f64, hz: f64| {
                if z <= 0.0 {
                    (0.0, 0.0)
                } else {
                    (-b * hz / a, hz * (z / a).ln())
                }
            };
            let ht = h(t);
            let (dht_a, dht_b) = dh(t, ht);
            // conditional median residual
            let length = (a * (ht + std::f64::consts::LN_2).powf(1.0 / b) - t).max(1e-3 * a);
            let mut acc = ResidualLife { value: 0.0, d_a: 0.0, d_b: 0.0 };
            for (s, w) in nodes.iter().zip(weights) {
                let u = length * s / (1.0 - s);
                let jac = length / ((1.0 - s) * (1.0 - s));
                let z = t + u;
                let hz = h(z);
                let ratio = (ht - hz).exp();
                if ratio == 0.0 {
                    continue;
                }
                let (dhz_a, dhz_b) = dh(z, hz);
                let wr = w * jac * ratio;
                acc.value += wr;
                acc.d_a += wr * (dht_a - dhz_a);
                acc.d_b += wr * (dht_b - dhz_b);
            }
            acc
        }
        Family::LogNormal => {
            let wv = |z: f64| if z <= 0.0 { f64::NEG_INFINITY } else { (z.ln() - a) / b };
            // d lnQ(w(z)) / d(a, b) = ν(w)·(1/b, w/b)
            let dlnq = |w: f64| {
                if w == f64::NEG_INFINITY {
                    (0.0, 0.0)
                } else {
                    let nu = normal_hazard(w);
                    (nu / b, nu * w / b)
                }
            };
            let wt = wv(t);
            let lnq_t = ln_normal_sf(wt);
            let (dt_a, dt_b) = dlnq(wt);
            let length = if wt > 1.0 { t * b / wt } else { (a + 0.5 * b * b).exp() * b.min(1.0) + t * b };
            let mut acc = ResidualLife { value: 0.0, d_a: 0.0, d_b: 0.0 };
            for (s, w) in nodes.iter().zip(weights) {
                let u = length * s / (1.0 - s);
                let jac = length / ((1.0 - s) * (1.0 - s));
                let wz = wv(t + u);
                let ratio = (ln_normal_sf(wz) - lnq_t).exp();
                if ratio == 0.0 {
                    continue;
                }
                let (dz_a, dz_b) = dlnq(wz);
                let wr = w * jac * ratio;
                acc.value += wr;
                acc.d_a += wr * (dz_a - dt_a);
                acc.d_b += wr * (dz_b - dt_b);
            }
            acc
        }
    }
}

/// Weibull scale maximizing the likelihood for a fixed shape.
pub fn weibull_scale_given_shape(sample: &LifetimeSample, b: f64) -> f64 {
    let c = sample.values().iter().cloned().fold(f64::MIN, f64::max);
    let mean_pow = sample.values().iter().map(|z| (z / c).powf(b)).sum::<f64>() / sample.len() as f64;
    c * mean_pow.powf(1.0 / b)
}

/// Gradient of the per-observation mean Weibull log-likelihood in (a, b).
pub fn weibull_mean_loglik_gradient(sample: &LifetimeSample, p: WeibullParams) -> (f64, f64) {
    let n = sample.len() as f64;
    let (mut ga, mut gb) = (0.0, 0.0);
    for &z in sample.values() {
        let x = z / p.a;
        let xb = x.powf(p.b);
        ga += -p.b / p.a + p.b / p.a * xb;
        gb += 1.0 / p.b + x.ln() - xb * x.ln();
    }
    (ga / n, gb / n)
}

const WEIBULL_MAX_ITER: usize = 200;
const WEIBULL_TOL: f64 = 1e-10;

/// Weibull MLE by safeguarded Newton iteration on the profile score in the
/// shape, with the scale eliminated in closed form.
pub fn fit_weibull_mle(sample: &LifetimeSample) -> Result<WeibullParams, LifetimeError> {
    let z = sample.values();
    let c = z.iter().cloned().fold(f64::MIN, f64::max);
    let logs: Vec<f64> = z.iter().map(|v| (v / c).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
    if logs.iter().all(|l| (l - logs[0]).abs() < 1e-14) {
        return Err(LifetimeError::Degenerate("all lifetimes equal"));
    }

    // Profile score g(b) = 1/b + mean(ln x) - Σ x^b ln x / Σ x^b; strictly decreasing.
    let score = |b: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (b * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let m1 = s1 / s0;
        let g = 1.0 / b + mean_log - m1;
        let dg = -1.0 / (b * b) - (s2 / s0 - m1 * m1);
        (g, dg)
    };

    let mean = sample.mean();
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
    let mut b = (sd / mean).powf(-1.086).clamp(0.02, 500.0);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for iter in 0..WEIBULL_MAX_ITER {
        let (g, dg) = score(b);
        if g > 0.0 {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
        let mut next = b - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * b };
        }
        let step = (next - b).abs();
        b = next;
        if step < WEIBULL_TOL * b.max(1.0) {
            // one more Newton step to land on the score's floating-point zero
            let (g, dg) = score(b);
            let polished = b - g / dg;
            if polished.is_finite() && polished > 0.0 {
                b = polished;
            }
            let a = c * (logs.iter().map(|l| (b * l).exp()).sum::<f64>() / logs.len() as f64).powf(1.0 / b);
            return Ok(WeibullParams { a, b });
        }
        if iter + 1 == WEIBULL_MAX_ITER {
            break;
        }
    }
    let a = weibull_scale_given_shape(sample, b);
    Err(LifetimeError::NoConvergence { iterations: WEIBULL_MAX_ITER, last_shape: b, last_scale: a })
}

/// Closed-form log-normal MLE: mean and population deviation of log lifetimes.
pub fn fit_lognormal_mle(sample: &LifetimeSample) -> Result<LogNormalParams, LifetimeError> {
    let logs: Vec<f64> = sample.values().iter().map(|z| z.ln()).collect();
    let n = logs.len() as f64;
    let a = logs.iter().sum::<f64>() / n;
    let b = (logs.iter().map(|l| (l - a).powi(2)).sum::<f64>() / n).sqrt();
    if b <= 1e-12 {
        return Err(LifetimeError::Degenerate("log lifetimes have zero spread"));
    }
    Ok(LogNormalParams { a, b })
}

pub fn fit(family: Family, sample: &LifetimeSample) -> Result<LifetimeModel, LifetimeError> {
    match family {
        Family::Weibull => fit_weibull_mle(sample).map(LifetimeModel::Weibull),
        Family::LogNormal => fit_lognormal_mle(sample).map(LifetimeModel::LogNormal),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    InverseCdf,
    Rejection,
    Quadrature,
}

/// A conditional expected RUL with its standard error (zero for quadrature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RulEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: EstimateMethod,
}

pub const DEFAULT_MC_SAMPLES: usize = 200_000;
const MIN_SURVIVAL: f64 = 1e-12;
const MIN_ACCEPTANCE: f64 = 0.01;

/// Monte Carlo estimate of E[Z | Z > t] - t.
///
/// Weibull draws come straight from the conditional inverse CDF
/// Z = a((t/a)^b - ln U)^(1/b). Log-normal draws use rejection while the
/// acceptance rate S(t) is at least 1%, and deterministic quadrature below.
pub fn conditional_expected_rul(
    model: &LifetimeModel,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<RulEstimate, LifetimeError> {
    if !(t >= 0.0) {
        return Err(LifetimeError::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    if n_samples < 2 {
        return Err(LifetimeError::InvalidParams("need at least 2 samples".into()));
    }
    let survival = model.survival(t);
    if survival <= MIN_SURVIVAL {
        return Err(LifetimeError::TailUnderflow { t, survival });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Welford::default();
    let method = match *model {
        LifetimeModel::Weibull(WeibullParams { a, b }) => {
            let base = (t / a).powf(b);
            for _ in 0..n_samples {
                let u: f64 = 1.0 - rng.random::<f64>();
                let z = a * (base - u.ln()).powf(1.0 / b);
                stats.push(z - t);
            }
            EstimateMethod::InverseCdf
        }
        LifetimeModel::LogNormal(_) if survival < MIN_ACCEPTANCE => {
            return Ok(RulEstimate {
                value: model.mean_residual_life(t),
                std_error: 0.0,
                method: EstimateMethod::Quadrature,
            });
        }
        LifetimeModel::LogNormal(_) => {
            while stats.n < n_samples {
                let z = model.sample(&mut rng);
                if z > t {
                    stats.push(z - t);
                }
            }
            EstimateMethod::Rejection
        }
    };
    Ok(RulEstimate { value: stats.mean, std_error: stats.std_error(), method })
}

#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erfc;
    use statrs::function::gamma::gamma_ur;

    fn closed_form_conditional(model: &LifetimeModel, t: f64) -> f64 {
        match *model {
            LifetimeModel::Weibull(WeibullParams { a, b }) => {
                let x = (t / a).powf(b);
                a * gamma(1.0 + 1.0 / b) * gamma_ur(1.0 + 1.0 / b, x) / (-x).exp() - t
            }
            LifetimeModel::LogNormal(LogNormalParams { a, b }) => {
                let q = |w: f64| 0.5 * erfc(w / std::f64::consts::SQRT_2);
                let w = (t.ln() - a) / b;
                (a + 0.5 * b * b).exp() * q(w - b) / q(w) - t
            }
        }
    }

    #[test]
    fn empirical_baseline() {
        let s = LifetimeSample::new(vec![100.0, 200.0]).unwrap();
        assert_eq!(empirical_expected_rul(&s, 50.0), 100.0);
        assert_eq!(empirical_expected_rul(&s, 150.0), 0.0);
        assert_eq!(empirical_expected_rul(&s, 170.0), -20.0);
        assert_eq!(clamp_rul(-20.0, true), 0.0);
    }

    #[test]
    fn sample_validation() {
        assert_eq!(LifetimeSample::new(vec![1.0]), Err(LifetimeError::TooFew(1)));
        assert!(matches!(LifetimeSample::new(vec![1.0, 0.0]), Err(LifetimeError::NonPositive(_))));
    }

    #[test]
    fn lognormal_two_point() {
        let s = LifetimeSample::new(vec![1.0, 2f64.exp()]).unwrap();
        let p = fit_lognormal_mle(&s).unwrap();
        assert!((p.a - 1.0).abs() < 1e-14);
        assert!((p.b - 1.0).abs() < 1e-14);
        let e = std::f64::consts::E;
        assert!(matches!(
            fit_lognormal_mle(&LifetimeSample::new(vec![e, e]).unwrap()),
            Err(LifetimeError::Degenerate(_))
        ));
    }

    #[test]
    fn weibull_all_equal_is_degenerate() {
        let s = LifetimeSample::new(vec![5.0; 4]).unwrap();
        assert!(matches!(fit_weibull_mle(&s), Err(LifetimeError::Degenerate(_))));
    }

    #[test]
    fn exponential_scale_is_sample_mean() {
        let s = LifetimeSample::new(vec![3.0, 7.0, 11.0, 19.0]).unwrap();
        assert!((weibull_scale_given_shape(&s, 1.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn weibull_mle_gradient_vanishes() {
        let s = LifetimeSample::new(vec![128.0, 192.0, 200.0, 147.0, 269.0, 188.0, 259.0, 150.0]).unwrap();
        let p = fit_weibull_mle(&s).unwrap();
        let (ga, gb) = weibull_mean_loglik_gradient(&s, p);
        assert!(ga.hypot(gb) < 1e-8, "gradient ({ga}, {gb})");
        // profile-likelihood maximum: nearby shapes give lower likelihood
        let ll = |b: f64| {
            let a = weibull_scale_given_shape(&s, b);
            let m = LifetimeModel::new(Family::Weibull, a, b).unwrap();
            s.values().iter().map(|&z| m.pdf(z).ln()).sum::<f64>()
        };
        assert!(ll(p.b) > ll(p.b * 1.01) && ll(p.b) > ll(p.b * 0.99));
    }

    #[test]
    fn weibull_mle_recovers_shape() {
        let truth = LifetimeModel::new(Family::Weibull, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..100_000).map(|_| truth.sample(&mut rng)).collect();
        let p = fit_weibull_mle(&LifetimeSample::new(draws).unwrap()).unwrap();
        assert!((0.97..=1.03).contains(&p.b), "shape {}", p.b);
        assert!((p.a - 2.0).abs() < 0.05);
    }

    #[test]
    fn residual_life_quadrature_matches_closed_forms() {
        for (family, a, b) in [
            (Family::Weibull, 2.0, 2.0),
            (Family::Weibull, 225.0, 4.5),
            (Family::Weibull, 10.0, 0.7),
            (Family::LogNormal, 5.3, 0.22),
            (Family::LogNormal, 1.0, 1.0),
            (Family::LogNormal, 0.0, 2.0),
        ] {
            let m = LifetimeModel::new(family, a, b).unwrap();
            for frac in [0.0, 0.1, 0.5, 1.0, 1.5] {
                let t = frac * m.mean();
                if m.survival(t) < 1e-9 {
                    continue;
                }
                let exact = if t == 0.0 { m.mean() } else { closed_form_conditional(&m, t) };
                let quad = m.mean_residual_life(t);
                assert!(
                    (quad - exact).abs() < 1e-7 * exact.abs().max(1.0),
                    "{family:?} a={a} b={b} t={t}: {quad} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn residual_life_derivatives_match_finite_differences() {
        for (family, a, b, t) in [
            (Family::Weibull, 200.0, 4.0, 120.0),
            (Family::Weibull, 3.0, 1.3, 0.0),
            (Family::LogNormal, 5.3, 0.25, 150.0),
            (Family::LogNormal, 5.3, 0.25, 1.0),
        ] {
            let r = residual_life_with_grad(family, a, b, t);
            let h = 1e-6;
            let fa = (residual_life_with_grad(family, a + h, b, t).value
                - residual_life_with_grad(family, a - h, b, t).value)
                / (2.0 * h);
            let fb = (residual_life_with_grad(family, a, b + h, t).value
                - residual_life_with_grad(family, a, b - h, t).value)
                / (2.0 * h);
            assert!((r.d_a - fa).abs() < 1e-5 * fa.abs().max(1.0), "{family:?} d_a {} vs {fa}", r.d_a);
            assert!((r.d_b - fb).abs() < 1e-5 * fb.abs().max(1.0), "{family:?} d_b {} vs {fb}", r.d_b);
        }
    }

    #[test]
    fn memoryless_weibull() {
        let m = LifetimeModel::new(Family::Weibull, 50.0, 1.0).unwrap();
        for t in [0.0, 50.0, 150.0] {
            let est = conditional_expected_rul(&m, t, 20_000, 5).unwrap();
            assert!((est.value - 50.0).abs() < 3.0 * est.std_error, "t={t}: {est:?}");
        }
    }

    #[test]
    fn lognormal_switches_to_quadrature_in_tail() {
        let m = LifetimeModel::new(Family::LogNormal, 0.0, 1.0).unwrap();
        let est = conditional_expected_rul(&m, 12.0, 20_000, 1).unwrap();
        assert_eq!(est.method, EstimateMethod::Quadrature);
        let est = conditional_expected_rul(&m, 1.0, 20_000, 1).unwrap();
        assert_eq!(est.method, EstimateMethod::Rejection);
        assert!(matches!(
            conditional_expected_rul(&m, 1e6, 100, 1),
            Err(LifetimeError::TailUnderflow { .. })
        ));
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let m = LifetimeModel::new(Family::LogNormal, 5.0, 0.3).unwrap();
        let x = conditional_expected_rul(&m, 80.0, 20_000, 42).unwrap();
        let y = conditional_expected_rul(&m, 80.0, 20_000, 42).unwrap();
        assert_eq!(x.value.to_bits(), y.value.to_bits());
    }

    #[test]
    fn cdf_derivative_matches_pdf() {
        for m in [
            LifetimeModel::new(Family::Weibull, 200.0, 3.5).unwrap(),
            LifetimeModel::new(Family::Weibull, 2.0, 0.8).unwrap(),
            LifetimeModel::new(Family::LogNormal, 5.2, 0.3).unwrap(),
        ] {
            let mean = m.mean();
            for k in 1..40 {
                let z = mean * k as f64 / 20.0;
                let h = 1e-5 * mean;
                let d = (m.cdf(z + h) - m.cdf(z - h)) / (2.0 * h);
                assert!((d - m.pdf(z)).abs() < 1e-6, "{m} z={z}");
            }
        }
    }

    #[test]
    fn conditional_expectation_monotone() {
        for m in [
            LifetimeModel::new(Family::Weibull, 200.0, 3.5).unwrap(),
            LifetimeModel::new(Family::LogNormal, 5.2, 0.3).unwrap(),
        ] {
            let mut prev = f64::MIN;
            for k in 0..60 {
                let t = 5.0 * k as f64;
                let rul = m.mean_residual_life(t);
                assert!(rul >= 0.0);
                let total = rul + t;
                assert!(total >= prev - 1e-9, "{m} t={t}");
                prev = total;
            }
        }
    }

    #[test]
    fn display_round_trip() {
        let m = LifetimeModel::new(Family::Weibull, 225.3, 4.41).unwrap();
        let text = m.to_string();
        assert_eq!(text, "family=weibull a=225.3 b=4.41");
        assert_eq!(text.parse::<LifetimeModel>().unwrap(), m);
        assert!("family=gamma a=1 b=1".parse::<LifetimeModel>().is_err());
    }
}
