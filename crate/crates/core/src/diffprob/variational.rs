//! Mean-field Gaussian guides, ELBO estimation and its stochastic gradients.
//!
//! Each parameter θ_j has guide N(μ_j, exp(ρ_j)²) and a Gaussian or Laplace
//! prior. For Gaussian priors the KL term is taken in closed form; for Laplace
//! priors the cross-entropy is sampled and the guide entropy is exact.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::adam::{clip_global_norm, AdamState, DEFAULT_LEARNING_RATE};
use super::tape::{Tape, Var};
use super::DiffProbError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const LOG_DENSITY_FLOOR: f64 = -1e10;
pub const DEFAULT_CLIP_NORM: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Gaussian { mean: f64, sd: f64 },
    Laplace { loc: f64, scale: f64 },
}

impl Prior {
    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
            }
            Prior::Laplace { loc, scale } => -(x - loc).abs() / scale - (2.0 * scale).ln(),
        }
    }

    pub fn d_ln_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Gaussian { mean, sd } => -(x - mean) / (sd * sd),
            Prior::Laplace { loc, scale } => -(x - loc).signum() / scale,
        }
    }
}

/// KL(N(μ_q, σ_q²) ‖ N(μ_p, σ_p²)).
pub fn kl_gaussian(mu_q: f64, sd_q: f64, mu_p: f64, sd_p: f64) -> f64 {
    let r = sd_q / sd_p;
    let d = (mu_q - mu_p) / sd_p;
    (0.5 * (r * r + d * d - 1.0) - r.ln()).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParameter {
    pub name: String,
    pub mu: f64,
    /// Log of the guide standard deviation.
    pub rho: f64,
    pub prior: Prior,
    pub trainable: bool,
}

impl VariationalParameter {
    pub fn new(name: impl Into<String>, mu: f64, sd: f64, prior: Prior) -> Self {
        Self { name: name.into(), mu, rho: sd.ln(), prior, trainable: true }
    }

    pub fn scale(&self) -> f64 {
        self.rho.exp()
    }

    pub fn ln_q(&self, x: f64) -> f64 {
        let s = self.scale();
        let z = (x - self.mu) / s;
        -0.5 * z * z - self.rho - 0.5 * LN_2PI
    }

    /// Closed-form part of −KL(Q‖P) for this parameter and its (μ, ρ) gradient.
    /// For Laplace priors only the guide entropy is closed-form.
    fn analytic_term(&self) -> (f64, f64, f64) {
        match self.prior {
            Prior::Gaussian { mean, sd } => {
                let s = self.scale();
                let kl = kl_gaussian(self.mu, s, mean, sd);
                (-kl, -(self.mu - mean) / (sd * sd), 1.0 - s * s / (sd * sd))
            }
            Prior::Laplace { .. } => (0.5 * (LN_2PI + 1.0) + self.rho, 0.0, 1.0),
        }
    }

    fn sampled_prior(&self) -> bool {
        matches!(self.prior, Prior::Laplace { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Guide {
    pub params: Vec<VariationalParameter>,
}

impl Guide {
    pub fn new(params: Vec<VariationalParameter>) -> Self {
        Self { params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn means(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.mu).collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.scale()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Draws θ = μ + σ ε; returns (θ, ε).
    pub fn sample(&self, rng: &mut impl rand::Rng) -> (Vec<f64>, Vec<f64>) {
        let eps: Vec<f64> = self.params.iter().map(|_| StandardNormal.sample(rng)).collect();
        let theta = self.params.iter().zip(&eps).map(|(p, e)| p.mu + p.scale() * e).collect();
        (theta, eps)
    }

    /// Flat optimizer vector [μ_1..μ_n, ρ_1..ρ_n].
    pub fn flat(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.mu).chain(self.params.iter().map(|p| p.rho)).collect()
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let n = self.params.len();
        for (i, p) in self.params.iter_mut().enumerate() {
            p.mu = v[i];
            p.rho = v[n + i];
        }
    }
}

/// A likelihood over the parameters of a guide. The prior lives in the guide.
pub trait Model: Sync {
    fn log_likelihood<'t>(&self, tape: &'t Tape, theta: &[Var<'t>]) -> Var<'t>;

    fn log_likelihood_value(&self, theta: &[f64]) -> f64 {
        let tape = Tape::new();
        let vars = tape.vars(theta);
        self.log_likelihood(&tape, &vars).value()
    }

    /// Value and gradient of the log-likelihood at θ.
    fn log_likelihood_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let tape = Tape::new();
        let vars = tape.vars(theta);
        let out = self.log_likelihood(&tape, &vars);
        let g = tape.backward(out);
        (out.value(), g.wrt_all(&vars))
    }

    /// Called once before each optimizer step, e.g. to draw a minibatch.
    fn begin_step(&mut self, _rng: &mut ChaCha8Rng) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElboGradient {
    pub elbo: ElboEstimate,
    pub d_mu: Vec<f64>,
    pub d_rho: Vec<f64>,
    pub se_mu: Vec<f64>,
    pub se_rho: Vec<f64>,
}

impl ElboGradient {
    pub fn flat(&self) -> Vec<f64> {
        self.d_mu.iter().chain(&self.d_rho).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Reparam,
    Score,
}

impl std::str::FromStr for Estimator {
    type Err = DiffProbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reparam" => Ok(Self::Reparam),
            "score" => Ok(Self::Score),
            other => Err(DiffProbError::Argument(format!("unknown gradient estimator {other:?}"))),
        }
    }
}

fn sample_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn non_finite(guide: &Guide, sample: usize, theta: &[f64], eps: &[f64], value: f64) -> DiffProbError {
    let j = theta
        .iter()
        .position(|t| !t.is_finite())
        .or_else(|| (0..eps.len()).max_by(|&a, &b| eps[a].abs().total_cmp(&eps[b].abs())))
        .unwrap_or(0);
    DiffProbError::NonFinite {
        sample,
        parameter: guide.params.get(j).map_or_else(|| "<none>".into(), |p| p.name.clone()),
        value,
    }
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_n_mc(n_mc: usize) -> Result<(), DiffProbError> {
    if n_mc == 0 {
        return Err(DiffProbError::Argument("n_mc must be at least 1".into()));
    }
    Ok(())
}

/// Per-sample ELBO contributions: clipped log-likelihood plus sampled Laplace
/// cross-entropies plus the closed-form terms.
fn elbo_sample(guide: &Guide, theta: &[f64], ll: f64, analytic: f64) -> f64 {
    let sampled: f64 = guide
        .params
        .iter()
        .zip(theta)
        .filter(|(p, _)| p.sampled_prior())
        .map(|(p, &t)| p.prior.ln_density(t))
        .sum();
    ll.max(LOG_DENSITY_FLOOR) + sampled + analytic
}

pub fn elbo_estimate<M: Model + ?Sized>(
    model: &M,
    guide: &Guide,
    n_mc: usize,
    seed: u64,
) -> Result<ElboEstimate, DiffProbError> {
    check_n_mc(n_mc)?;
    let analytic: f64 = guide.params.iter().map(|p| p.analytic_term().0).sum();
    let values: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            let (theta, eps) = guide.sample(&mut sample_rng(seed, k));
            let ll = model.log_likelihood_value(&theta);
            if ll.is_nan() || ll == f64::INFINITY {
                return Err(non_finite(guide, k, &theta, &eps, ll));
            }
            Ok(elbo_sample(guide, &theta, ll, analytic))
        })
        .collect::<Result<_, _>>()?;
    let (value, std_error) = mean_and_se(values.iter().copied());
    Ok(ElboEstimate { value, std_error })
}

struct SampleGrad {
    elbo: f64,
    d_mu: Vec<f64>,
    d_rho: Vec<f64>,
}

fn reduce(samples: Vec<SampleGrad>) -> ElboGradient {
    let n = samples[0].d_mu.len();
    let col = |f: &dyn Fn(&SampleGrad) -> f64| mean_and_se(samples.iter().map(f).collect::<Vec<_>>().into_iter());
    let elbo = col(&|s| s.elbo);
    let (mut d_mu, mut se_mu, mut d_rho, mut se_rho) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        (d_mu[j], se_mu[j]) = col(&|s| s.d_mu[j]);
        (d_rho[j], se_rho[j]) = col(&|s| s.d_rho[j]);
    }
    ElboGradient { elbo: ElboEstimate { value: elbo.0, std_error: elbo.1 }, d_mu, d_rho, se_mu, se_rho }
}

/// Pathwise gradient through θ = μ + exp(ρ) ε.
pub fn grad_elbo_reparam<M: Model + ?Sized>(
    model: &M,
    guide: &Guide,
    n_mc: usize,
    seed: u64,
) -> Result<ElboGradient, DiffProbError> {
    check_n_mc(n_mc)?;
    let terms: Vec<(f64, f64, f64)> = guide.params.iter().map(|p| p.analytic_term()).collect();
    let analytic: f64 = terms.iter().map(|t| t.0).sum();
    let samples: Vec<SampleGrad> = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            let (theta, eps) = guide.sample(&mut sample_rng(seed, k));
            let (ll, g) = model.log_likelihood_grad(&theta);
            if ll.is_nan() || ll == f64::INFINITY || g.iter().any(|v| !v.is_finite()) {
                return Err(non_finite(guide, k, &theta, &eps, ll));
            }
            let clipped = ll < LOG_DENSITY_FLOOR;
            let mut d_mu = Vec::with_capacity(theta.len());
            let mut d_rho = Vec::with_capacity(theta.len());
            for (j, p) in guide.params.iter().enumerate() {
                let mut g_theta = if clipped { 0.0 } else { g[j] };
                if p.sampled_prior() {
                    g_theta += p.prior.d_ln_density(theta[j]);
                }
                d_mu.push(g_theta + terms[j].1);
                d_rho.push(g_theta * p.scale() * eps[j] + terms[j].2);
            }
            Ok(SampleGrad { elbo: elbo_sample(guide, &theta, ll, analytic), d_mu, d_rho })
        })
        .collect::<Result<_, _>>()?;
    Ok(reduce(samples))
}

/// Score-function estimator E_Q[∇ log q(θ) (log P(X, θ) − log q(θ))].
pub fn grad_elbo_score<M: Model + ?Sized>(
    model: &M,
    guide: &Guide,
    n_mc: usize,
    seed: u64,
) -> Result<ElboGradient, DiffProbError> {
    check_n_mc(n_mc)?;
    let analytic: f64 = guide.params.iter().map(|p| p.analytic_term().0).sum();
    let samples: Vec<SampleGrad> = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            let (theta, eps) = guide.sample(&mut sample_rng(seed, k));
            let ll = model.log_likelihood_value(&theta);
            if ll.is_nan() || ll == f64::INFINITY {
                return Err(non_finite(guide, k, &theta, &eps, ll));
            }
            let log_joint_minus_q: f64 = ll.max(LOG_DENSITY_FLOOR)
                + guide
                    .params
                    .iter()
                    .zip(&theta)
                    .map(|(p, &t)| p.prior.ln_density(t).max(LOG_DENSITY_FLOOR) - p.ln_q(t))
                    .sum::<f64>();
            let d_mu = guide.params.iter().zip(&eps).map(|(p, e)| e / p.scale() * log_joint_minus_q).collect();
            let d_rho = eps.iter().map(|e| (e * e - 1.0) * log_joint_minus_q).collect();
            Ok(SampleGrad { elbo: elbo_sample(guide, &theta, ll, analytic), d_mu, d_rho })
        })
        .collect::<Result<_, _>>()?;
    Ok(reduce(samples))
}

pub fn grad_elbo<M: Model + ?Sized>(
    estimator: Estimator,
    model: &M,
    guide: &Guide,
    n_mc: usize,
    seed: u64,
) -> Result<ElboGradient, DiffProbError> {
    match estimator {
        Estimator::Reparam => grad_elbo_reparam(model, guide, n_mc, seed),
        Estimator::Score => grad_elbo_score(model, guide, n_mc, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub steps: usize,
    pub n_mc: usize,
    pub learning_rate: f64,
    pub estimator: Estimator,
    pub seed: u64,
    pub clip_norm: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            steps: 1000,
            n_mc: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            estimator: Estimator::Reparam,
            seed: 0,
            clip_norm: DEFAULT_CLIP_NORM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub elbo: f64,
    pub grad_norm: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("step,elbo_estimate,grad_norm\n");
    for r in rows {
        let _ = writeln!(out, "{},{:?},{:?}", r.step, r.elbo, r.grad_norm);
    }
    out
}

/// SplitMix64 finalizer, used to derive independent per-step seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maximizes the ELBO with Adam; parameters marked non-trainable stay fixed.
/// `on_step` sees the guide after every update. On failure the guide holds
/// the last finite state.
pub fn fit_guide<M: Model>(
    model: &mut M,
    guide: &mut Guide,
    options: &FitOptions,
    mut on_step: impl FnMut(usize, &Guide),
) -> Result<Vec<TraceRow>, DiffProbError> {
    let n = guide.len();
    let mut adam = AdamState::new(2 * n, options.learning_rate);
    let frozen: Vec<usize> = (0..n).filter(|&j| !guide.params[j].trainable).flat_map(|j| [j, n + j]).collect();
    let mut batch_rng = ChaCha8Rng::seed_from_u64(mix_seed(options.seed, u64::MAX));
    let mut trace = Vec::with_capacity(options.steps);
    for step in 0..options.steps {
        model.begin_step(&mut batch_rng);
        let g = grad_elbo(options.estimator, model, guide, options.n_mc, mix_seed(options.seed, step as u64))
            .map_err(|e| DiffProbError::AtStep { step, source: Box::new(e) })?;
        if !g.elbo.value.is_finite() {
            return Err(DiffProbError::AtStep {
                step,
                source: Box::new(DiffProbError::Argument(format!("ELBO estimate is {}", g.elbo.value))),
            });
        }
        let mut loss_grad: Vec<f64> = g.flat().iter().map(|v| -v).collect();
        for &i in &frozen {
            loss_grad[i] = 0.0;
        }
        let grad_norm = clip_global_norm(&mut loss_grad, options.clip_norm);
        let mut flat = guide.flat();
        let before: Vec<f64> = frozen.iter().map(|&i| flat[i]).collect();
        adam.step(&mut flat, &loss_grad)?;
        for (&i, v) in frozen.iter().zip(before) {
            flat[i] = v;
        }
        guide.set_flat(&flat);
        trace.push(TraceRow { step, elbo: g.elbo.value, grad_norm });
        on_step(step, guide);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x ~ N(θ, 1) with a single observation.
    struct Toy {
        x: f64,
    }

    impl Model for Toy {
        fn log_likelihood<'t>(&self, _tape: &'t Tape, theta: &[Var<'t>]) -> Var<'t> {
            -0.5 * (theta[0] - self.x).square() - 0.5 * LN_2PI
        }
    }

    struct Flat;

    impl Model for Flat {
        fn log_likelihood<'t>(&self, tape: &'t Tape, _theta: &[Var<'t>]) -> Var<'t> {
            tape.constant(0.0)
        }
    }

    fn std_prior_guide(mu: f64, sd: f64) -> Guide {
        Guide::new(vec![VariationalParameter::new("theta", mu, sd, Prior::Gaussian { mean: 0.0, sd: 1.0 })])
    }

    #[test]
    fn kl_known_values() {
        assert_eq!(kl_gaussian(0.3, 1.7, 0.3, 1.7), 0.0);
        assert!((kl_gaussian(0.0, 1.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn elbo_zero_when_guide_equals_prior_and_likelihood_flat() {
        let e = elbo_estimate(&Flat, &std_prior_guide(0.0, 1.0), 100, 1).unwrap();
        assert!(e.value.abs() < 1e-12);
        let laplace = Guide::new(vec![VariationalParameter::new(
            "b",
            0.0,
            1.0,
            Prior::Laplace { loc: 0.0, scale: 1.0 },
        )]);
        // KL(N(0,1) ‖ Laplace(0,1)) is positive and small
        let e = elbo_estimate(&Flat, &laplace, 20_000, 2).unwrap();
        assert!(e.value < 0.0 && e.value > -0.2, "{e:?}");
    }

    #[test]
    fn flat_likelihood_gradient_vanishes_at_prior() {
        let g = grad_elbo_reparam(&Flat, &std_prior_guide(0.0, 1.0), 1000, 3).unwrap();
        assert!(g.d_mu[0].abs() < 1e-12 && g.d_rho[0].abs() < 1e-12);
    }

    #[test]
    fn optimal_elbo_equals_log_evidence() {
        // posterior N(1, 1/2); evidence N(2; 0, 2)
        let log_evidence = -0.5 * 4.0 / 2.0 - 0.5 * (2.0 * std::f64::consts::PI * 2.0).ln();
        let e = elbo_estimate(&Toy { x: 2.0 }, &std_prior_guide(1.0, 0.5f64.sqrt()), 20_000, 4).unwrap();
        assert!((e.value - log_evidence).abs() < 3.0 * e.std_error, "{e:?} vs {log_evidence}");
    }

    #[test]
    fn deterministic_per_seed() {
        let guide = std_prior_guide(0.2, 0.8);
        let a = grad_elbo_score(&Toy { x: 2.0 }, &guide, 50, 9).unwrap();
        let b = grad_elbo_score(&Toy { x: 2.0 }, &guide, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = grad_elbo_score(&Toy { x: 2.0 }, &guide, 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(elbo_estimate(&Flat, &std_prior_guide(0.0, 1.0), 0, 0).is_err());
    }

    struct Broken;

    impl Model for Broken {
        fn log_likelihood<'t>(&self, tape: &'t Tape, _theta: &[Var<'t>]) -> Var<'t> {
            tape.constant(f64::NAN)
        }
    }

    #[test]
    fn non_finite_likelihood_names_parameter() {
        match elbo_estimate(&Broken, &std_prior_guide(0.0, 1.0), 3, 0) {
            Err(DiffProbError::NonFinite { parameter, .. }) => assert_eq!(parameter, "theta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let mut guide = Guide::new(vec![
            VariationalParameter::new("a", 0.0, 1.0, Prior::Gaussian { mean: 0.0, sd: 1.0 }),
            VariationalParameter::new("b", 0.0, 1.0, Prior::Gaussian { mean: 0.0, sd: 1.0 }),
        ]);
        guide.params[1].trainable = false;
        struct Two;
        impl Model for Two {
            fn log_likelihood<'t>(&self, _t: &'t Tape, th: &[Var<'t>]) -> Var<'t> {
                -(th[0] - 3.0).square() - (th[1] - 3.0).square()
            }
        }
        fit_guide(&mut Two, &mut guide, &FitOptions { steps: 50, ..Default::default() }, |_, _| {}).unwrap();
        assert!(guide.params[0].mu > 0.1);
        assert_eq!(guide.params[1].mu, 0.0);
        assert_eq!(guide.params[1].rho, 0.0);
    }
}
