use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rulcast::diffprob::{
    elbo_estimate, fit_guide, grad_elbo_reparam, grad_elbo_score, kl_gaussian, FitOptions, Guide, Model, Prior,
    Tape, Var, VariationalParameter,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One observation x ~ N(θ, 1), θ ~ N(0, 1).
struct Conjugate {
    x: f64,
}

impl Model for Conjugate {
    fn log_likelihood<'t>(&self, _tape: &'t Tape, theta: &[Var<'t>]) -> Var<'t> {
        -0.5 * (theta[0] - self.x).square() - 0.5 * LN_2PI
    }
}

fn log_evidence() -> f64 {
    // N(2; 0, 2)
    -0.5 * 4.0 / 2.0 - 0.5 * (LN_2PI + 2f64.ln())
}

fn guide(mu: f64, sd: f64) -> Guide {
    Guide::new(vec![VariationalParameter::new("theta", mu, sd, Prior::Gaussian { mean: 0.0, sd: 1.0 })])
}

#[test]
fn reparam_training_recovers_analytic_posterior() {
    let mut g = guide(-1.0, 2.0);
    let opts = FitOptions { steps: 5000, n_mc: 256, seed: 11, ..Default::default() };
    let mut worst_gap = f64::NEG_INFINITY;
    fit_guide(&mut Conjugate { x: 2.0 }, &mut g, &opts, |step, gd| {
        if step % 250 == 0 {
            let e = elbo_estimate(&Conjugate { x: 2.0 }, gd, 4000, step as u64).unwrap();
            worst_gap = worst_gap.max(e.value - log_evidence() - 3.0 * e.std_error);
        }
    })
    .unwrap();
    let p = &g.params[0];
    assert!((p.mu - 1.0).abs() < 1e-2, "mu {}", p.mu);
    assert!((p.scale().powi(2) - 0.5).abs() < 1e-2, "var {}", p.scale().powi(2));
    assert!(worst_gap <= 0.0, "ELBO exceeded the evidence bound by {worst_gap}");
}

#[test]
fn score_gradient_vanishes_at_optimum() {
    let g = grad_elbo_score(&Conjugate { x: 2.0 }, &guide(1.0, 0.5f64.sqrt()), 100_000, 5).unwrap();
    assert!(g.d_mu[0].abs() < 3.0 * g.se_mu[0], "{} ± {}", g.d_mu[0], g.se_mu[0]);
    assert!(g.d_rho[0].abs() < 3.0 * g.se_rho[0], "{} ± {}", g.d_rho[0], g.se_rho[0]);
}

#[test]
fn estimators_agree_in_expectation() {
    let gd = guide(0.3, 0.9);
    let model = Conjugate { x: 2.0 };
    let s = grad_elbo_score(&model, &gd, 100_000, 6).unwrap();
    let r = grad_elbo_reparam(&model, &gd, 100_000, 7).unwrap();
    // analytic gradient of the ELBO for this family
    let (mu, sd) = (0.3f64, 0.9f64);
    let d_mu = (2.0 - mu) - mu;
    let d_rho = -2.0 * sd * sd + 1.0;
    for (est, se, exact) in [(s.d_mu[0], s.se_mu[0], d_mu), (s.d_rho[0], s.se_rho[0], d_rho)] {
        assert!((est - exact).abs() < 3.0 * se, "score {est} ± {se} vs {exact}");
    }
    for (est, se, exact) in [(r.d_mu[0], r.se_mu[0], d_mu), (r.d_rho[0], r.se_rho[0], d_rho)] {
        assert!((est - exact).abs() < 3.0 * se.max(1e-12), "reparam {est} ± {se} vs {exact}");
    }
    let se = (s.se_mu[0].powi(2) + r.se_mu[0].powi(2)).sqrt();
    assert!((s.d_mu[0] - r.d_mu[0]).abs() < 3.0 * se);
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let (mq, sq, mp, sp) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.3..2.0),
        );
        let q = Normal::new(mq, sq).unwrap();
        let ln = |x: f64, m: f64, s: f64| -0.5 * ((x - m) / s).powi(2) - f64::ln(s) - 0.5 * LN_2PI;
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| {
            let x = q.sample(&mut rng);
            ln(x, mq, sq) - ln(x, mp, sp)
        }).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
        let exact = kl_gaussian(mq, sq, mp, sp);
        assert!(exact >= 0.0);
        assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");
    }
}
