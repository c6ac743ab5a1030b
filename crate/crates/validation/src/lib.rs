//! Reference implementations used to check the library from the outside.
//!
//! Everything here is written for clarity rather than speed and shares no
//! numerical code with `rulcast`: quadrature instead of Monte Carlo, naive
//! DFTs instead of FFTs, QR least squares instead of normal equations.

use nalgebra::{DMatrix, DVector};
use rulcast::features::{Aggregate, Aggregates, N_AGGREGATES};
use rulcast::lifetimes::Family;
use statrs::distribution::{ContinuousCDF, LogNormal, Weibull};
use statrs::function::gamma::ln_gamma;

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Survival function of the lifetime family, with Weibull (scale a, shape b)
/// and log-normal (μ = a, σ = b).
pub fn survival(family: Family, a: f64, b: f64, z: f64) -> f64 {
    match family {
        Family::Weibull => Weibull::new(b, a).expect("valid weibull").sf(z),
        Family::LogNormal => LogNormal::new(a, b).expect("valid log-normal").sf(z),
    }
}

/// Quantile of the lifetime distribution.
pub fn quantile(family: Family, a: f64, b: f64, p: f64) -> f64 {
    match family {
        Family::Weibull => Weibull::new(b, a).expect("valid weibull").inverse_cdf(p),
        Family::LogNormal => LogNormal::new(a, b).expect("valid log-normal").inverse_cdf(p),
    }
}

/// E[Z - t | Z > t] as the integral of the survival function beyond t,
/// divided by S(t).
pub fn conditional_rul(family: Family, a: f64, b: f64, t: f64) -> f64 {
    let s_t = survival(family, a, b, t);
    // far enough out that the remaining tail is below 1e-15 of the integral
    let upper = match family {
        Family::Weibull => a * 60f64.powf(1.0 / b),
        Family::LogNormal => (a + 12.0 * b).exp(),
    }
    .max(2.0 * t + 1.0);
    let pieces = 256;
    let width = (upper - t) / pieces as f64;
    let scale = s_t * (upper - t);
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = t + k as f64 * width;
        total += adaptive_simpson(|z| survival(family, a, b, z), lo, lo + width, 1e-14 * scale / pieces as f64);
    }
    total / s_t
}

/// The 15 aggregates of `series`, computed one definition at a time.
pub fn brute_force_aggregates(series: &[f64], lags: usize) -> Aggregates {
    assert!(!series.is_empty());
    let n = series.len();
    let nf = n as f64;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[n - 1]);
    let mut sum = 0.0;
    let mut energy = 0.0;
    for &x in series {
        sum += x;
        energy += x * x;
    }
    let mean = sum / nf;
    let m2 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    let std = m2.sqrt();
    let (skew, kurt) = if std > 1e-9 * mean.abs().max(1.0) {
        let z: Vec<f64> = series.iter().map(|x| (x - mean) / std).collect();
        (z.iter().map(|v| v * v * v).sum::<f64>() / nf, z.iter().map(|v| v * v * v * v).sum::<f64>() / nf)
    } else {
        (0.0, 0.0)
    };

    let mut peaks = Vec::new();
    let mut troughs = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (l, c, r) = (series[i - 1], series[i], series[i + 1]);
        if c > l && c > r {
            peaks.push(c);
        }
        if c < l && c < r {
            troughs.push(c);
        }
    }
    let avg = |v: &[f64], fallback: f64| if v.is_empty() { fallback } else { v.iter().sum::<f64>() / v.len() as f64 };
    let peak_to_peak = avg(&peaks, max) + avg(&troughs, min);

    let entropy = if max - min > 1e-9 * max.abs().max(min.abs()).max(1.0) {
        let mut counts = [0usize; 10];
        for &x in series {
            let mut bin = ((x - min) / (max - min) * 10.0).floor() as usize;
            if bin > 9 {
                bin = 9;
            }
            counts[bin] += 1;
        }
        counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / nf).map(|p| -p * p.ln()).sum()
    } else {
        0.0
    };

    let psd = if n < 2 {
        0.0
    } else {
        let mut mags = 0.0;
        for k in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in series.iter().enumerate() {
                let angle = 2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / nf;
                re += x * angle.cos();
                im -= x * angle.sin();
            }
            mags += (re * re + im * im).sqrt();
        }
        let mean_mag = mags / nf;
        if mean_mag > 0.0 {
            20.0 * (mean_mag / 1e-5).log10()
        } else {
            0.0
        }
    };

    let line_integral: f64 = (1..n).map(|i| (series[i] - series[i - 1]).abs()).sum();
    let ar = ar_residual_qr(series, lags);

    let mut out = [0.0; N_AGGREGATES];
    for agg in Aggregate::ALL {
        out[agg.index()] = match agg {
            Aggregate::Max => max,
            Aggregate::Min => min,
            Aggregate::Mean => mean,
            Aggregate::Range => max - min,
            Aggregate::Sum => sum,
            Aggregate::Energy => energy,
            Aggregate::Std => std,
            Aggregate::Skewness => skew,
            Aggregate::Kurtosis => kurt,
            Aggregate::PeakToPeak => peak_to_peak,
            Aggregate::Rms => (energy / nf).sqrt(),
            Aggregate::Entropy => entropy,
            Aggregate::PsdMean => psd,
            Aggregate::LineIntegral => line_integral,
            Aggregate::ArResidual => ar,
        };
    }
    out
}

/// Last-point residual of an AR(p) model with intercept, fitted by QR.
/// Zero while there are fewer equations than unknowns or the series is flat.
pub fn ar_residual_qr(series: &[f64], p: usize) -> f64 {
    let n = series.len();
    if n < 2 * p + 1 || series.iter().all(|&x| x == series[0]) {
        return 0.0;
    }
    let rows = n - p;
    let x = DMatrix::from_fn(rows, p + 1, |r, c| if c == 0 { 1.0 } else { series[p + r - c] });
    let y = DVector::from_iterator(rows, series[p..].iter().copied());
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &y;
    let coef = match qr.r().solve_upper_triangular(&qty) {
        Some(c) => c,
        None => return 0.0,
    };
    let fitted = (x.row(rows - 1) * coef)[0];
    series[n - 1] - fitted
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestOracle {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn student_pdf(x: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Paired t-test from the textbook formulas, with the two-sided p-value
/// obtained by integrating the t density over both tails.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> TTestOracle {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    // x = |t| + u / (1 - u) maps [0, 1) onto the upper tail
    let tail = adaptive_simpson(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = t.abs() + u / (1.0 - u);
            student_pdf(x, df) / ((1.0 - u) * (1.0 - u))
        },
        0.0,
        1.0,
        1e-14,
    );
    TTestOracle { t, df, p: (2.0 * tail).min(1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_known_functions() {
        assert!((adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12) - 2.0).abs() < 1e-10);
        assert!((adaptive_simpson(|x| (-x).exp(), 0.0, 40.0, 1e-13) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_residual_life_is_the_scale() {
        for t in [0.0, 3.0, 20.0] {
            assert!((conditional_rul(Family::Weibull, 7.0, 1.0, t) - 7.0).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn lognormal_unconditional_mean() {
        let (mu, sigma): (f64, f64) = (4.0, 0.4);
        let exact = (mu + 0.5 * sigma * sigma).exp();
        assert!((conditional_rul(Family::LogNormal, mu, sigma, 0.0) - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn t_tail_matches_cauchy() {
        // df = 2 has a closed form: P(|T| > t) = 1 - t / sqrt(2 + t²)
        let r = paired_t_test(&[1.0, 2.0, 4.5], &[0.0, 0.0, 0.0]);
        let exact = 1.0 - r.t / (2.0 + r.t * r.t).sqrt();
        assert!((r.p - exact).abs() < 1e-11, "{} vs {exact}", r.p);
    }

    #[test]
    fn ar_residual_of_exact_recursion_is_zero() {
        let mut s = vec![1.0, 0.5];
        for i in 2..40 {
            s.push(0.3 + 0.6 * s[i - 1] - 0.2 * s[i - 2]);
        }
        assert!(ar_residual_qr(&s, 2).abs() < 1e-10);
    }
}
