//! Small numerical kernels shared across modules: Gauss-Legendre rules and
//! log-space normal tail functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use statrs::function::erf::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The 512-point rule mapped onto [0, 1], computed once.
pub fn gauss_legendre_unit_512() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(512);
        (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
    })
}

pub fn ln_normal_pdf(w: f64) -> f64 {
    -0.5 * w * w - LN_SQRT_2PI
}

/// log P(N(0,1) > w), accurate far into the upper tail.
pub fn ln_normal_sf(w: f64) -> f64 {
    if w == f64::NEG_INFINITY {
        return 0.0;
    }
    if w < 5.0 {
        (0.5 * erfc(w * FRAC_1_SQRT_2)).ln()
    } else {
        ln_normal_pdf(w) + mills_ratio(w).ln()
    }
}

/// Inverse Mills ratio φ(w)/Q(w), the hazard of the standard normal.
pub fn normal_hazard(w: f64) -> f64 {
    if w == f64::NEG_INFINITY {
        return 0.0;
    }
    if w < 5.0 {
        (ln_normal_pdf(w) - ln_normal_sf(w)).exp()
    } else {
        1.0 / mills_ratio(w)
    }
}

/// Q(w)/φ(w) by continued fraction, for w >= 5.
fn mills_ratio(w: f64) -> f64 {
    // R(w) = 1/(w + 1/(w + 2/(w + 3/(w + ...)))) evaluated bottom-up.
    let mut tail = w;
    for k in (1..=60).rev() {
        tail = w + k as f64 / tail;
    }
    1.0 / tail
}

/// Standard normal CDF.
pub fn normal_cdf(w: f64) -> f64 {
    0.5 * erfc(-w * FRAC_1_SQRT_2)
}
