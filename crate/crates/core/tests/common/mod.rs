//! Independent reference computations for the integration tests.
//!
//! Everything here is deliberately separate from the library: double
//! exponential (tanh-sinh) quadrature, which copes with integrable endpoint
//! singularities, plus small helpers built on it.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// `∫_a^b f` by tanh-sinh quadrature. The integrand receives
/// `(x, x − a, b − x)` with the endpoint distances computed without
/// cancellation, so singular factors like `(b − x)^{α−1}` stay accurate.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    assert!(b > a);
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        // x − a = half·(1 + tanh u), b − x = half·(1 − tanh u)
        let da = (b - a) / (1.0 + (-2.0 * u).exp());
        let db = (b - a) / (1.0 + (2.0 * u).exp());
        if da <= 0.0 || db <= 0.0 || w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let x = if da < db { a + da } else { b - db };
        let v = f(x, da, db);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..14 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let cur = sum * h;
        if (cur - prev).abs() <= tol * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `∫_{z0}^{z1} y^{−α}(1−y)^{α−1} dy`.
pub fn beta_mass(alpha: f64, z0: f64, z1: f64) -> f64 {
    tanh_sinh(
        |y, d0, d1| {
            // exact distances to 0 and 1 where they coincide with the endpoints
            let y0 = if z0 == 0.0 { d0 } else { y };
            let y1 = if z1 == 1.0 { d1 } else { 1.0 - y };
            y0.powf(-alpha) * y1.powf(alpha - 1.0)
        },
        z0,
        z1,
        1e-14,
    )
}

/// `b` with `∫_0^b = ∫_b^1` by bisection on quadrature masses.
pub fn beta_median(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if beta_mass(alpha, 0.0, mid) < beta_mass(alpha, mid, 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `∫_lo^hi f(z) (t − z)^{α−1} dz` for a smooth `f` on `[lo, hi]`, `hi ≤ t`.
pub fn abel_piece(f: impl Fn(f64) -> f64, lo: f64, hi: f64, t: f64, alpha: f64) -> f64 {
    tanh_sinh(
        |z, _, dhi| {
            let dist = if hi == t { dhi } else { t - z };
            f(z) * dist.powf(alpha - 1.0)
        },
        lo,
        hi,
        1e-13,
    )
}

/// `e^{x²} erfc(x)`, equal to `E_{1/2}(−x)`: Maclaurin series of `erf`
/// below 2, the Laplace continued fraction above.
pub fn erfcx(x: f64) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    if x < 2.0 {
        let mut term = x;
        let mut sum = x;
        for n in 1..80 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        (x * x).exp() * (1.0 - 2.0 / sqrt_pi * sum)
    } else {
        let mut f = x;
        for k in (1..400).rev() {
            f = x + 0.5 * k as f64 / f;
        }
        1.0 / (sqrt_pi * f)
    }
}

/// Plain Mittag-Leffler power series; reliable for
/// `|z| ≤ 1`.
pub fn ml_series(alpha: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    for n in 0..200 {
        let term = z.powi(n) / statrs::function::gamma::gamma(alpha * n as f64 + 1.0);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..300 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
