//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]`, bisecting until the local Kronrod-Gauss
/// discrepancy is below `rel_tol · |I|` (or `abs_floor`).
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, _) = gk15(f, a, b);
    let tol = (rel_tol * whole.abs()).max(abs_floor);
    recurse(f, a, b, tol, 0)
}

fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth >= 48 || (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return value;
    }
    let m = 0.5 * (a + b);
    recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
}

/// Sums [`integrate`] over consecutive breakpoints.
pub(crate) fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], rel_tol: f64, abs_floor: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], rel_tol, abs_floor))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let v = integrate(&|x: f64| x * x, 0.0, 3.0, 1e-14, 0.0);
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(&|x: f64| (-x).exp(), 0.0, 40.0, 1e-14, 0.0);
        assert!((v - (1.0 - (-40.0f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_is_refined() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = integrate(&|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-12, 0.0);
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }
}
