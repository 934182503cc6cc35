//! The scalar fractional relaxation problem
//!
//! ```text
//! ∂_t^α E = −A E^k,   E(0) = 1,   A > 0, k ≥ 1,
//! ```
//!
//! solved with the implicit L1 scheme. Each step solves the monotone scalar
//! equation `w E + A E^k = r` for `E ∈ (0, E_{j−1}]`, so the discrete
//! solution is positive and nonincreasing. For `k = 1` the exact solution is
//! `E_α(−A t^α)`; for `k > 1` it decays like `t^{−α/k}`.

use crate::error::{Error, Result};
use crate::frac_core::{caputo_weights, dot, FractionalOrder, SampledPath, TimeGrid};
use crate::special_fn::{mittag_leffler, MittagLefflerParams};

const NEWTON_ITERS: usize = 50;
const BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FodeProblem {
    pub alpha: FractionalOrder,
    pub rate: f64,
    pub power: f64,
}

impl FodeProblem {
    pub fn new(alpha: FractionalOrder, rate: f64, power: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::param("A", format!("must be positive, got {rate}")));
        }
        if !(power.is_finite() && power >= 1.0) {
            return Err(Error::param("k", format!("must be at least 1, got {power}")));
        }
        Ok(FodeProblem { alpha, rate, power })
    }
}

#[derive(Debug, Clone)]
pub struct FodeSolution {
    pub problem: FodeProblem,
    pub path: SampledPath,
}

impl FodeSolution {
    pub fn grid(&self) -> &TimeGrid {
        self.path.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.path.values()
    }
}

/// Implicit L1 time stepping on `grid`.
pub fn solve_fode(problem: &FodeProblem, grid: &TimeGrid) -> Result<FodeSolution> {
    let weights = caputo_weights(problem.alpha, grid)?;
    let m = grid.steps();
    let mut values = Vec::with_capacity(m + 1);
    values.push(1.0);
    let mut incs: Vec<f64> = Vec::with_capacity(m);
    let mut row = vec![0.0; m];
    for j in 1..=m {
        weights.row_into(j, &mut row[..j]);
        let w = row[j - 1];
        let prev = values[j - 1];
        let rhs = w * prev - dot(&row[..j - 1], &incs);
        let e = solve_step(w, problem.rate, problem.power, rhs, prev, j)?;
        incs.push(e - prev);
        values.push(e);
    }
    Ok(FodeSolution {
        problem: *problem,
        path: SampledPath::new(grid.clone(), values)?,
    })
}

/// Root of `w E + A E^k = rhs` in `(0, upper]`.
fn solve_step(w: f64, a: f64, k: f64, rhs: f64, upper: f64, node: usize) -> Result<f64> {
    let phi = |e: f64| w * e + a * e.powf(k) - rhs;
    if !(rhs > 0.0) {
        return Err(Error::BracketFailure {
            node,
            message: format!("history term {rhs} is not positive"),
        });
    }
    let hi_val = phi(upper);
    if hi_val < 0.0 {
        return Err(Error::BracketFailure {
            node,
            message: format!("residual at the previous value is {hi_val} < 0"),
        });
    }
    if k == 1.0 {
        return Ok((rhs / (w + a)).min(upper));
    }
    // φ is convex and increasing, so Newton from the right never overshoots
    let mut e = upper;
    for _ in 0..NEWTON_ITERS {
        let val = phi(e);
        let slope = w + a * k * e.powf(k - 1.0);
        let next = e - val / slope;
        if !(next > 0.0 && next <= e) {
            break;
        }
        if e - next <= 4.0 * f64::EPSILON * e {
            return Ok(next);
        }
        e = next;
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(hi);
        }
    }
    let residual = phi(hi).abs();
    Err(Error::NonConvergence { node, residual })
}

/// `E_α(−A t^α)`, the exact solution for `k = 1`.
pub fn exact_k1(alpha: FractionalOrder, rate: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    mittag_leffler(&MittagLefflerParams::new(alpha), -rate * t.powf(alpha.value()))
}

/// Empirical two-sided envelope `C_low t^{−α/k} ≤ E(t) ≤ C_high t^{−α/k+ε}`
/// on the tail `[t*, T]`, `t* = T/10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope {
    pub t_star: f64,
    pub c_low: f64,
    pub c_high: f64,
    pub epsilon: f64,
    /// Least-squares slope of `log E` against `log t` on the tail.
    pub slope: f64,
}

/// Horizon below which [`decay_envelope`] refuses to fit a tail.
pub const MIN_ENVELOPE_HORIZON: f64 = 100.0;

pub fn decay_envelope(solution: &FodeSolution, epsilon: f64) -> Result<DecayEnvelope> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let grid = solution.grid();
    let horizon = grid.horizon();
    if horizon < MIN_ENVELOPE_HORIZON {
        return Err(Error::InsufficientRange(format!(
            "horizon {horizon} is shorter than {MIN_ENVELOPE_HORIZON}"
        )));
    }
    let t_star = horizon / 10.0;
    let start = grid
        .nodes()
        .iter()
        .position(|&t| t >= t_star)
        .expect("horizon exceeds t_star");
    let ts = &grid.nodes()[start..];
    let es = &solution.values()[start..];
    if ts.len() < 2 {
        return Err(Error::InsufficientRange("fewer than two nodes on the tail".into()));
    }
    if es.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::EnvelopeViolated("nonpositive value on the tail".into()));
    }
    if es.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::EnvelopeViolated("solution increases on the tail".into()));
    }
    let p = solution.problem.alpha.value() / solution.problem.power;
    let c_low = ts
        .iter()
        .zip(es)
        .map(|(&t, &e)| e * t.powf(p))
        .fold(f64::INFINITY, f64::min);
    let c_high = ts
        .iter()
        .zip(es)
        .map(|(&t, &e)| e * t.powf(p - epsilon))
        .fold(0.0, f64::max);
    let slope = loglog_slope(ts, es);
    if !(c_low > 0.0 && c_high.is_finite()) {
        return Err(Error::EnvelopeViolated(format!("degenerate constants {c_low}, {c_high}")));
    }
    Ok(DecayEnvelope {
        t_star: ts[0],
        c_low,
        c_high,
        epsilon,
        slope,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
