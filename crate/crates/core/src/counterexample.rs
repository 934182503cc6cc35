//! A bounded function with nonnegative Caputo derivative that oscillates
//! forever.
//!
//! With `b = b_α` (the median of the normalized beta density), geometric
//! breakpoints `a_k = b^{−k}` and ramp widths `ε_k`, the source
//!
//! ```text
//! f(t) = f₁(t) f₂(t),   f₁ = min(1, t^{−α}),
//! f₂ = trapezoidal indicator of ∪_k [a_{2k}, a_{2k+1}] with ramps of width ε_k
//! ```
//!
//! is nonnegative, and `u(t) = ∫_0^t f(z) (t−z)^{α−1} dz` solves
//! `∂_t^α u = Γ(α) f`, `u(0) = 0`. Yet `u(a_{2N+2}) − u(a_{2N+1}) ≤ −η_α/4`
//! for every admissible `N`, so `u` has no limit.

use crate::error::{Error, Result};
use crate::frac_core::{fractional_integral, FractionalOrder, SampledPath, TimeGrid};
use crate::special_fn::{inverse_beta_half, pi_csc, reg_incomplete_beta};

/// Largest breakpoint the construction is allowed to reach.
pub const MAX_BREAKPOINT: f64 = 1e12;

/// Orders outside this range need [`CounterexampleSpec::build_unchecked`].
pub const SAFE_ALPHA: (f64, f64) = (0.2, 0.8);

#[derive(Debug, Clone)]
pub struct CounterexampleSpec {
    pub alpha: FractionalOrder,
    pub b_alpha: f64,
    pub eta_alpha: f64,
    pub k_max: usize,
    /// `a_0 ..= a_{k_max}`.
    pub a: Vec<f64>,
    /// `ε_k` for every plateau `[a_{2k}, a_{2k+1}]` inside the range.
    pub eps: Vec<f64>,
}

/// Builds the construction for `α ∈ [0.2, 0.8]`.
pub fn build_spec(alpha: FractionalOrder, k_max: usize) -> Result<CounterexampleSpec> {
    let a = alpha.value();
    if a < SAFE_ALPHA.0 || a > SAFE_ALPHA.1 {
        return Err(Error::param(
            "alpha",
            format!(
                "{a} is outside [{}, {}]; breakpoint ranges explode near 0 and 1 (use the extreme-order flag)",
                SAFE_ALPHA.0, SAFE_ALPHA.1
            ),
        ));
    }
    CounterexampleSpec::build_unchecked(alpha, k_max)
}

impl CounterexampleSpec {
    /// Same as [`build_spec`] without the order gate.
    pub fn build_unchecked(alpha: FractionalOrder, k_max: usize) -> Result<Self> {
        if k_max < 2 {
            return Err(Error::param("K_max", format!("must be at least 2, got {k_max}")));
        }
        let b = inverse_beta_half(alpha);
        let half = reg_incomplete_beta(alpha, 0.0, b)?;
        if (half - 0.5).abs() > 1e-10 {
            return Err(Error::AssumptionViolated(format!("B_α[0, b_α] = {half}, expected 1/2")));
        }
        let eta = pi_csc(alpha) * reg_incomplete_beta(alpha, b.powi(3), b.powi(2))?;
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::AssumptionViolated(format!("η_α = {eta} outside (0, 1)")));
        }
        let ratio = 1.0 / b;
        let a: Vec<f64> = (0..=k_max).map(|k| ratio.powi(k as i32)).collect();
        if a[k_max] > MAX_BREAKPOINT {
            return Err(Error::param(
                "K_max",
                format!("a_{k_max} = {:e} exceeds {MAX_BREAKPOINT:e}", a[k_max]),
            ));
        }
        let eps = (0..)
            .take_while(|k| 2 * k < k_max)
            .map(|k| (1.0 - b * b) / 4.0 * eta / a[2 * k])
            .collect();
        Ok(CounterexampleSpec {
            alpha,
            b_alpha: b,
            eta_alpha: eta,
            k_max,
            a,
            eps,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.a[self.k_max]
    }

    /// `π csc(απ)`, the uniform bound on `u`.
    pub fn u_bound(&self) -> f64 {
        pi_csc(self.alpha)
    }

    /// Sorted breakpoints of `f` in `[0, t_max]`: `0`, and for every plateau
    /// `a_{2k}, a_{2k}+ε_k, a_{2k+1}−ε_k, a_{2k+1}`.
    pub fn breakpoints(&self, t_max: f64) -> Vec<f64> {
        let mut pts = vec![0.0];
        for (k, &e) in self.eps.iter().enumerate() {
            for p in [self.a[2 * k], self.a[2 * k] + e, self.a[2 * k + 1] - e, self.a[2 * k + 1]] {
                if p <= t_max {
                    pts.push(p);
                }
            }
        }
        pts
    }

    /// Breakpoint-aligned grid on `[0, t_max]` suited to sampling `u`.
    ///
    /// The cell size at `z` is `min(rel_step·max(z, 1), h₀ + grading·d(z))`
    /// where `d` is the distance to the nearest breakpoint, so cells shrink
    /// geometrically into every kink of `f` (where `u` loses smoothness).
    pub fn sampling_grid(&self, t_max: f64, rel_step: f64, grading: f64) -> Result<TimeGrid> {
        self.check_grid_args(t_max, rel_step)?;
        if !(grading > 0.0 && grading < 1.0) {
            return Err(Error::param("grading", format!("must lie in (0, 1), got {grading}")));
        }
        let pts = self.grid_breaks(t_max);
        let mut nodes = vec![0.0];
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h0 = 1e-2 * self.nearest_eps(lo).min(self.nearest_eps(hi));
            let size = |x: f64| (rel_step * x.max(1.0)).min(h0 + grading * (x - lo).min(hi - x));
            let mid = 0.5 * (lo + hi);
            let mut left = Vec::new();
            let mut x = lo;
            loop {
                x += size(x);
                if x >= mid {
                    break;
                }
                left.push(x);
            }
            let mut right = Vec::new();
            let mut x = hi;
            loop {
                x -= size(x);
                if x <= mid {
                    break;
                }
                right.push(x);
            }
            // merge a sliver in the middle
            if let (Some(&l), Some(&r)) = (left.last(), right.last()) {
                if r - l < 0.5 * size(mid) {
                    left.pop();
                }
            }
            nodes.extend(left);
            nodes.extend(right.into_iter().rev());
            nodes.push(hi);
        }
        TimeGrid::from_nodes(nodes)
    }

    /// Grid used by [`eval_u`]: plateaus in cells of relative length
    /// `rel_step`, ramps in at least `ramp_cells` equal cells, intervals where `f`
    /// vanishes as single cells, and geometric refinement into `t_max`.
    fn integration_grid(&self, t_max: f64, rel_step: f64, ramp_cells: usize) -> Result<TimeGrid> {
        self.check_grid_args(t_max, rel_step)?;
        let pts = self.grid_breaks(t_max);
        let mut nodes = vec![0.0];
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let relative = (((hi - lo) / (rel_step * lo.max(1.0))).ceil() as usize).max(1);
            let cells = if self.f2(0.5 * (lo + hi)) == 0.0 {
                1
            } else if self.is_ramp(lo, hi) {
                relative.max(ramp_cells)
            } else {
                relative
            };
            for c in 1..=cells {
                nodes.push(if c == cells { hi } else { lo + (hi - lo) * c as f64 / cells as f64 });
            }
        }
        let last = nodes[nodes.len() - 2];
        let mut extra: Vec<f64> = (1..=12)
            .map(|i| t_max - (t_max - last) * 0.5f64.powi(i))
            .filter(|&x| x > last && x < t_max)
            .collect();
        let end = nodes.pop().unwrap();
        nodes.append(&mut extra);
        nodes.push(end);
        nodes.dedup();
        TimeGrid::from_nodes(nodes)
    }

    fn check_grid_args(&self, t_max: f64, rel_step: f64) -> Result<()> {
        if !(rel_step > 0.0 && rel_step < 1.0) {
            return Err(Error::param("rel_step", format!("must lie in (0, 1), got {rel_step}")));
        }
        if !(t_max > 0.0) {
            return Err(Error::param("t", format!("must be positive, got {t_max}")));
        }
        if t_max > self.horizon() {
            return Err(Error::RangeExceeded(t_max, self.horizon()));
        }
        Ok(())
    }

    fn grid_breaks(&self, t_max: f64) -> Vec<f64> {
        let mut pts = self.breakpoints(t_max);
        if *pts.last().unwrap() < t_max {
            pts.push(t_max);
        }
        pts
    }

    /// Ramp width of the plateau closest to `t`.
    fn nearest_eps(&self, t: f64) -> f64 {
        let k = self
            .eps
            .iter()
            .enumerate()
            .map(|(k, _)| k)
            .min_by(|&i, &j| {
                let di = (self.a[2 * i] - t).abs().min((self.a[2 * i + 1] - t).abs());
                let dj = (self.a[2 * j] - t).abs().min((self.a[2 * j + 1] - t).abs());
                di.total_cmp(&dj)
            })
            .unwrap_or(0);
        self.eps[k]
    }

    fn is_ramp(&self, lo: f64, hi: f64) -> bool {
        self.eps.iter().enumerate().any(|(k, &e)| {
            let (s, t) = (self.a[2 * k], self.a[2 * k + 1]);
            (lo == s && hi == s + e) || (lo == t - e && hi == t)
        })
    }

    fn f2(&self, t: f64) -> f64 {
        for (k, &e) in self.eps.iter().enumerate() {
            let (lo, hi) = (self.a[2 * k], self.a[2 * k + 1]);
            if t < lo {
                return 0.0;
            }
            if t < hi {
                return if t < lo + e {
                    (t - lo) / e
                } else if t < hi - e {
                    1.0
                } else {
                    (hi - t) / e
                };
            }
        }
        0.0
    }
}

/// `f(t) = f₁(t) f₂(t) ∈ [0, 1]`.
pub fn eval_f(spec: &CounterexampleSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    if t > spec.horizon() {
        return Err(Error::RangeExceeded(t, spec.horizon()));
    }
    let f1 = if t <= 1.0 { 1.0 } else { t.powf(-spec.alpha.value()) };
    Ok(f1 * spec.f2(t))
}

/// Default plateau resolution used by [`eval_u`].
pub const DEFAULT_REL_STEP: f64 = 2e-3;

/// `u(t) = ∫_0^t f(z) (t−z)^{α−1} dz` on a breakpoint-aligned grid.
pub fn eval_u(spec: &CounterexampleSpec, t: f64) -> Result<f64> {
    eval_u_with(spec, t, DEFAULT_REL_STEP)
}

pub fn eval_u_with(spec: &CounterexampleSpec, t: f64, rel_step: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    if t > spec.horizon() {
        return Err(Error::RangeExceeded(t, spec.horizon()));
    }
    // f vanishes before a_0 = 1
    if t <= spec.a[0] {
        return Ok(0.0);
    }
    let grid = spec.integration_grid(t, rel_step, 16)?;
    let f = sample_f(spec, grid)?;
    fractional_integral(&f, t, spec.alpha)
}

/// `u` at every node of `grid`, from one pass over `f` sampled on the same
/// grid (`O(M²)`). Accurate when `grid` resolves the kinks of `f`, as
/// [`CounterexampleSpec::sampling_grid`] does.
pub fn sample_u(spec: &CounterexampleSpec, grid: TimeGrid) -> Result<SampledPath> {
    let f = sample_f(spec, grid.clone())?;
    let values = grid
        .nodes()
        .iter()
        .map(|&t| fractional_integral(&f, t, spec.alpha))
        .collect::<Result<Vec<_>>>()?;
    SampledPath::new(grid, values)
}

/// `f` sampled on `grid`.
pub fn sample_f(spec: &CounterexampleSpec, grid: TimeGrid) -> Result<SampledPath> {
    let values = grid
        .nodes()
        .iter()
        .map(|&t| eval_f(spec, t))
        .collect::<Result<Vec<_>>>()?;
    SampledPath::new(grid, values)
}

/// `∫_{1−ε_N/a_{2N+1}}^1 y^{−α}(1−y)^{α−1} dy < η_α/4` and `a_{2N}(a_1 − 1) ≥ 2`.
pub fn is_admissible(spec: &CounterexampleSpec, n: usize) -> Result<bool> {
    if n >= spec.eps.len() {
        return Err(Error::InsufficientRange(format!("ε_{n} is not materialized (K_max = {})", spec.k_max)));
    }
    let z = 1.0 - spec.eps[n] / spec.a[2 * n + 1];
    let tail = pi_csc(spec.alpha) * reg_incomplete_beta(spec.alpha, z, 1.0)?;
    let spacing = spec.a[2 * n] * (spec.a[1] - 1.0);
    Ok(tail < spec.eta_alpha / 4.0 && spacing >= 2.0)
}

/// Smallest admissible `N` with `a_{2N+2}` inside the materialized range.
pub fn find_admissible_n(spec: &CounterexampleSpec) -> Result<usize> {
    let mut n = 0;
    while 2 * n + 2 <= spec.k_max {
        if is_admissible(spec, n)? {
            return Ok(n);
        }
        n += 1;
    }
    Err(Error::InsufficientRange(format!(
        "no admissible N with 2N+2 <= K_max = {}",
        spec.k_max
    )))
}

/// `u(a_{2N+2}) − u(a_{2N+1})`.
pub fn oscillation_gap(spec: &CounterexampleSpec, n: usize) -> Result<f64> {
    if 2 * n + 2 > spec.k_max {
        return Err(Error::RangeExceeded(2.0 * n as f64 + 2.0, spec.k_max as f64));
    }
    if !is_admissible(spec, n)? {
        return Err(Error::param("N", format!("N = {n} does not satisfy the admissibility conditions")));
    }
    Ok(eval_u(spec, spec.a[2 * n + 2])? - eval_u(spec, spec.a[2 * n + 1])?)
}

/// Closed form of `η_{1/2}` for reference: `2 (arcsin √(1/4) − arcsin √(1/8))`.
pub fn eta_half_closed_form() -> f64 {
    2.0 * (0.25f64.sqrt().asin() - 0.125f64.sqrt().asin())
}
