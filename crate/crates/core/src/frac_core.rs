//! Discrete Caputo operators.
//!
//! The Caputo derivative of order `α ∈ (0, 1)`
//!
//! ```text
//! ∂_t^α φ(t) = 1/Γ(1−α) ∫_0^t φ'(s) (t−s)^{−α} ds
//! ```
//!
//! is discretized with the L1 scheme: `φ` is replaced by its piecewise-linear
//! interpolant on a [`TimeGrid`] and the singular kernel is integrated exactly
//! on every cell. The same reconstruction backs the Marchaud form
//! ([`marchaud_eval`]) and the Abel integral ([`fractional_integral`]).
//!
//! Paths are extended to negative times by their initial value.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::special_fn::gamma_fn;

/// Order of the fractional derivative, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform,
    /// `t_j = T (j/M)^γ`.
    Graded { exponent: f64 },
    /// Arbitrary strictly increasing nodes starting at 0.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    kind: GridKind,
}

impl TimeGrid {
    /// `t_j = jT/M`, `j = 0..=M`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        check_horizon(horizon)?;
        check_steps(steps)?;
        let m = steps as f64;
        let nodes = (0..=steps).map(|j| j as f64 * horizon / m).collect();
        Ok(TimeGrid {
            nodes,
            kind: GridKind::Uniform,
        })
    }

    /// `t_j = T (j/M)^γ` with `γ ≥ 1`.
    pub fn graded(horizon: f64, steps: usize, exponent: f64) -> Result<Self> {
        check_horizon(horizon)?;
        check_steps(steps)?;
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(Error::param("grading", format!("exponent must be >= 1, got {exponent}")));
        }
        let m = steps as f64;
        let nodes = (0..=steps)
            .map(|j| horizon * (j as f64 / m).powf(exponent))
            .collect();
        Ok(TimeGrid {
            nodes,
            kind: GridKind::Graded { exponent },
        })
    }

    /// Graded grid with the exponent `(2−α)/α` that resolves the `t^α`
    /// initial layer at the L1 consistency order.
    pub fn graded_for(alpha: FractionalOrder, horizon: f64, steps: usize) -> Result<Self> {
        Self::graded(horizon, steps, default_grading(alpha))
    }

    /// Graded nodes on `[0, switch]` followed by geometric (uniform in
    /// `log t`) nodes on `[switch, horizon]`.
    pub fn graded_log(
        horizon: f64,
        switch: f64,
        graded_steps: usize,
        log_steps: usize,
        exponent: f64,
    ) -> Result<Self> {
        if !(switch > 0.0 && switch < horizon) {
            return Err(Error::param("switch", format!("must lie in (0, {horizon}), got {switch}")));
        }
        check_steps(log_steps)?;
        let mut nodes = Self::graded(switch, graded_steps, exponent)?.nodes;
        let ratio = (horizon / switch).ln() / log_steps as f64;
        for j in 1..=log_steps {
            nodes.push(switch * (ratio * j as f64).exp());
        }
        *nodes.last_mut().unwrap() = horizon;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::param("grid", "needs at least 2 nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::param("grid", "first node must be 0"));
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("grid", "nodes must be finite and strictly increasing"));
        }
        Ok(TimeGrid {
            nodes,
            kind: GridKind::Custom,
        })
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of cells `M`.
    #[inline]
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index `c` with `t_c < t ≤ t_{c+1}` for `t ∈ (0, T]`.
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if !(t > 0.0 && t <= self.horizon()) {
            return None;
        }
        let idx = self.nodes.partition_point(|&s| s < t);
        Some(idx - 1)
    }

    /// Index of the node closest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let idx = self.nodes.partition_point(|&s| s < t);
        if idx == 0 {
            0
        } else if idx == self.nodes.len() {
            idx - 1
        } else if (self.nodes[idx] - t) < (t - self.nodes[idx - 1]) {
            idx
        } else {
            idx - 1
        }
    }

    /// Grid restricted to the first `count` nodes.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count < 2 || count > self.nodes.len() {
            return Err(Error::param("grid", format!("cannot truncate to {count} nodes")));
        }
        Ok(TimeGrid {
            nodes: self.nodes[..count].to_vec(),
            kind: self.kind,
        })
    }
}

pub fn default_grading(alpha: FractionalOrder) -> f64 {
    (2.0 - alpha.value()) / alpha.value()
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::param("T", format!("horizon must be positive, got {horizon}")))
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps >= 1 {
        Ok(())
    } else {
        Err(Error::param("M", "grid needs at least one step (2 nodes)"))
    }
}

/// Function values on a [`TimeGrid`]. Between nodes the path is linear; for
/// `t < 0` it equals its initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes.len() {
            return Err(Error::param(
                "values",
                format!("expected {} samples, got {}", grid.nodes.len(), values.len()),
            ));
        }
        Ok(SampledPath { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&t| f(t)).collect();
        SampledPath { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear value; constant extension to the left.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(self.values[0]);
        }
        let c = self
            .grid
            .cell_of(t)
            .ok_or(Error::RangeExceeded(t, self.grid.horizon()))?;
        Ok(self.interp(c, t))
    }

    #[inline]
    fn interp(&self, c: usize, t: f64) -> f64 {
        let (t0, t1) = (self.grid.nodes[c], self.grid.nodes[c + 1]);
        if t == t1 {
            return self.values[c + 1];
        }
        let (v0, v1) = (self.values[c], self.values[c + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Successive differences `values[i+1] − values[i]`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Two-column `t,value` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.grid.nodes.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
        }
        out
    }
}

/// Decimal rendering with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// `a^p − (a−d)^p` for `a ≥ d > 0`, accurate when `d ≪ a`.
#[inline]
pub(crate) fn pow_diff(a: f64, d: f64, p: f64) -> f64 {
    let b = a - d;
    if b <= 0.0 {
        return a.powf(p);
    }
    if d < 0.5 * a {
        -a.powf(p) * (p * (-d / a).ln_1p()).exp_m1()
    } else {
        a.powf(p) - b.powf(p)
    }
}

/// L1 quadrature coefficients of the discrete Caputo derivative.
///
/// Row `j` holds `w_{j,i}`, `i = 0..j`, the weights of the increments
/// `φ_{i+1} − φ_i`:
///
/// ```text
/// w_{j,i} = [(t_j − t_i)^{1−α} − (t_j − t_{i+1})^{1−α}] / (Γ(2−α) (t_{i+1} − t_i))
/// ```
///
/// On uniform grids this collapses to `Δt^{−α}/Γ(2−α) · b_{j−i−1}` with
/// `b_q = (q+1)^{1−α} − q^{1−α}`, which is what gets stored. Other grids
/// compute rows on demand.
#[derive(Debug, Clone)]
pub struct CaputoWeights {
    alpha: FractionalOrder,
    grid: TimeGrid,
    inv_gamma_2ma: f64,
    uniform: Option<UniformRows>,
}

#[derive(Debug, Clone)]
struct UniformRows {
    scale: f64,
    b: Vec<f64>,
}

impl CaputoWeights {
    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Weight of the increment `φ_{i+1} − φ_i` in the row of node `j`.
    pub fn weight(&self, j: usize, i: usize) -> f64 {
        debug_assert!(i < j && j < self.grid.nodes.len());
        match &self.uniform {
            Some(u) => u.scale * u.b[j - i - 1],
            None => {
                let t = &self.grid.nodes;
                let one_m_a = 1.0 - self.alpha.value();
                let h = t[i + 1] - t[i];
                pow_diff(t[j] - t[i], h, one_m_a) * self.inv_gamma_2ma / h
            }
        }
    }

    /// Diagonal coefficient `w_{j,j−1}`: the weight of the newest increment.
    pub fn diagonal(&self, j: usize) -> f64 {
        self.weight(j, j - 1)
    }

    /// Writes row `j` into `buf[..j]`.
    pub fn row_into(&self, j: usize, buf: &mut [f64]) {
        match &self.uniform {
            Some(u) => {
                for (i, w) in buf[..j].iter_mut().enumerate() {
                    *w = u.scale * u.b[j - i - 1];
                }
            }
            None => {
                for (i, w) in buf[..j].iter_mut().enumerate() {
                    *w = self.weight(j, i);
                }
            }
        }
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        let mut buf = vec![0.0; j];
        self.row_into(j, &mut buf);
        buf
    }

    /// Discrete Caputo derivative at every node `t_1..t_M`
    /// (entry `k` corresponds to node `k + 1`).
    pub fn apply_all(&self, path: &SampledPath) -> Result<Vec<f64>> {
        self.check_grid(path)?;
        let inc = path.increments();
        let mut buf = vec![0.0; self.grid.steps()];
        Ok((1..=self.grid.steps())
            .map(|j| {
                self.row_into(j, &mut buf);
                dot(&buf[..j], &inc[..j])
            })
            .collect())
    }

    fn check_grid(&self, path: &SampledPath) -> Result<()> {
        if path.grid.nodes == self.grid.nodes {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Left-to-right dot product; the fixed order keeps results reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Builds the L1 weights for `grid`.
pub fn caputo_weights(alpha: FractionalOrder, grid: &TimeGrid) -> Result<CaputoWeights> {
    if grid.nodes.len() < 2 {
        return Err(Error::param("grid", "needs at least 2 nodes"));
    }
    let inv_gamma_2ma = 1.0 / gamma_fn(2.0 - alpha.value())?;
    let uniform = match grid.kind {
        GridKind::Uniform => {
            let one_m_a = 1.0 - alpha.value();
            let dt = grid.nodes[1];
            let b = (0..grid.steps())
                .map(|q| pow_diff(q as f64 + 1.0, 1.0, one_m_a))
                .collect();
            Some(UniformRows {
                scale: dt.powf(-alpha.value()) * inv_gamma_2ma,
                b,
            })
        }
        _ => None,
    };
    Ok(CaputoWeights {
        alpha,
        grid: grid.clone(),
        inv_gamma_2ma,
        uniform,
    })
}

/// Discrete Caputo derivative of `path` at node `j ≥ 1`:
/// `Σ_i w_{j,i} (values[i+1] − values[i])`.
pub fn caputo_apply(weights: &CaputoWeights, path: &SampledPath, j: usize) -> Result<f64> {
    weights.check_grid(path)?;
    if j == 0 || j > weights.grid.steps() {
        return Err(Error::param(
            "j",
            format!("node index must lie in 1..={}, got {j}", weights.grid.steps()),
        ));
    }
    let row = weights.row(j);
    let v = &path.values;
    Ok(row
        .iter()
        .enumerate()
        .fold(0.0, |acc, (i, w)| acc + w * (v[i + 1] - v[i])))
}

/// Marchaud form split at `t − δ`: returns `(∂^α[t−δ]φ(t), ∂^α[t−δ, t]φ(t))`
/// with normalization `c̃_α = α/Γ(1−α)`, so that the sum is the Caputo
/// derivative of the piecewise-linear reconstruction.
///
/// The far part includes the tail over `(−∞, 0)` in closed form,
/// `(φ(t) − φ(0)) t^{−α}/α`. `δ` must cover at least the cell containing `t`.
pub fn marchaud_eval(path: &SampledPath, t: f64, delta: f64, alpha: FractionalOrder) -> Result<(f64, f64)> {
    let grid = &path.grid;
    let c = grid
        .cell_of(t)
        .ok_or(Error::RangeExceeded(t, grid.horizon()))?;
    if !(delta > 0.0 && delta < t) {
        return Err(Error::param("delta", format!("must lie in (0, t={t}), got {delta}")));
    }
    let cell = grid.nodes[c + 1] - grid.nodes[c];
    if delta < cell {
        return Err(Error::param(
            "delta",
            format!("{delta} is below the grid cell {cell} containing t"),
        ));
    }
    let a = alpha.value();
    let norm = a / gamma_fn(1.0 - a)?;
    let phi_t = path.interp(c, t);
    let nodes = &grid.nodes;
    let vals = &path.values;

    // On each cell φ(t) − φ(s) = c0 + σ τ with τ = t − s.
    let piece = |k: usize, lo: f64, hi: f64| -> f64 {
        let slope = (vals[k + 1] - vals[k]) / (nodes[k + 1] - nodes[k]);
        let c0 = if k == c {
            0.0
        } else {
            phi_t - vals[k] - slope * (t - nodes[k])
        };
        let (big, small) = (t - lo, t - hi);
        let width = hi - lo;
        let mut acc = slope * pow_diff(big, width, 1.0 - a) / (1.0 - a);
        if c0 != 0.0 {
            acc += c0 * -pow_diff(big, width, -a) / a;
        }
        debug_assert!(small >= 0.0);
        acc
    };

    let split = t - delta;
    let mut far = (phi_t - vals[0]) * t.powf(-a) / a;
    let mut near = 0.0;
    for k in 0..=c {
        let lo = nodes[k];
        let hi = nodes[k + 1].min(t);
        if hi <= split {
            far += piece(k, lo, hi);
        } else if lo >= split {
            near += piece(k, lo, hi);
        } else {
            far += piece(k, lo, split);
            near += piece(k, split, hi);
        }
    }
    Ok((norm * far, norm * near))
}

/// `c_{α,β} = Γ(β+1)/Γ(β−α+1)`, so that `∂_t^α t^β = c_{α,β} t^{β−α}`.
pub fn power_rule_constant(alpha: FractionalOrder, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    Ok(gamma_fn(beta + 1.0)? / gamma_fn(beta - alpha.value() + 1.0)?)
}

/// Unnormalized Abel integral `∫_0^t f(z) (t−z)^{α−1} dz` of the
/// piecewise-linear reconstruction of `f` (no `1/Γ(α)` factor).
///
/// Each cell is integrated exactly against the kernel, so the only
/// approximation is the linear interpolation of `f`.
pub fn fractional_integral(f: &SampledPath, t: f64, alpha: FractionalOrder) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let grid = &f.grid;
    let c = grid
        .cell_of(t)
        .ok_or(Error::RangeExceeded(t, grid.horizon()))?;
    let a = alpha.value();
    let nodes = &grid.nodes;
    let mut acc = 0.0;
    for k in 0..=c {
        let lo = nodes[k];
        let hi = nodes[k + 1].min(t);
        let f_lo = f.values[k];
        let f_hi = if k == c { f.interp(c, t) } else { f.values[k + 1] };
        let (w_lo, w_hi) = abel_cell_weights(t - lo, hi - lo, a);
        acc += w_lo * f_lo + w_hi * f_hi;
    }
    Ok(acc)
}

/// Exact weights `(w_far, w_near)` of `∫_B^A τ^{α−1} ℓ(τ) dτ` where `ℓ` is
/// linear with `ℓ(A) = f_far`, `ℓ(B) = f_near`, `B = A − width`.
#[inline]
pub(crate) fn abel_cell_weights(big: f64, width: f64, a: f64) -> (f64, f64) {
    let small = big - width;
    let k0 = pow_diff(big, width, a) / a;
    // ∫_B^A τ^{α−1}(τ − B) dτ; binomial series when the cell is thin relative to B
    let k1 = if small > 0.0 && width < 1e-2 * small {
        let r = width / small;
        let (mut coef, mut rn, mut sum) = (1.0, r * r, 0.0);
        for n in 0..7 {
            sum += coef * rn / (n as f64 + 2.0);
            coef *= (a - 1.0 - n as f64) / (n as f64 + 1.0);
            rn *= r;
        }
        small.powf(a + 1.0) * sum
    } else {
        pow_diff(big, width, a + 1.0) / (a + 1.0) - small * k0
    };
    let w_far = k1 / width;
    (w_far, k0 - w_far)
}
