//! Time-fractional Hamilton-Jacobi equations on the torus:
//!
//! ```text
//! ∂_t^α u + a(x)|Du|^m = f(x)   in T^N × (0, ∞),   u(·, 0) = g,   N ∈ {1, 2}.
//! ```
//!
//! Time is discretized with the L1 scheme and space with the Godunov upwind
//! gradient. Every step solves the implicit system
//! `w_jj u_j + a G(u_j)^m = f + w_jj u_{j−1} − history_j` by Gauss-Seidel
//! sweeps of a monotone scalar update, so the scheme satisfies a discrete
//! comparison principle for any step size.
//!
//! Also here: the Aubry set `Z = {f = min f}`, the ergodic problem
//! `a|Dv|^m = f + c`, and numerical checks of the long-time estimates
//! (barriers, time-Hölder bound, decay on `Z`, supersolution ladder, rate).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frac_core::{caputo_apply, caputo_weights, FractionalOrder, TimeGrid};
use crate::frac_ode::FodeSolution;
use crate::special_fn::gamma_fn;

/// Smallest number of points per axis.
pub const MIN_POINTS: usize = 8;

/// Uniform periodic grid on `[0, 1)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
        }
        if n < MIN_POINTS {
            return Err(Error::param("n", format!("must be at least {MIN_POINTS}, got {n}")));
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of a node; the second entry is 0 in 1D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx % self.n) as f64 * h, (idx / self.n) as f64 * h],
        }
    }

    /// Node index of integer coordinates, wrapped periodically.
    pub fn index(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        let i = i.rem_euclid(n) as usize;
        match self.dim {
            1 => i,
            _ => i + self.n * j.rem_euclid(n) as usize,
        }
    }

    fn coords(&self, idx: usize) -> (isize, isize) {
        ((idx % self.n) as isize, (idx / self.n) as isize)
    }

    /// `(minus, plus)` neighbours of `idx` along `axis`.
    #[inline]
    pub fn axis_neighbors(&self, idx: usize, axis: usize) -> (usize, usize) {
        let (i, j) = self.coords(idx);
        if axis == 0 {
            (self.index(i - 1, j), self.index(i + 1, j))
        } else {
            (self.index(i, j - 1), self.index(i, j + 1))
        }
    }

    /// Function sampled at every node.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.point(k))).collect()
    }

    /// Periodic Euclidean distance between two points of the torus.
    pub fn distance(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = (p[k] - q[k]).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            s += d * d;
        }
        s.sqrt()
    }
}

/// Godunov upwind norm `|D u|` at `idx`: per axis
/// `max(D⁻u, −D⁺u, 0)`, combined in the Euclidean norm.
pub fn godunov_norm(grid: &TorusGrid, u: &[f64], idx: usize) -> f64 {
    let h = grid.h();
    let mut s = 0.0;
    for axis in 0..grid.dim() {
        let (lo, hi) = grid.axis_neighbors(idx, axis);
        let c = ((u[idx] - u[lo]).max(u[idx] - u[hi]) / h).max(0.0);
        s += c * c;
    }
    s.sqrt()
}

/// Largest Godunov-type difference quotient of `g`, per node
/// `sqrt(Σ_axis max(|D⁻g|, |D⁺g|)²)`; a lower bound for `Lip(g)` that
/// dominates every discrete gradient the scheme can form from `g`.
pub fn discrete_lipschitz(grid: &TorusGrid, g: &[f64]) -> f64 {
    let h = grid.h();
    (0..grid.len())
        .map(|idx| {
            let mut s = 0.0;
            for axis in 0..grid.dim() {
                let (lo, hi) = grid.axis_neighbors(idx, axis);
                let c = (g[idx] - g[lo]).abs().max((g[hi] - g[idx]).abs()) / h;
                s += c * c;
            }
            s.sqrt()
        })
        .fold(0.0, f64::max)
}

/// `∂_t^α u + a(x)|Du|^m = f(x)` with `min f = 0` after normalization.
#[derive(Debug, Clone)]
pub struct EikonalProblem {
    pub grid: TorusGrid,
    pub alpha: FractionalOrder,
    pub m: f64,
    pub a: Vec<f64>,
    /// Normalized source, `min f = 0`.
    pub f: Vec<f64>,
    /// `c = −min f_raw`.
    pub ergodic_constant: f64,
    pub g: Vec<f64>,
    pub lip_g: f64,
}

impl EikonalProblem {
    pub fn new(
        grid: TorusGrid,
        alpha: FractionalOrder,
        m: f64,
        a: Vec<f64>,
        f_raw: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        if !(m.is_finite() && m >= 1.0) {
            return Err(Error::param("m", format!("must be at least 1, got {m}")));
        }
        for (name, v) in [("a", &a), ("f", &f_raw), ("g", &g)] {
            if v.len() != grid.len() {
                return Err(Error::param(name, format!("has {} values for {} nodes", v.len(), grid.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(name, "contains non-finite values"));
            }
        }
        let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
        if !(a_min > 0.0) {
            return Err(Error::param("a", format!("must be bounded below by a positive constant, min is {a_min}")));
        }
        let shift = f_raw.iter().copied().fold(f64::INFINITY, f64::min);
        let f = f_raw.iter().map(|&x| x - shift).collect();
        let lip_g = discrete_lipschitz(&grid, &g);
        Ok(EikonalProblem {
            grid,
            alpha,
            m,
            a,
            f,
            ergodic_constant: 0.0 - shift,
            g,
            lip_g,
        })
    }

    /// Replaces the recorded `Lip(g)`; must dominate the discrete estimate.
    pub fn with_lipschitz(mut self, lip: f64) -> Result<Self> {
        let floor = discrete_lipschitz(&self.grid, &self.g);
        if !(lip.is_finite() && lip >= floor) {
            return Err(Error::param("lip_g", format!("{lip} is below the discrete estimate {floor}")));
        }
        self.lip_g = lip;
        Ok(self)
    }

    pub fn a_min(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn a_max(&self) -> f64 {
        self.a.iter().copied().fold(0.0, f64::max)
    }

    pub fn f_sup(&self) -> f64 {
        self.f.iter().copied().fold(0.0, f64::max)
    }

    pub fn g_min(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `C = (‖f‖_∞ + max a · Lip(g)^m) / Γ(α+1)`.
    pub fn barrier_constant(&self) -> f64 {
        let num = self.f_sup() + self.a_max() * self.lip_g.powf(self.m);
        num / gamma_fn(1.0 + self.alpha.value()).expect("Γ on (1, 2)")
    }

    /// `C_H = 1 + 1/a_min + ‖f‖_∞`, so that `a|p|^m − f ≥ |p|/C_H − C_H`.
    pub fn coercivity_constant(&self) -> f64 {
        1.0 + 1.0 / self.a_min() + self.f_sup()
    }

    /// `ν` with `F(x, p) ≥ ν|p|^k`: `ν = min a`, `k = m`.
    pub fn nu(&self) -> f64 {
        self.a_min()
    }

    /// `Δt^α Γ(2−α) m a_max L^{m−1} / h` for the largest step, the stability
    /// number of an explicit-gradient iteration. Reported for reference only;
    /// the implicit sweeps in [`evolve`] do not need it below 1.
    pub fn explicit_stability_number(&self, tgrid: &TimeGrid) -> f64 {
        let dt = tgrid
            .nodes()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let a = self.alpha.value();
        let grad = self.lip_g.max(1.0);
        dt.powf(a) * gamma_fn(2.0 - a).expect("Γ on (1, 2)") * self.m * self.a_max() * grad.powf(self.m - 1.0)
            / self.grid.h()
    }
}

/// Indices where `f ≤ min f + tol`.
pub fn aubry_set(f: &[f64], tol: f64) -> Vec<usize> {
    let min = f.iter().copied().fold(f64::INFINITY, f64::min);
    (0..f.len()).filter(|&k| f[k] <= min + tol).collect()
}

/// Default Aubry tolerance `h²`.
pub fn default_aubry_tol(grid: &TorusGrid) -> f64 {
    grid.h() * grid.h()
}

#[derive(Debug, Clone)]
pub struct ErgodicSolution {
    pub c: f64,
    pub v: Vec<f64>,
    pub z: Vec<usize>,
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by lowest index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn graph_neighbors(grid: &TorusGrid, idx: usize) -> Vec<(usize, f64)> {
    let (i, j) = grid.coords(idx);
    let mut out = Vec::with_capacity(8);
    if grid.dim() == 1 {
        out.push((grid.index(i - 1, 0), 1.0));
        out.push((grid.index(i + 1, 0), 1.0));
    } else {
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            out.push((grid.index(i + di, j + dj), 1.0));
        }
        for (di, dj) in [(-1, -1), (1, -1), (-1, 1), (1, 1)] {
            out.push((grid.index(i + di, j + dj), std::f64::consts::SQRT_2));
        }
    }
    out
}

/// Weighted geodesic distance from `sources` (with initial values) on the
/// periodic grid graph; the edge between neighbours `x, y` costs
/// `|x−y| · (s(x) + s(y))/2`.
pub fn geodesic_distance(grid: &TorusGrid, speed_cost: &[f64], sources: &[(usize, f64)]) -> Vec<f64> {
    let h = grid.h();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for &(idx, d) in sources {
        if d < dist[idx] {
            dist[idx] = d;
            heap.push(Entry { dist: d, idx });
        }
    }
    while let Some(Entry { dist: d, idx }) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        for (nb, len) in graph_neighbors(grid, idx) {
            let nd = d + len * h * 0.5 * (speed_cost[idx] + speed_cost[nb]);
            if nd < dist[nb] {
                dist[nb] = nd;
                heap.push(Entry { dist: nd, idx: nb });
            }
        }
    }
    dist
}

/// `(f/a)^{1/m}`, the local cost of the eikonal metric.
fn metric_cost(problem: &EikonalProblem) -> Vec<f64> {
    problem
        .f
        .iter()
        .zip(&problem.a)
        .map(|(&f, &a)| (f / a).powf(1.0 / problem.m))
        .collect()
}

/// Ergodic pair `(c, v)`: `v = min g` on `Z`, Dijkstra distances elsewhere,
/// then Godunov sweeps with `Z` frozen so that `a G(v)^m = f` holds exactly
/// off `Z` and `v` is a fixed point of [`evolve`].
pub fn solve_ergodic(problem: &EikonalProblem) -> ErgodicSolution {
    let grid = &problem.grid;
    let z = aubry_set(&problem.f, default_aubry_tol(grid));
    let g_min = problem.g_min();
    let cost = metric_cost(problem);
    let sources: Vec<(usize, f64)> = z.iter().map(|&k| (k, g_min)).collect();
    let mut v = geodesic_distance(grid, &cost, &sources);
    let mut frozen = vec![false; grid.len()];
    for &k in &z {
        frozen[k] = true;
    }
    let h = grid.h();
    let orders = sweep_orders(grid);
    for sweep in 0..10_000 {
        let order = &orders[sweep % orders.len()];
        let mut change: f64 = 0.0;
        for &idx in order {
            if frozen[idx] {
                continue;
            }
            let new = eikonal_update(grid, &v, idx, h * cost[idx]);
            change = change.max((new - v[idx]).abs());
            v[idx] = new;
        }
        if change <= 1e-14 * (1.0 + g_min.abs()) && sweep >= orders.len() {
            break;
        }
    }
    ErgodicSolution {
        c: problem.ergodic_constant,
        v,
        z,
    }
}

/// Godunov solution of `G(v) = s/h` at `idx` given its neighbours.
fn eikonal_update(grid: &TorusGrid, v: &[f64], idx: usize, hs: f64) -> f64 {
    let (l, r) = grid.axis_neighbors(idx, 0);
    let u1 = v[l].min(v[r]);
    if grid.dim() == 1 {
        return u1 + hs;
    }
    let (d, up) = grid.axis_neighbors(idx, 1);
    let u2 = v[d].min(v[up]);
    let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
    if lo + hs <= hi {
        lo + hs
    } else {
        0.5 * (lo + hi + (2.0 * hs * hs - (hi - lo) * (hi - lo)).sqrt())
    }
}

/// Alternating sweep orderings: forward/backward in 1D, the four diagonal
/// directions in 2D.
fn sweep_orders(grid: &TorusGrid) -> Vec<Vec<usize>> {
    let n = grid.n() as isize;
    if grid.dim() == 1 {
        let fwd: Vec<usize> = (0..grid.len()).collect();
        let bwd: Vec<usize> = fwd.iter().rev().copied().collect();
        return vec![fwd, bwd];
    }
    let mut out = Vec::new();
    for (si, sj) in [(1, 1), (-1, 1), (-1, -1), (1, -1)] {
        let mut order = Vec::with_capacity(grid.len());
        for jj in 0..n {
            let j = if sj > 0 { jj } else { n - 1 - jj };
            for ii in 0..n {
                let i = if si > 0 { ii } else { n - 1 - ii };
                order.push(grid.index(i, j));
            }
        }
        out.push(order);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Sweeps stop once a full sweep moves no value by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            tol: 1e-10,
            max_sweeps: 1000,
        }
    }
}

/// Discrete solution of the normalized problem; `states[j]` lives at
/// `tgrid.nodes()[j]`. The raw problem's solution is
/// `states[j] − c t_j^α / Γ(1+α)` (see [`SpaceTimeSolution::raw_state`]).
#[derive(Debug, Clone)]
pub struct SpaceTimeSolution {
    pub problem: EikonalProblem,
    pub tgrid: TimeGrid,
    pub states: Vec<Vec<f64>>,
    /// Gauss-Seidel sweeps used at each step (entry `j−1` for node `j`).
    pub sweeps: Vec<usize>,
}

impl SpaceTimeSolution {
    pub fn raw_state(&self, j: usize) -> Vec<f64> {
        let a = self.problem.alpha.value();
        let t = self.tgrid.nodes()[j];
        let shift = self.problem.ergodic_constant * t.powf(a) / gamma_fn(1.0 + a).expect("Γ on (1, 2)");
        self.states[j].iter().map(|u| u - shift).collect()
    }
}

pub fn evolve(problem: &EikonalProblem, tgrid: &TimeGrid) -> Result<SpaceTimeSolution> {
    evolve_with(problem, tgrid, EvolveOptions::default())
}

/// Chunk size of the data-parallel history sum.
const CHUNK: usize = 64;

pub fn evolve_with(problem: &EikonalProblem, tgrid: &TimeGrid, opts: EvolveOptions) -> Result<SpaceTimeSolution> {
    if !(opts.tol > 0.0) || opts.max_sweeps == 0 {
        return Err(Error::param("tol", "sweep tolerance and budget must be positive"));
    }
    let weights = caputo_weights(problem.alpha, tgrid)?;
    let grid = &problem.grid;
    let len = grid.len();
    let steps = tgrid.steps();
    let orders = sweep_orders(grid);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(problem.g.clone());
    let mut incs: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut sweeps = Vec::with_capacity(steps);
    let mut row = vec![0.0; steps];
    let mut history = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    for j in 1..=steps {
        weights.row_into(j, &mut row[..j]);
        let w = row[j - 1];
        let past = &row[..j - 1];
        history
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, out)| {
                let start = c * CHUNK;
                let end = start + out.len();
                out.fill(0.0);
                for (wi, inc) in past.iter().zip(&incs) {
                    for (o, d) in out.iter_mut().zip(&inc[start..end]) {
                        *o += wi * d;
                    }
                }
            });
        let prev = &states[j - 1];
        for k in 0..len {
            rhs[k] = problem.f[k] + w * prev[k] - history[k];
        }
        let mut u = prev.clone();
        let mut used = 0;
        let mut converged = false;
        let mut change = f64::INFINITY;
        while used < opts.max_sweeps {
            let order = &orders[used % orders.len()];
            change = 0.0;
            for &idx in order {
                let new = local_solve(grid, &u, idx, w, problem.a[idx], problem.m, rhs[idx]);
                change = change.max((new - u[idx]).abs());
                u[idx] = new;
            }
            used += 1;
            if change <= opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { node: j, residual: change });
        }
        incs.push(u.iter().zip(prev).map(|(a, b)| a - b).collect());
        states.push(u);
        sweeps.push(used);
    }
    Ok(SpaceTimeSolution {
        problem: problem.clone(),
        tgrid: tgrid.clone(),
        states,
        sweeps,
    })
}

/// Solves `w u + a G(u)^m = rhs` for the value at `idx`, neighbours frozen.
fn local_solve(grid: &TorusGrid, u: &[f64], idx: usize, w: f64, a: f64, m: f64, rhs: f64) -> f64 {
    let h = grid.h();
    let free = rhs / w;
    let (l, r) = grid.axis_neighbors(idx, 0);
    let u1 = u[l].min(u[r]);
    let (lo, hi) = if grid.dim() == 1 {
        (u1, f64::INFINITY)
    } else {
        let (d, up) = grid.axis_neighbors(idx, 1);
        let u2 = u[d].min(u[up]);
        (u1.min(u2), u1.max(u2))
    };
    if free <= lo {
        return free;
    }
    let k = a / h.powf(m);
    // one active axis: w u + k (u − lo)^m = rhs on (lo, free]
    let one = if m == 1.0 {
        (rhs + k * lo) / (w + k)
    } else {
        monotone_root(
            |x| w * x + k * (x - lo).powf(m) - rhs,
            |x| w + k * m * (x - lo).powf(m - 1.0),
            lo,
            free,
        )
    };
    if one <= hi {
        return one;
    }
    // both axes active on (hi, one]
    let norm = |x: f64| ((x - lo) * (x - lo) + (x - hi) * (x - hi)).sqrt();
    monotone_root(
        |x| w * x + k * norm(x).powf(m) - rhs,
        |x| {
            let n = norm(x);
            w + k * m * n.powf(m - 2.0) * ((x - lo) + (x - hi))
        },
        hi,
        one,
    )
}

/// Root of an increasing convex `φ` in `[lo, hi]` with `φ(lo) ≤ 0 ≤ φ(hi)`,
/// by Newton from the right with a bisection fallback.
fn monotone_root(phi: impl Fn(f64) -> f64, dphi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut x = hi;
    for _ in 0..60 {
        let val = phi(x);
        if val <= 0.0 {
            return x;
        }
        let next = x - val / dphi(x);
        if !(next >= lo && next < x) {
            break;
        }
        if x - next <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    let (mut a, mut b) = (lo, x);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if phi(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 2.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    b
}

/// `sup_x |u(x, t_j) + c t_j^α/Γ(1+α) − v(x)|` for the raw problem, which is
/// `sup_x |states[j] − v|` for the stored normalized solution.
pub fn asymptotic_gap(solution: &SpaceTimeSolution, erg: &ErgodicSolution, j: usize) -> f64 {
    solution.states[j]
        .iter()
        .zip(&erg.v)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Time-Hölder seminorm over the whole time grid.
pub fn holder_seminorm_time(solution: &SpaceTimeSolution) -> Result<f64> {
    holder_seminorm_until(solution, solution.tgrid.horizon())
}

/// `max |u(x,s) − u(x,t)| / |s−t|^α` over nodes `s < t ≤ horizon`.
pub fn holder_seminorm_until(solution: &SpaceTimeSolution, horizon: f64) -> Result<f64> {
    let nodes = solution.tgrid.nodes();
    let count = nodes.iter().take_while(|&&t| t <= horizon).count();
    if count < 3 {
        return Err(Error::InsufficientRange(format!("{count} time nodes up to {horizon}, need 3")));
    }
    let a = solution.problem.alpha.value();
    let states = &solution.states;
    let best = (1..count)
        .into_par_iter()
        .map(|t| {
            let mut best: f64 = 0.0;
            for s in 0..t {
                let inv = (nodes[t] - nodes[s]).powf(-a);
                let diff = states[t]
                    .iter()
                    .zip(&states[s])
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                best = best.max(diff * inv);
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierReport {
    pub constant: f64,
    pub violations: usize,
    /// `min (g + Ct^α − u)` over all nodes.
    pub upper_margin: f64,
    /// `min (u − g + Ct^α)` over all nodes.
    pub lower_margin: f64,
}

/// Checks `g − Ct^α ≤ u ≤ g + Ct^α` at every node.
pub fn check_barriers(solution: &SpaceTimeSolution) -> BarrierReport {
    let p = &solution.problem;
    let c = p.barrier_constant();
    let a = p.alpha.value();
    let mut report = BarrierReport {
        constant: c,
        violations: 0,
        upper_margin: f64::INFINITY,
        lower_margin: f64::INFINITY,
    };
    for (j, state) in solution.states.iter().enumerate() {
        let b = c * solution.tgrid.nodes()[j].powf(a);
        for (u, g) in state.iter().zip(&p.g) {
            let up = g + b - u;
            let low = u - (g - b);
            if up < 0.0 || low < 0.0 {
                report.violations += 1;
            }
            report.upper_margin = report.upper_margin.min(up);
            report.lower_margin = report.lower_margin.min(low);
        }
    }
    report
}

/// `A = ν L^{k−1} / (√N + ℓ)`, capped at 1.
pub fn aubry_rate(problem: &EikonalProblem, lip: f64, ell_gamma: f64) -> Result<f64> {
    if !(ell_gamma >= 0.0 && ell_gamma.is_finite()) {
        return Err(Error::param("ell_gamma", format!("must be nonnegative, got {ell_gamma}")));
    }
    let n = problem.grid.dim() as f64;
    let raw = problem.nu() * lip.powf(problem.m - 1.0) / (n.sqrt() + ell_gamma);
    Ok(raw.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AubryReport {
    pub violations: usize,
    /// `min (u(z,t) − min g)`.
    pub lower_margin: f64,
    /// `min (min g + Lip(g) ℓ E(t) − u(z,t))`.
    pub upper_margin: f64,
    /// Node count checked.
    pub checked: usize,
}

/// Checks `min g ≤ u(z,t) ≤ min g + Lip(g) ℓ(γ) E(t)` for `z ∈ Z` at every
/// time node. `e` must live on the solution's time grid.
pub fn aubry_decay_check(
    solution: &SpaceTimeSolution,
    erg: &ErgodicSolution,
    e: &FodeSolution,
    ell_gamma: f64,
) -> Result<AubryReport> {
    let p = &solution.problem;
    if e.grid().nodes() != solution.tgrid.nodes() {
        return Err(Error::GridMismatch);
    }
    let g_min = p.g_min();
    let touches = erg.z.iter().any(|&k| p.g[k] <= g_min + 1e-12 * (1.0 + g_min.abs()));
    if !touches {
        return Err(Error::AssumptionViolated("Z does not meet argmin g".into()));
    }
    let mut report = AubryReport {
        violations: 0,
        lower_margin: f64::INFINITY,
        upper_margin: f64::INFINITY,
        checked: 0,
    };
    for (state, &ej) in solution.states.iter().zip(e.values()) {
        let upper = g_min + p.lip_g * ell_gamma * ej;
        for &z in &erg.z {
            let low = state[z] - g_min;
            let up = upper - state[z];
            if low < 0.0 || up < 0.0 {
                report.violations += 1;
            }
            report.lower_margin = report.lower_margin.min(low);
            report.upper_margin = report.upper_margin.min(up);
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Constants of the supersolution ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderConstants {
    pub lip: f64,
    pub ell_gamma: f64,
    pub c_h: f64,
    /// `M = L + C_H² + C_H‖f‖_∞ + L C_H (√N + ℓ)`.
    pub m_const: f64,
    /// `A = ν L^{k−1}/(√N + ℓ)`, capped at 1.
    pub rate: f64,
}

impl LadderConstants {
    pub fn new(problem: &EikonalProblem, lip: f64, ell_gamma: f64) -> Result<Self> {
        if !(lip > 0.0 && lip.is_finite()) {
            return Err(Error::param("L", format!("must be positive, got {lip}")));
        }
        let c_h = problem.coercivity_constant();
        let root_n = (problem.grid.dim() as f64).sqrt();
        let m_const = lip + c_h * c_h + c_h * problem.f_sup() + lip * c_h * (root_n + ell_gamma);
        Ok(LadderConstants {
            lip,
            ell_gamma,
            c_h,
            m_const,
            rate: aubry_rate(problem, lip, ell_gamma)?,
        })
    }
}

/// Anchors `x_0, …, x_n` (grid indices) of the ladder
/// `U_i = L Σ_{j≤i} |x_j − x_{j−1}| E + L |x − x_i| E + M d_{[x_i, x_{i+1}]}`.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub anchors: Vec<usize>,
    pub constants: LadderConstants,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// Minimum residual over nodes off the kink set.
    pub min_residual: f64,
    /// Minimum over time of the residual at `x_i`.
    pub at_anchor: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Distance from `p` to the nearest periodic image of the segment `[s, e]`
/// together with the gap to the second-nearest image.
fn segment_distance(dim: usize, p: [f64; 2], s: [f64; 2], e: [f64; 2]) -> (f64, f64) {
    let mut best = [f64::INFINITY, f64::INFINITY];
    let shifts: &[f64] = &[-1.0, 0.0, 1.0];
    let ys: &[f64] = if dim == 1 { &[0.0] } else { shifts };
    for &kx in shifts {
        for &ky in ys {
            let q = [p[0] - kx, p[1] - ky];
            let d = [e[0] - s[0], e[1] - s[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = if len2 > 0.0 {
                (((q[0] - s[0]) * d[0] + (q[1] - s[1]) * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let c = [s[0] + t * d[0] - q[0], s[1] + t * d[1] - q[1]];
            let dist = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if dist < best[0] {
                best[1] = best[0];
                best[0] = dist;
            } else if dist < best[1] {
                best[1] = dist;
            }
        }
    }
    (best[0], best[1] - best[0])
}

/// Discrete residual `∂_t^α U_i + a|DU_i|^m − f` of ladder rung `i` at every
/// grid point and time node `t_1..t_M` of `e`'s grid.
///
/// Points within `h` of `x_i`, `x_{i+1}`, or of a ridge of either distance
/// function (where two periodic images are equally close) are excluded from
/// the minimum; the residual at `x_i` is reported separately.
pub fn supersolution_residual(
    problem: &EikonalProblem,
    erg: &ErgodicSolution,
    ladder: &Ladder,
    i: usize,
    e: &FodeSolution,
) -> Result<ResidualReport> {
    let grid = &problem.grid;
    let anchors = &ladder.anchors;
    if anchors.len() < 2 || i + 1 >= anchors.len() {
        return Err(Error::param("i", format!("rung {i} needs anchors x_{i} and x_{}", i + 1)));
    }
    if let Some(&bad) = anchors.iter().find(|&&k| k >= grid.len() || !erg.z.contains(&k)) {
        return Err(Error::AssumptionViolated(format!("anchor index {bad} is not in Z")));
    }
    let c = ladder.constants;
    let h = grid.h();
    let dim = grid.dim();
    let pts: Vec<[f64; 2]> = anchors.iter().map(|&k| grid.point(k)).collect();
    let prefix: f64 = (1..=i).map(|j| grid.distance(pts[j], pts[j - 1])).sum();
    let xi = pts[i];
    let xn = pts[i + 1];

    // spatial profiles: U = (L·(prefix + |x − x_i|)) E(t) + M d(x)
    let mut radial = vec![0.0; grid.len()];
    let mut seg = vec![0.0; grid.len()];
    let mut excluded = vec![false; grid.len()];
    for k in 0..grid.len() {
        let p = grid.point(k);
        let (dr, gap_r) = segment_distance(dim, p, xi, xi);
        let (ds, gap_s) = segment_distance(dim, p, xi, xn);
        radial[k] = c.lip * (prefix + dr);
        seg[k] = c.m_const * ds;
        let near = |q: [f64; 2]| grid.distance(p, q) <= h * (1.0 + 1e-9);
        excluded[k] = near(xi) || near(xn) || gap_r <= 2.0 * h || gap_s <= 2.0 * h;
    }
    let weights = caputo_weights(problem.alpha, e.grid())?;
    let mut report = ResidualReport {
        min_residual: f64::INFINITY,
        at_anchor: f64::INFINITY,
        evaluated: 0,
        excluded: 0,
    };
    let xi_idx = anchors[i];
    let mut u = vec![0.0; grid.len()];
    for j in 1..=e.grid().steps() {
        let ej = e.values()[j];
        let de = caputo_apply(&weights, &e.path, j)?;
        for k in 0..grid.len() {
            u[k] = radial[k] * ej + seg[k];
        }
        for k in 0..grid.len() {
            let res = radial[k] * de + problem.a[k] * godunov_norm(grid, &u, k).powf(problem.m) - problem.f[k];
            if k == xi_idx {
                report.at_anchor = report.at_anchor.min(res);
            }
            if excluded[k] {
                report.excluded += 1;
            } else {
                report.min_residual = report.min_residual.min(res);
                report.evaluated += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub eps_opt: f64,
    pub bound: f64,
    pub exponent: f64,
    /// `log₂(bound(2t) / bound(t))`, which should equal `exponent`.
    pub doubling_exponent: f64,
    pub decaying: bool,
}

/// `min_ε (ε t^α + ε^{−q} t^{−α})`, `q = 2(D−1)`.
fn rate_min(q: f64, alpha: f64, t: f64) -> (f64, f64) {
    let ta = t.powf(alpha);
    if q == 0.0 {
        // infimum as ε → 0
        return (0.0, 1.0 / ta);
    }
    let eps = (q / (ta * ta)).powf(1.0 / (q + 1.0));
    (eps, eps * ta + eps.powf(-q) / ta)
}

/// Closed-form minimization of the box-counting bound
/// `ε t^α + 1/(ε^{2(D−1)} t^α)`; decays like `t^{α(2D−3)/(2D−1)}`.
pub fn eikonal_rate(d: f64, alpha: FractionalOrder, t: f64) -> Result<RateReport> {
    if !(d >= 1.0 && d.is_finite()) {
        return Err(Error::param("D", format!("must be at least 1, got {d}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    let a = alpha.value();
    let q = 2.0 * (d - 1.0);
    let (eps_opt, bound) = rate_min(q, a, t);
    let (_, bound2) = rate_min(q, a, 2.0 * t);
    let exponent = a * (2.0 * d - 3.0) / (2.0 * d - 1.0);
    Ok(RateReport {
        eps_opt,
        bound,
        exponent,
        doubling_exponent: (bound2 / bound).log2(),
        decaying: exponent < 0.0,
    })
}
