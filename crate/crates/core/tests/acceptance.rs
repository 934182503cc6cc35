//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, followed by
//! the measured quantities. With `ACCEPTANCE_STRICT=1` the process exits
//! nonzero when any criterion fails.
//!
//! Run with `cargo test --test acceptance -- --nocapture` (the harness is
//! custom, so output is always shown).

mod common;

use caputo_hj::counterexample::{
    build_spec, eta_half_closed_form, eval_u, find_admissible_n, oscillation_gap, sample_f, sample_u,
};
use caputo_hj::frac_core::{
    caputo_apply, caputo_weights, power_rule_constant, FractionalOrder, SampledPath, TimeGrid,
};
use caputo_hj::frac_ode::{decay_envelope, exact_k1, solve_fode, FodeProblem};
use caputo_hj::hj_evolve::{
    asymptotic_gap, aubry_decay_check, aubry_rate, check_barriers, eikonal_rate, evolve, holder_seminorm_time,
    holder_seminorm_until, solve_ergodic, supersolution_residual, EikonalProblem, ErgodicSolution, Ladder,
    LadderConstants, SpaceTimeSolution, TorusGrid,
};
use caputo_hj::special_fn::{gamma_fn, mittag_leffler, pi_csc, MittagLefflerParams};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

type Outcome = Result<Vec<String>, Vec<String>>;

fn ord(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn verdict(ok: bool, lines: Vec<String>) -> Outcome {
    if ok {
        Ok(lines)
    } else {
        Err(lines)
    }
}

const ALPHAS: [f64; 3] = [0.3, 0.5, 0.7];

fn c1_power_rule() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut lines = Vec::new();
    let discrete_at_one = |alpha: FractionalOrder, beta: f64, steps: usize| {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let w = caputo_weights(alpha, &grid).unwrap();
        let path = SampledPath::from_fn(grid, |t| t.powf(beta));
        caputo_apply(&w, &path, steps).unwrap()
    };
    for a in ALPHAS {
        let alpha = ord(a);
        for beta in [a, 1.0, 2.0] {
            let exact = power_rule_constant(alpha, beta).unwrap();
            let rel = (discrete_at_one(alpha, beta, 4096) / exact - 1.0).abs();
            ok &= rel <= 1e-3;
            lines.push(format!("α={a} β={beta}: rel err {rel:.3e} (≤ 1e-3)"));
        }
        let exact = power_rule_constant(alpha, 2.0).unwrap();
        let e2048 = (discrete_at_one(alpha, 2.0, 2048) - exact).abs();
        let e4096 = (discrete_at_one(alpha, 2.0, 4096) - exact).abs();
        let order = (e2048 / e4096).log2();
        ok &= order >= 1.5;
        lines.push(format!("α={a} β=2: empirical order {order:.4} (≥ 1.5)"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 10.0;
    lines.push(format!("runtime {secs:.2} s (≤ 10 s)"));
    verdict(ok, lines)
}

fn c2_mittag_leffler_identity() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for a in ALPHAS {
        let alpha = ord(a);
        let params = MittagLefflerParams::new(alpha);
        let grid = TimeGrid::graded_for(alpha, 20.0, 2048).unwrap();
        let path = SampledPath::from_fn(grid.clone(), |t| mittag_leffler(&params, -t.powf(a)).unwrap());
        let d = caputo_weights(alpha, &grid).unwrap().apply_all(&path).unwrap();
        let rel: Vec<f64> = (1..=grid.steps())
            .map(|j| {
                let target = -path.values()[j];
                (d[j - 1] - target).abs() / target.abs()
            })
            .collect();
        let worst = rel.iter().copied().fold(0.0, f64::max);
        let tail = rel[rel.len() / 2..].iter().copied().fold(0.0, f64::max);
        ok &= worst <= 2e-2;
        lines.push(format!(
            "α={a}: max rel err {worst:.3e} (≤ 2e-2); nodes 1..4: {:.3e} {:.3e} {:.3e} {:.3e}; second half {tail:.3e}",
            rel[0], rel[1], rel[2], rel[3]
        ));
    }
    verdict(ok, lines)
}

fn c3_mittag_leffler_bounds() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for a in ALPHAS {
        let params = MittagLefflerParams::new(ord(a));
        let g_low = gamma_fn(1.0 - a).unwrap();
        let g_high = gamma_fn(1.0 + a).unwrap();
        let (mut literal, mut sharp) = (0, 0);
        for i in 0..50 {
            let t = 10f64.powf(4.0 * i as f64 / 49.0);
            let e = mittag_leffler(&params, -t).unwrap();
            if !(1.0 / (g_low * t) <= e && e <= g_high / t) {
                literal += 1;
            }
            if !(1.0 / (1.0 + g_low * t) <= e && e <= 1.0 / (1.0 + t / g_high)) {
                sharp += 1;
            }
        }
        ok &= literal == 0;
        lines.push(format!(
            "α={a}: {literal}/50 violations of 1/(Γ(1−α)t) ≤ E ≤ Γ(1+α)/t; info: {sharp}/50 of 1/(1+Γ(1−α)t) ≤ E ≤ 1/(1+t/Γ(1+α))"
        ));
    }
    verdict(ok, lines)
}

fn c4_counterexample() -> Outcome {
    let start = Instant::now();
    let a = 0.5;
    let alpha = ord(a);
    let spec = build_spec(alpha, 10).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();

    let b_ok = spec.b_alpha == 0.5;
    ok &= b_ok;
    lines.push(format!("b_α = {:.17} (exactly 0.5: {b_ok})", spec.b_alpha));

    let b_oracle = common::beta_median(a);
    let eta_oracle = common::beta_mass(a, b_oracle.powi(3), b_oracle.powi(2));
    let eta_err = (spec.eta_alpha - eta_oracle).abs();
    ok &= eta_err <= 1e-6;
    lines.push(format!(
        "η_α = {:.15} vs quadrature {eta_oracle:.15}: |diff| {eta_err:.2e} (≤ 1e-6); arcsine form {:.15}",
        spec.eta_alpha,
        eta_half_closed_form()
    ));

    let n = find_admissible_n(&spec).unwrap();
    let gap = oscillation_gap(&spec, n).unwrap();
    let threshold = -spec.eta_alpha / 4.0 + 1e-3;
    ok &= gap <= threshold;
    lines.push(format!("first admissible N = {n}: u(a_2N+2) − u(a_2N+1) = {gap:.6} (≤ {threshold:.6})"));

    // Caputo derivative of the sampled u against Γ(α) f
    let tol = 1e-2;
    let horizon = spec.a[2 * n + 2];
    let grid = spec.sampling_grid(horizon, 3e-3, 0.05).unwrap();
    let u = sample_u(&spec, grid.clone()).unwrap();
    let f = sample_f(&spec, grid.clone()).unwrap();
    let d = caputo_weights(alpha, &grid).unwrap().apply_all(&u).unwrap();
    let gamma = gamma_fn(a).unwrap();
    let mut max_err: f64 = 0.0;
    let mut min_d = f64::INFINITY;
    for j in 1..=grid.steps() {
        max_err = max_err.max((d[j - 1] - gamma * f.values()[j]).abs());
        min_d = min_d.min(d[j - 1]);
    }
    ok &= max_err <= tol && min_d >= -tol;
    lines.push(format!(
        "discrete Caputo of u on {} nodes over [0, {horizon}]: max |∂u − Γ(α)f| {max_err:.3e} (≤ {tol:e}), min ∂u {min_d:.3e} (≥ −{tol:e})",
        grid.steps() + 1
    ));

    let mut max_u = u.values().iter().copied().fold(0.0, f64::max);
    for &t in &spec.a[..=2 * n + 2] {
        max_u = max_u.max(eval_u(&spec, t).unwrap());
    }
    let bound = pi_csc(alpha) + 1e-6;
    ok &= max_u <= bound;
    let on_unit = eval_u(&spec, 1.0).unwrap();
    ok &= on_unit == 0.0;
    lines.push(format!("max u = {max_u:.6} (≤ π csc(απ) + 1e-6 = {bound:.6}); u(1) = {on_unit}"));

    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 300.0;
    lines.push(format!("runtime {secs:.1} s (≤ 300 s)"));
    verdict(ok, lines)
}

fn c5_fractional_ode() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let mut violations = 0;
    let mut tally = |v: &[f64]| {
        violations += v.iter().filter(|&&e| !(e > 0.0)).count();
        violations += v.windows(2).filter(|w| w[1] > w[0]).count();
    };
    for a in ALPHAS {
        let alpha = ord(a);
        let grid = TimeGrid::graded_for(alpha, 20.0, 2048).unwrap();
        for rate in [0.5, 1.0, 2.0] {
            let sol = solve_fode(&FodeProblem::new(alpha, rate, 1.0).unwrap(), &grid).unwrap();
            let worst = grid
                .nodes()
                .iter()
                .zip(sol.values())
                .map(|(&t, &e)| {
                    let exact = exact_k1(alpha, rate, t).unwrap();
                    (e - exact).abs() / exact
                })
                .fold(0.0, f64::max);
            ok &= worst <= 1e-2;
            tally(sol.values());
            lines.push(format!("k=1 α={a} A={rate}: max rel err {worst:.3e} (≤ 1e-2)"));
        }
    }
    let epsilon = 0.01;
    for a in ALPHAS {
        let alpha = ord(a);
        let grid = TimeGrid::graded_log(1e5, 1.0, 1000, 3000, caputo_hj::frac_core::default_grading(alpha)).unwrap();
        let sol = solve_fode(&FodeProblem::new(alpha, 1.0, 2.0).unwrap(), &grid).unwrap();
        tally(sol.values());
        match decay_envelope(&sol, epsilon) {
            Ok(env) => {
                let dev = (env.slope + a / 2.0).abs();
                ok &= dev <= 0.05 + epsilon;
                lines.push(format!(
                    "k=2 α={a}: tail slope {:.4} vs −α/2 = {:.4}, |diff| {dev:.4} (≤ 0.05+ε, ε={epsilon}); C_low {:.4}, C_high {:.4}",
                    env.slope,
                    -a / 2.0,
                    env.c_low,
                    env.c_high
                ));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("k=2 α={a}: envelope failed: {e}"));
            }
        }
    }
    ok &= violations == 0;
    lines.push(format!("positivity/monotonicity violations: {violations}"));
    verdict(ok, lines)
}

/// Run (6): 1D, a ≡ 1, m = 1, f = sin²(πx), n = 256, T = 200, graded M = 4096.
fn run6(g: impl Fn(f64) -> f64) -> (SpaceTimeSolution, ErgodicSolution) {
    let alpha = ord(0.5);
    let grid = TorusGrid::new(1, 256).unwrap();
    let f = grid.sample(|p| (PI * p[0]).sin().powi(2));
    let g = grid.sample(|p| g(p[0]));
    let problem = EikonalProblem::new(grid, alpha, 1.0, vec![1.0; 256], f, g).unwrap();
    let tgrid = TimeGrid::graded_for(alpha, 200.0, 4096).unwrap();
    let sol = evolve(&problem, &tgrid).unwrap();
    let erg = solve_ergodic(&problem);
    (sol, erg)
}

fn c6_to_c8(sol: &SpaceTimeSolution, erg: &ErgodicSolution, secs: f64) -> [Outcome; 3] {
    let at = |t: f64| sol.tgrid.nearest_node(t);
    let gaps: Vec<(f64, f64)> = [25.0, 50.0, 100.0, 200.0]
        .iter()
        .map(|&t| (sol.tgrid.nodes()[at(t)], asymptotic_gap(sol, erg, at(t))))
        .collect();
    let (g50, g200) = (gaps[1].1, gaps[3].1);
    let c6 = verdict(
        g200 <= 0.05 && g200 <= g50 && secs <= 300.0,
        vec![
            format!("sup |u(·,T) + cT^α − v| at T=200: {g200:.5} (≤ 0.05), at T=50: {g50:.5} (gap(200) ≤ gap(50))"),
            format!(
                "gap profile: {}",
                gaps.iter().map(|(t, g)| format!("t={t:.1}: {g:.5}")).collect::<Vec<_>>().join(", ")
            ),
            format!("c = {}, |Z| = {}, evolve runtime {secs:.1} s (≤ 300 s)", erg.c, erg.z.len()),
        ],
    );

    let h100 = holder_seminorm_until(sol, 100.0).unwrap();
    let h200 = holder_seminorm_time(sol).unwrap();
    let rel = (h200 - h100).abs() / h100;
    let c7 = verdict(
        rel <= 0.10,
        vec![format!("Hölder seminorm up to T=100: {h100:.5}, up to T=200: {h200:.5}, relative diff {rel:.3e} (≤ 10%)")],
    );

    let bar = check_barriers(sol);
    let c8 = verdict(
        bar.violations == 0,
        vec![format!(
            "C = {:.5}: {} violations of g − Ct^α ≤ u ≤ g + Ct^α; margins upper {:.3e}, lower {:.3e}",
            bar.constant, bar.violations, bar.upper_margin, bar.lower_margin
        )],
    );
    [c6, c7, c8]
}

fn c9_aubry_decay() -> Outcome {
    // g = 0.3 |sin πx| is Lipschitz, nonconstant and minimized at Z = {0}
    let (sol, erg) = run6(|x| 0.3 * (PI * x).sin().abs());
    let p = &sol.problem;
    let ell = 0.0;
    let rate = aubry_rate(p, p.lip_g, ell).unwrap();
    let e = solve_fode(&FodeProblem::new(p.alpha, rate, p.m).unwrap(), &sol.tgrid).unwrap();
    let mut lines = vec![format!("Z = {:?} (single point, ℓ(γ) = 0), Lip(g) = {:.5}, A = {rate:.5}", erg.z, p.lip_g)];
    let ok = match aubry_decay_check(&sol, &erg, &e, ell) {
        Ok(r) => {
            lines.push(format!(
                "{} violations over {} checks; margins lower {:.3e}, upper {:.3e}",
                r.violations, r.checked, r.lower_margin, r.upper_margin
            ));
            r.violations == 0
        }
        Err(err) => {
            lines.push(format!("check failed: {err}"));
            false
        }
    };

    // plateau Aubry set with a positive path length
    let (prob, tgrid) = plateau_problem(128, 50.0, 800);
    let psol = evolve(&prob, &tgrid).unwrap();
    let perg = solve_ergodic(&prob);
    let ell = 0.25;
    let rate = aubry_rate(&prob, prob.lip_g, ell).unwrap();
    let e = solve_fode(&FodeProblem::new(prob.alpha, rate, prob.m).unwrap(), &tgrid).unwrap();
    match aubry_decay_check(&psol, &perg, &e, ell) {
        Ok(r) => lines.push(format!(
            "info: plateau Z (|Z| = {}, ℓ = {ell}): {} violations over {} checks",
            perg.z.len(),
            r.violations,
            r.checked
        )),
        Err(err) => lines.push(format!("info: plateau check unavailable: {err}")),
    }
    verdict(ok, lines)
}

/// f = 0 on [1/4, 1/2] and 0.5 sin² of the rescaled complement, g = 0.2 d(x, 1/4).
fn plateau_problem(n: usize, horizon: f64, steps: usize) -> (EikonalProblem, TimeGrid) {
    let alpha = ord(0.6);
    let grid = TorusGrid::new(1, n).unwrap();
    let f = grid.sample(|p| {
        let x = p[0];
        if (0.25..=0.5).contains(&x) {
            0.0
        } else {
            0.5 * (PI * (x - 0.5) / 0.75).sin().powi(2)
        }
    });
    let g = grid.sample(|p| 0.2 * grid_dist(p[0], 0.25));
    let problem = EikonalProblem::new(grid, alpha, 1.0, vec![1.0; n], f, g).unwrap();
    (problem, TimeGrid::graded_for(alpha, horizon, steps).unwrap())
}

fn grid_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn c10_supersolution_ladder() -> Outcome {
    let n = 256;
    let (problem, tgrid) = plateau_problem(n, 50.0, 400);
    let erg = solve_ergodic(&problem);
    let constants = LadderConstants::new(&problem, 1.0, 0.25).unwrap();
    let ladder = Ladder {
        anchors: vec![n / 4, n / 2],
        constants,
    };
    let e = solve_fode(&FodeProblem::new(problem.alpha, constants.rate, problem.m).unwrap(), &tgrid).unwrap();
    let h = problem.grid.h();
    match supersolution_residual(&problem, &erg, &ladder, 0, &e) {
        Ok(r) => verdict(
            r.min_residual >= -10.0 * h && r.at_anchor >= 0.0,
            vec![
                format!("min residual off kinks {:.4e} (≥ −10h = {:.4e})", r.min_residual, -10.0 * h),
                format!("residual at x_0: {:.4e} (≥ 0)", r.at_anchor),
                format!(
                    "M = {:.4}, C_H = {:.4}, A = {:.4}; {} evaluations, {} excluded",
                    constants.m_const, constants.c_h, constants.rate, r.evaluated, r.excluded
                ),
            ],
        ),
        Err(err) => Err(vec![format!("residual failed: {err}")]),
    }
}

fn c11_rate_formula() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let a = 0.5;
    let t = 100.0;
    for d in [1.0, 1.2, 1.4] {
        let r = eikonal_rate(d, ord(a), t).unwrap();
        let closed = a * (2.0 * d - 3.0) / (2.0 * d - 1.0);
        let q = 2.0 * (d - 1.0);
        let bound = |s: f64| {
            let ta = s.powf(a);
            move |eps: f64| eps * ta + eps.powf(-q) / ta
        };
        let (_, b1) = common::golden_min(bound(t), 0.0, 10.0);
        let (_, b2) = common::golden_min(bound(2.0 * t), 0.0, 10.0);
        let numeric = (b2 / b1).log2();
        let exact_ok = (r.exponent - closed).abs() <= 1e-12 && (r.doubling_exponent - closed).abs() <= 1e-12;
        let numeric_ok = (numeric - closed).abs() <= 1e-6 && (b1 - r.bound).abs() <= 1e-9 * r.bound;
        ok &= exact_ok && numeric_ok && r.decaying;
        lines.push(format!(
            "D={d}: exponent {:.15}, doubling of minimized bound {:.15}, α(2D−3)/(2D−1) = {closed:.15}; golden-section {numeric:.9}",
            r.exponent, r.doubling_exponent
        ));
    }
    let r = eikonal_rate(1.5, ord(a), t).unwrap();
    ok &= !r.decaying;
    lines.push(format!("D=1.5: exponent {}, flagged decaying = {}", r.exponent, r.decaying));
    verdict(ok, lines)
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().into(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn c12_determinism() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let mut configs: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    for cfg in configs {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let sub = stem.split('_').next().unwrap().to_string();
        let mut trees = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let status = Command::new(env!("CARGO_BIN_EXE_caputo-hj"))
                .arg(&sub)
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(dir.path())
                .output()
                .unwrap();
            if !status.status.success() {
                ok = false;
                lines.push(format!("{stem}: exit {:?}", status.status.code()));
            }
            trees.push(read_tree(dir.path()));
        }
        let same = trees[0] == trees[1];
        let csvs = trees[0].iter().filter(|(p, _)| p.extension().is_some_and(|x| x == "csv")).count();
        ok &= same && csvs > 0;
        lines.push(format!("{stem}: {} files ({csvs} CSV), byte-identical: {same}", trees[0].len()));
    }
    verdict(ok, lines)
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("C1 power rule", c1_power_rule()),
        ("C2 Mittag-Leffler identity", c2_mittag_leffler_identity()),
        ("C3 Mittag-Leffler bounds", c3_mittag_leffler_bounds()),
        ("C4 counterexample", c4_counterexample()),
        ("C5 fractional ODE", c5_fractional_ode()),
    ];
    let start = Instant::now();
    let (sol, erg) = run6(|_| 0.0);
    let secs = start.elapsed().as_secs_f64();
    let [c6, c7, c8] = c6_to_c8(&sol, &erg, secs);
    drop(sol);
    results.push(("C6 HJ long-time behaviour", c6));
    results.push(("C7 Hölder uniformity", c7));
    results.push(("C8 barrier bounds", c8));
    results.push(("C9 Aubry decay", c9_aubry_decay()));
    results.push(("C10 supersolution ladder", c10_supersolution_ladder()));
    results.push(("C11 rate formula", c11_rate_formula()));
    results.push(("C12 determinism", c12_determinism()));

    let mut failed = 0;
    for (name, outcome) in &results {
        let (tag, lines) = match outcome {
            Ok(l) => ("PASS", l),
            Err(l) => {
                failed += 1;
                ("FAIL", l)
            }
        };
        println!("[{tag}] {name}");
        for l in lines {
            println!("       {l}");
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
