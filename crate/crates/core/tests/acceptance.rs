//! End-to-end acceptance suite. Runs without the libtest harness so that one
//! `criterion N: PASS|FAIL` line per criterion is always printed.

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use hklab::bounds::{legendre, solve_k_lambda, CertifiedEnvelope, ConstantsLedger};
use hklab::experiment::{run, ExperimentConfig, FITTED_CONSTANTS_STATEMENT};
use hklab::graph::{build_lattice_box, build_percolation_cluster, complete_two, path, EdgeWeights, WeightedGraph};
use hklab::heat::{exhaustion_kernel, full_kernel, monte_carlo_kernel, BallMetric, HeatKernelSolution};
use hklab::metric::AdaptedMetric;
use hklab::regularity::{fit_on_diagonal_envelope, log_grid};
use hklab::verify::{
    check_max_principle, check_tail_lemmas, check_theorem_bounds, check_weighted_sum_lemma, BoundOptions, LemmaCheck,
    Verdict,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn torus(side: usize) -> WeightedGraph {
    build_lattice_box(2, side, true, EdgeWeights::Constant(1.0)).unwrap()
}

fn within_runtime(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

/// Power envelopes fitted at `vertices` and certified with the smallest `A`
/// that admits all of them.
fn fitted_envelopes(
    g: &WeightedGraph,
    vertices: &[usize],
    window: (f64, f64),
    lambda: f64,
) -> (ConstantsLedger, BTreeMap<usize, CertifiedEnvelope>) {
    let grid = log_grid(window.0, window.1, 64);
    let fits: Vec<_> = vertices
        .iter()
        .map(|&x| {
            let k = full_kernel(g, x, &grid, 1e-12).unwrap();
            (x, fit_on_diagonal_envelope(&k, x, 2.0, window).unwrap().envelope)
        })
        .collect();
    let mut a: f64 = 1.0;
    for (_, f) in &fits {
        a = a.max(hklab::experiment::required_a_const(f, 2.0, window).unwrap());
    }
    let ledger = ConstantsLedger::build(2.0, a, g.theta_floor(), lambda).unwrap();
    let certified = fits
        .into_iter()
        .map(|(x, f)| (x, CertifiedEnvelope::certify(f, a, 2.0, window, 256).unwrap()))
        .collect();
    (ledger, certified)
}

fn k_lambda() -> Outcome {
    let start = Instant::now();
    let k = solve_k_lambda(2.0).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure((2.98..=2.99).contains(&k), || format!("K = {k}"))?;
    ensure(took < Duration::from_millis(1), || format!("took {took:?}"))?;
    Ok(format!("K_2 = {k:.12} in {took:?}"))
}

fn kernel_correctness() -> Outcome {
    let start = Instant::now();
    let times = [0.1, 0.5, 1.0, 2.0, 5.0];
    let mut worst: f64 = 0.0;
    // two vertices, unit conductance: p_t(0,0) = (1 + e^{−2t})/2
    let k2 = complete_two();
    for x in 0..2 {
        let k = full_kernel(&k2, x, &times, 1e-12).unwrap();
        for (i, &t) in times.iter().enumerate() {
            for y in 0..2 {
                let sign = if x == y { 1.0 } else { -1.0 };
                let exact = (1.0 + sign * (-2.0 * t).exp()) / 2.0;
                worst = worst.max((k.value(i, y) - exact).abs());
            }
        }
    }
    // three-vertex path, θ = (1, 2, 1): eigenvalues 0, 1, 2 with
    // eigenvectors 1, (1, 0, −1), (1, −1, 1)
    let p3 = path(3).unwrap();
    let phi1 = [1.0, 0.0, -1.0];
    let phi2 = [1.0, -1.0, 1.0];
    for x in 0..3 {
        let k = full_kernel(&p3, x, &times, 1e-12).unwrap();
        for (i, &t) in times.iter().enumerate() {
            for y in 0..3 {
                let exact = 0.25 + (-t).exp() * phi1[x] * phi1[y] / 2.0 + (-2.0 * t).exp() * phi2[x] * phi2[y] / 4.0;
                worst = worst.max((k.value(i, y) - exact).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("closed-form error {worst:e}"))?;

    let g = torus(16);
    let n = g.len();
    let grid = [0.5, 1.0, 1.5, 2.5];
    let all: Vec<HeatKernelSolution> = (0..n).map(|x| full_kernel(&g, x, &grid, 1e-12).unwrap()).collect();
    let theta = g.theta();
    let mut sym: f64 = 0.0;
    for i in 0..grid.len() {
        for x in 0..n {
            for y in 0..n {
                sym = sym.max((all[x].value(i, y) - all[y].value(i, x)).abs());
            }
        }
    }
    // p_{0.5+1} and p_{1+1.5} against the Chapman–Kolmogorov sums
    let mut semi: f64 = 0.0;
    for &(a, b, c) in &[(0usize, 1usize, 2usize), (1, 2, 3)] {
        for x in [0, 17, 100, 255] {
            for z in 0..n {
                let sum: f64 = (0..n).map(|y| all[x].value(a, y) * all[y].value(b, z) * theta[y]).sum();
                semi = semi.max((sum - all[x].value(c, z)).abs());
            }
        }
    }
    ensure(sym <= 1e-8, || format!("symmetry error {sym:e}"))?;
    ensure(semi <= 1e-8, || format!("semigroup error {semi:e}"))?;
    within_runtime(start, Duration::from_secs(10))?;
    Ok(format!(
        "closed forms {worst:.2e}, symmetry {sym:.2e}, semigroup {semi:.2e}, {:?}",
        start.elapsed()
    ))
}

fn monotone_exhaustion() -> Outcome {
    let g = torus(16);
    let m = AdaptedMetric::canonical(&g);
    let times = [0.5, 2.0, 8.0];
    let tol = 1e-12;
    let (top, diag) = exhaustion_kernel(&m, 0, &times, tol, 5, BallMetric::Adapted).map_err(|e| e.to_string())?;
    ensure(diag.worst_decrease <= 1e-10, || format!("decrease {:e}", diag.worst_decrease))?;
    ensure(diag.sizes.windows(2).all(|w| w[0] <= w[1]), || format!("sizes {:?}", diag.sizes))?;
    ensure(*diag.sizes.last().unwrap() == g.len(), || "top level is not the whole torus".into())?;
    let full = full_kernel(&g, 0, &times, tol).unwrap();
    let mut gap: f64 = 0.0;
    for i in 0..times.len() {
        for y in 0..g.len() {
            gap = gap.max((top.value(i, y) - full.value(i, y)).abs());
        }
    }
    ensure(gap <= 1e-10, || format!("top level differs from the full solve by {gap:e}"))?;
    Ok(format!("levels {:?}, worst decrease {:.2e}, gap to full {gap:.2e}", diag.sizes, diag.worst_decrease))
}

fn long_range_bounds() -> Outcome {
    let start = Instant::now();
    let cluster = build_percolation_cluster(2, 64, 0.6, 1).unwrap();
    let fleet: Vec<(&str, WeightedGraph, Vec<usize>)> = vec![
        ("K2", complete_two(), vec![0, 1]),
        ("path-10", path(10).unwrap(), (0..10).collect()),
        ("torus-3", torus(3), (0..9).collect()),
        ("torus-16", torus(16), vec![0, 17, 136, 255]),
        ("percolation-64", cluster.clone(), vec![0, cluster.len() / 3, 2 * cluster.len() / 3]),
    ];
    let times = [0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
    let ledger = ConstantsLedger::with_defaults(2.0, 1.0, 1.0).unwrap();
    let mut applicable = 0;
    let mut worst = f64::INFINITY;
    for (name, g, sources) in &fleet {
        let m = AdaptedMetric::canonical(g);
        let pairs: Vec<(usize, usize)> = sources.iter().flat_map(|&x| (0..g.len()).map(move |y| (x, y))).collect();
        let r = check_theorem_bounds(&m, &pairs, &times, &ledger, &BTreeMap::new(), BoundOptions::default())
            .map_err(|e| e.to_string())?;
        for row in r.rows.iter().filter(|r| r.applicable) {
            applicable += 1;
            worst = worst.min(row.margin);
            ensure(row.margin >= -1e-9, || format!("{name}: {row:?}"))?;
        }
    }
    within_runtime(start, Duration::from_secs(300))?;
    Ok(format!("{applicable} applicable rows, worst margin {worst:.3e}, {:?}", start.elapsed()))
}

fn max_principle() -> Outcome {
    let ledger = ConstantsLedger::with_defaults(2.0, 1.0, 1.0).unwrap();
    let c = 6.0 * ledger.gamma * E * E;
    let mut applicable = 0;
    let mut not_applicable = 0;
    for side in [3, 16] {
        let g = torus(side);
        let m = AdaptedMetric::canonical(&g);
        for r in [0.5, 1.0, 2.0, 4.0] {
            for radius in [r + 1.0, 2.0 * r + 2.0, f64::INFINITY] {
                let subset = if radius.is_finite() { m.ball(0, radius).members } else { (0..g.len()).collect() };
                for (t1, t0) in [(0.05, 0.5), (0.5, 2.0), (1.0, 4.0)] {
                    // s on both sides of the threshold R + ½ ≤ 6γe²(s − t0)
                    for extra in [0.5, 1.0, 3.0] {
                        let s = t0 + (r + extra) / c;
                        let check = check_max_principle(&m, &subset, 0, r, (t1, t0), s, &ledger, 40, 1e-13)
                            .map_err(|e| e.to_string())?;
                        match check.verdict {
                            Verdict::Pass => applicable += 1,
                            Verdict::NotApplicable => not_applicable += 1,
                            Verdict::Fail => return Err(format!("torus {side}: {check:?}")),
                        }
                    }
                }
            }
        }
    }
    ensure(applicable >= 50, || format!("only {applicable} applicable grids"))?;
    Ok(format!("{applicable} grids nonincreasing, {not_applicable} outside the hypothesis"))
}

fn lemma_suite() -> Outcome {
    let mut passed: BTreeMap<String, usize> = BTreeMap::new();
    let mut na = 0;
    for side in [3, 16] {
        let g = torus(side);
        let m = AdaptedMetric::canonical(&g);
        let sources = [0, g.len() / 2];
        let window = (1e-5, 64.0);
        let (ledger, envelopes) = fitted_envelopes(&g, &sources, window, 2.0);
        let mut checks: Vec<LemmaCheck> = Vec::new();
        for &x in &sources {
            let f = &envelopes[&x].envelope;
            for r0 in [0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
                for t0 in [1.0, 2.0, 4.0, 8.0] {
                    checks.extend(check_tail_lemmas(&m, x, r0, t0, &ledger, f, 1e-12).map_err(|e| e.to_string())?);
                }
            }
            for d in [0.0, 1.0, 2.0, 4.0] {
                for t in [1.0, 2.0, 4.0, 8.0, 16.0] {
                    checks.push(check_weighted_sum_lemma(&m, x, d, t, &ledger, f, 1e-12).map_err(|e| e.to_string())?);
                }
            }
        }
        for c in checks {
            match c.verdict {
                Verdict::Pass => *passed.entry(c.lemma.clone()).or_default() += 1,
                Verdict::NotApplicable => na += 1,
                Verdict::Fail => return Err(format!("torus {side}: {c:?}")),
            }
        }
    }
    let total: usize = passed.values().sum();
    ensure(total >= 50, || format!("only {total} admissible samples"))?;
    for lemma in ["tail_step", "tail_estimate", "weighted_sum", "j_star_bracket"] {
        ensure(passed.get(lemma).copied().unwrap_or(0) > 0, || format!("no admissible {lemma} sample"))?;
    }
    Ok(format!("{total} admissible samples passed {passed:?}, {na} gated out"))
}

fn gaussian_end_to_end() -> Outcome {
    let g = torus(16);
    let m = AdaptedMetric::canonical(&g);
    let vertices: Vec<usize> = (0..g.len()).collect();
    let (ledger, envelopes) = fitted_envelopes(&g, &vertices, (1e-5, 64.0), 2.0);
    let failed: Vec<_> = ledger.invariants().into_iter().filter(|i| !i.holds).collect();
    ensure(failed.is_empty(), || format!("ledger invariants fail: {failed:?}"))?;
    let pairs: Vec<(usize, usize)> = [0, 17, 136].iter().flat_map(|&x| (0..g.len()).map(move |y| (x, y))).collect();
    let times = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let r = check_theorem_bounds(&m, &pairs, &times, &ledger, &envelopes, BoundOptions::default())
        .map_err(|e| e.to_string())?;
    let rows: Vec<_> = r.rows.iter().filter(|r| r.applicable && r.bound_name == "gaussian").collect();
    ensure(!rows.is_empty(), || "no applicable Gaussian rows".into())?;
    let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    if let Some(bad) = rows.iter().find(|r| r.margin < -1e-9) {
        return Err(format!("{bad:?}"));
    }
    Ok(format!(
        "{} applicable rows, worst margin {worst:.3e}, A = {:.4}, C1 = {:.4e}, C2 = {:.4e}, α0 = {:.4e}",
        rows.len(),
        ledger.a_const,
        ledger.c1,
        ledger.c2,
        ledger.alpha0
    ))
}

fn scalar_suite() -> Outcome {
    let n = 1000;
    let mut worst: f64 = f64::INFINITY;
    for i in 0..n {
        let s = 10.0 * i as f64 / (n - 1) as f64;
        let lhs = s.exp() + (-s).exp() - 2.0;
        worst = worst.min(s * s * s.exp() - lhs);
        worst = worst.min(s * s * (1.0 + s * s.exp() / 6.0) - lhs);
    }
    for lambda in [1.5, 2.0, 4.0] {
        let k = solve_k_lambda(lambda).unwrap();
        for i in 0..n {
            let t = -k + 2.0 * k * i as f64 / (n - 1) as f64;
            worst = worst.min(lambda * t * t - (2.0 * t.cosh() - 2.0));
        }
    }
    ensure(worst >= -1e-9, || format!("cosh-type inequality slack {worst:e}"))?;

    let g = |l: f64| (2.0 * l).exp();
    let mut closed_err: f64 = 0.0;
    for i in 1..=n {
        let s = 2.0 + 198.0 * i as f64 / n as f64;
        let exact = -(s / 2.0) * (s / (2.0 * E)).ln();
        let v = legendre(g, s, None).map_err(|e| e.to_string())?;
        closed_err = closed_err.max((v - exact).abs() / exact.abs().max(1.0));
    }
    ensure(closed_err <= 1e-9, || format!("closed form error {closed_err:e}"))?;

    let f_strong = |l: f64| 0.5 * l * l * l.exp();
    let f_weak = |l: f64| 0.5 * l * l * (1.0 + l * l.exp() / 6.0);
    let mut cubic: f64 = f64::INFINITY;
    for i in 1..=n {
        let s = i as f64 / (n + 1) as f64;
        let rhs = -s * s / 4.0 + s * s * s / 8.0;
        for f in [&f_strong as &dyn Fn(f64) -> f64, &f_weak] {
            let v = legendre(|l| 2.0 * f(l), s, None).map_err(|e| e.to_string())?;
            cubic = cubic.min(rhs - v);
        }
    }
    ensure(cubic >= -1e-9, || format!("(2f)^ exceeds −s²/4 + s³/8 by {:e}", -cubic))?;
    Ok(format!("inequality slack ≥ {worst:.2e}, closed form error {closed_err:.2e}, cubic slack ≥ {cubic:.2e}"))
}

fn percolation() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig::from_json(
        r#"{"tasks": ["percolation-study"], "percolation": {"d": 2, "side": 64, "p": 0.6, "seed": 1}}"#,
    )
    .map_err(|e| e.to_string())?;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = run(&config, Path::new("."), a.path()).map_err(|e| e.to_string())?;
    run(&config, Path::new("."), b.path()).map_err(|e| e.to_string())?;
    for f in ["percolation_bounds.csv", "percolation_report.json", "summary.json"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    let csv = std::fs::read_to_string(a.path().join("percolation_bounds.csv")).unwrap();
    let mut applicable = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[8] == "true" {
            applicable += 1;
            let margin: f64 = cols[7].parse().unwrap();
            ensure(margin >= 0.0, || format!("negative margin: {line}"))?;
        }
    }
    ensure(applicable > 0, || "no applicable rows".into())?;
    ensure(csv.contains(",gaussian_restricted,"), || "no restricted-window rows".into())?;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("percolation_report.json")).unwrap()).unwrap();
    ensure(report["statement"] == FITTED_CONSTANTS_STATEMENT, || "statement missing".into())?;
    ensure(FITTED_CONSTANTS_STATEMENT.contains("not reproduced"), || "statement wording".into())?;
    ensure(sa.exit_code == 0, || format!("exit code {}", sa.exit_code))?;
    let fits = report["fits"].as_array().unwrap();
    ensure(
        fits.iter().all(|f| f["binding_time"].as_f64().is_some_and(|t| t > 0.0 && t.is_finite())),
        || "binding time not finite and positive".into(),
    )?;
    within_runtime(start, Duration::from_secs(600))?;
    Ok(format!(
        "cluster {} of {}, {applicable} applicable rows, worst margin {}, {:?}",
        report["cluster_size"],
        report["box_size"],
        report["worst_margin"],
        start.elapsed()
    ))
}

fn monte_carlo() -> Outcome {
    let times = [0.5, 1.0, 2.0];
    let mut worst_z: f64 = 0.0;
    for (name, g) in [("K2", complete_two()), ("torus-3", torus(3))] {
        let exact = full_kernel(&g, 0, &times, 1e-12).unwrap();
        let mc = monte_carlo_kernel(&g, 0, &times, 1_000_000, 2024, 4).map_err(|e| e.to_string())?;
        for i in 0..times.len() {
            for y in 0..g.len() {
                let z = (mc.values[i][y] - exact.value(i, y)).abs() / mc.std_err[i][y];
                worst_z = worst_z.max(z);
                ensure(z <= 4.0, || format!("{name}: t = {}, y = {y}, z = {z:.2}", times[i]))?;
            }
        }
    }
    Ok(format!("largest deviation {worst_z:.2} standard errors"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "K_λ root", k_lambda),
        (2, "kernel correctness", kernel_correctness),
        (3, "monotone exhaustion", monotone_exhaustion),
        (4, "long-range and weak Gaussian bounds", long_range_bounds),
        (5, "maximum principle", max_principle),
        (6, "tail, weighted-sum and j* lemmas", lemma_suite),
        (7, "Gaussian bound end to end", gaussian_end_to_end),
        (8, "scalar inequalities", scalar_suite),
        (9, "percolation study", percolation),
        (10, "Monte Carlo consistency", monte_carlo),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str()) || p == &n.to_string()) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({name}: {detail})"),
            Err(why) => {
                failures += 1;
                println!("criterion {n}: FAIL ({name}: {why})");
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
