//! Heat kernels `p_t(x0, y) = P^{x0}(X_t = y) / θ_y`, killed kernels on
//! vertex subsets, exhaustion by growing balls, Monte Carlo estimates and the
//! bottom of the spectrum.

mod monte_carlo;
mod operator;
mod spectral;
mod uniformization;

pub use monte_carlo::{monte_carlo_kernel, MonteCarloEstimate};
pub use spectral::DENSE_LIMIT;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::AdaptedMetric;
use operator::RestrictedOperator;
use spectral::DenseSpectrum;

/// Default absolute accuracy of kernel values.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Upper limit on uniformization terms per solve.
const MAX_TERMS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Exact exponential through a dense eigendecomposition of the
    /// symmetrised generator; stiff-safe, limited to small subsets.
    Integrator,
    Uniformization,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Integrator => "integrator",
            Method::Uniformization => "uniformization",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

/// How to pick the transient solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Uniformization, unless the rates are so uneven (or `Λ t` so large)
    /// that the dense route is cheaper and the subset is small enough.
    #[default]
    Auto,
    Uniformization,
    Integrator,
}

/// Kernel values `p_t(source, y)` on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct HeatKernelSolution {
    pub source: usize,
    pub times: Vec<f64>,
    /// `values[i][y]` for time `times[i]`; zero outside the subset.
    pub values: Vec<Vec<f64>>,
    /// Sorted subset the walk is killed outside of.
    pub subset: Vec<usize>,
    pub method: Method,
    /// `Σ_y p_t(source, y) θ_y` per time.
    pub mass: Vec<f64>,
    pub tol: f64,
    /// Error bound (uniformization) or estimate (dense) actually achieved.
    pub error_estimate: f64,
}

impl HeatKernelSolution {
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn value(&self, i: usize, y: usize) -> f64 {
        self.values[i][y]
    }

    /// Index of the grid time equal to `t` up to relative 1e-12.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1e-300))
    }

    /// CSV rows `t,vertex,value,mass,method,tol`, floats with 17 significant digits.
    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("t,vertex,value,mass,method,tol\n");
        }
        for (i, t) in self.times.iter().enumerate() {
            for &y in &self.subset {
                writeln!(
                    out,
                    "{:.16e},{},{:.16e},{:.16e},{},{:.16e}",
                    t,
                    y,
                    self.values[i][y],
                    self.mass[i],
                    self.method.name(),
                    self.tol
                )
                .unwrap();
            }
        }
        out
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be strictly ascending".into()));
    }
    Ok(())
}

fn choose(op: &RestrictedOperator, t_max: f64, choice: SolverChoice) -> Method {
    match choice {
        SolverChoice::Uniformization => Method::Uniformization,
        SolverChoice::Integrator => Method::Integrator,
        SolverChoice::Auto => {
            let max = op.max_rate();
            let min = op.rate.iter().copied().fold(f64::INFINITY, f64::min);
            let stiff = max / min > 1e4 || max * t_max > 1e6;
            if stiff && op.len() <= DENSE_LIMIT {
                Method::Integrator
            } else {
                Method::Uniformization
            }
        }
    }
}

/// Killed kernel on `subset` from `x0`, solver picked automatically.
pub fn killed_kernel(g: &WeightedGraph, subset: &[usize], x0: usize, times: &[f64], tol: f64) -> Result<HeatKernelSolution> {
    killed_kernel_with(g, subset, x0, times, tol, SolverChoice::Auto)
}

/// Kernel of the walk on the whole graph.
pub fn full_kernel(g: &WeightedGraph, x0: usize, times: &[f64], tol: f64) -> Result<HeatKernelSolution> {
    let all: Vec<usize> = (0..g.len()).collect();
    killed_kernel(g, &all, x0, times, tol)
}

/// Solves `∂_t u = L_θ u` on `subset`, `u = 0` outside, `u(0) = 1_{x0}/θ_{x0}`.
pub fn killed_kernel_with(
    g: &WeightedGraph,
    subset: &[usize],
    x0: usize,
    times: &[f64],
    tol: f64,
    choice: SolverChoice,
) -> Result<HeatKernelSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    validate_times(times)?;
    let op = RestrictedOperator::new(g, subset)?;
    let x0_local = match op.local.get(x0) {
        Some(&i) if i != usize::MAX => i,
        _ => return Err(Error::InvalidParameter(format!("source {x0} is not in the subset"))),
    };
    let method = choose(&op, *times.last().unwrap(), choice);
    let n = op.len();
    let mut local_rows: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    let error_estimate = match method {
        Method::Uniformization => {
            let lambda = op.max_rate();
            let t_max = *times.last().unwrap();
            if lambda * t_max > MAX_TERMS as f64 {
                return Err(Error::IntegrationFailure { achieved: 1.0 / op.theta[x0_local], requested: tol });
            }
            let steps = times.iter().filter(|&&t| t > 0.0).count().max(1);
            let per_step = tol / steps as f64;
            let mut u = vec![0.0; n];
            u[x0_local] = 1.0 / op.theta[x0_local];
            let mut prev = 0.0;
            let mut err = 0.0;
            for &t in times {
                err += uniformization::advance(&op, &mut u, t - prev, per_step, MAX_TERMS);
                prev = t;
                local_rows.push(u.clone());
            }
            if err > tol {
                return Err(Error::IntegrationFailure { achieved: err, requested: tol });
            }
            err
        }
        Method::Integrator => {
            if n > DENSE_LIMIT {
                return Err(Error::InvalidParameter(format!(
                    "dense integrator limited to {DENSE_LIMIT} vertices, subset has {n}"
                )));
            }
            let spec = DenseSpectrum::new(&op);
            for &t in times {
                local_rows.push(spec.kernel_row(&op, x0_local, t));
            }
            // |Σ_k e^{−λt} V_yk V_x0k| ≤ 1, so rounding in the sum is
            // relative to (θ_x0 θ_y)^{-1/2}
            let theta_min = op.theta.iter().copied().fold(f64::INFINITY, f64::min);
            let est = 64.0 * n as f64 * f64::EPSILON / (op.theta[x0_local] * theta_min).sqrt();
            if est > tol {
                return Err(Error::IntegrationFailure { achieved: est, requested: tol });
            }
            est
        }
        Method::MonteCarlo => unreachable!("not a deterministic solver"),
    };
    let mut values = Vec::with_capacity(times.len());
    let mut mass = Vec::with_capacity(times.len());
    for row in local_rows {
        let mut full = vec![0.0; g.len()];
        let mut m = 0.0;
        for (i, &v) in op.vertices.iter().enumerate() {
            full[v] = row[i];
            m += row[i] * op.theta[i];
        }
        values.push(full);
        mass.push(m);
    }
    Ok(HeatKernelSolution {
        source: x0,
        times: times.to_vec(),
        values,
        subset: op.vertices.clone(),
        method,
        mass,
        tol,
        error_estimate,
    })
}

/// Which balls the exhaustion grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BallMetric {
    #[default]
    Adapted,
    Graph,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionDiagnostics {
    pub radii: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Killed kernels per level, same time grid as the top-level solution.
    pub levels: Vec<HeatKernelSolution>,
    /// `max_{t,y} |p^{(n+1)} − p^{(n)}|` for consecutive levels.
    pub deltas: Vec<f64>,
    /// Largest decrease from one level to the next (0 when monotone).
    pub worst_decrease: f64,
}

impl ExhaustionDiagnostics {
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(0.0)
    }
}

/// Killed kernels on balls of geometric radii around `x0`.
///
/// Radii are `R·2^{i−levels}` for `i = 1..=levels`, with `R` the largest
/// distance from `x0`, so the top level is the whole graph and its solution
/// is the full kernel.
pub fn exhaustion_kernel(
    metric: &AdaptedMetric<'_>,
    x0: usize,
    times: &[f64],
    tol: f64,
    levels: usize,
    balls: BallMetric,
) -> Result<(HeatKernelSolution, ExhaustionDiagnostics)> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 levels, got {levels}")));
    }
    let g = metric.graph();
    let dist: Vec<f64> = match balls {
        BallMetric::Adapted => metric.distances_from(x0).to_vec(),
        BallMetric::Graph => g.hop_distances(x0).iter().map(|&d| d as f64).collect(),
    };
    let reach = dist.iter().copied().fold(0.0, f64::max);
    let radii: Vec<f64> = (1..=levels)
        .map(|i| reach * 2f64.powi(i as i32 - levels as i32))
        .collect();
    exhaustion_with_radii(g, &dist, x0, times, tol, &radii)
}

pub(crate) fn exhaustion_with_radii(
    g: &WeightedGraph,
    dist: &[f64],
    x0: usize,
    times: &[f64],
    tol: f64,
    radii: &[f64],
) -> Result<(HeatKernelSolution, ExhaustionDiagnostics)> {
    let mut level_solutions = Vec::with_capacity(radii.len());
    let mut sizes = Vec::with_capacity(radii.len());
    for &r in radii {
        let subset: Vec<usize> = (0..g.len()).filter(|&y| dist[y] <= r).collect();
        sizes.push(subset.len());
        level_solutions.push(killed_kernel(g, &subset, x0, times, tol)?);
    }
    let mut deltas = Vec::new();
    let mut worst_decrease: f64 = 0.0;
    for pair in level_solutions.windows(2) {
        let mut delta: f64 = 0.0;
        for (lo, hi) in pair[0].values.iter().zip(&pair[1].values) {
            for (a, b) in lo.iter().zip(hi) {
                delta = delta.max((b - a).abs());
                worst_decrease = worst_decrease.max(a - b);
            }
        }
        deltas.push(delta);
    }
    if worst_decrease > 10.0 * tol {
        return Err(Error::InternalConsistency(format!(
            "killed kernels decrease by {worst_decrease:e} between exhaustion levels"
        )));
    }
    let top = level_solutions.last().unwrap().clone();
    Ok((
        top,
        ExhaustionDiagnostics {
            radii: radii.to_vec(),
            sizes,
            levels: level_solutions,
            deltas,
            worst_decrease,
        },
    ))
}

/// Bottom of the spectrum of `−L_θ` on `ℓ²(θ)`, with Dirichlet conditions
/// outside `subset` when one is given.
///
/// Without killing the answer is exactly 0 (constants are harmonic).
pub fn spectral_bottom(g: &WeightedGraph, subset: Option<&[usize]>) -> Result<f64> {
    let Some(subset) = subset else {
        return Ok(0.0);
    };
    let op = RestrictedOperator::new(g, subset)?;
    if op.full {
        return Ok(0.0);
    }
    if op.len() <= 400 {
        return Ok(DenseSpectrum::new(&op).sorted_values()[0].max(0.0));
    }
    spectral::lanczos_smallest(&op, 1e-10, 300, 20)
}

/// Full sorted spectrum of `−L_θ` (dense; diagnostics on small graphs).
pub fn spectrum(g: &WeightedGraph, subset: Option<&[usize]>) -> Result<Vec<f64>> {
    let all: Vec<usize>;
    let subset = match subset {
        Some(s) => s,
        None => {
            all = (0..g.len()).collect();
            &all
        }
    };
    let op = RestrictedOperator::new(g, subset)?;
    if op.len() > DENSE_LIMIT {
        return Err(Error::InvalidParameter(format!("dense spectrum limited to {DENSE_LIMIT} vertices")));
    }
    Ok(DenseSpectrum::new(&op).sorted_values())
}

/// Lanczos estimate regardless of size; exposed so the dense route can be
/// cross-checked.
pub fn spectral_bottom_lanczos(g: &WeightedGraph, subset: &[usize]) -> Result<f64> {
    let op = RestrictedOperator::new(g, subset)?;
    spectral::lanczos_smallest(&op, 1e-10, 300, 20)
}
