use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    davies_long_range_bound, gaussian_upper_bound, valid_time_window, weak_gaussian_bound, CertifiedEnvelope,
    ConstantsLedger,
};
use crate::error::{Error, Result};
use crate::heat::{full_kernel, HeatKernelSolution};
use crate::metric::AdaptedMetric;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// Kernel accuracy; applicable rows may undercut the exact value by at
    /// most `10·tol`.
    pub tol: f64,
    /// Bottom of the spectrum `Λ` (0 on finite graphs without killing).
    pub spectral_gap: f64,
    /// `(T₁, T₂)` when the envelopes are only regular on that window.
    pub restricted: Option<(f64, f64)>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { tol: 1e-10, spectral_gap: 0.0, restricted: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub pair_x: usize,
    pub pair_y: usize,
    pub t: f64,
    pub d_theta: f64,
    pub exact: f64,
    pub bound_name: &'static str,
    pub bound: f64,
    /// `bound − exact`
    pub margin: f64,
    pub applicable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub tol: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    /// Applicable rows whose margin is below `−10·tol`.
    pub fn violations(&self) -> Vec<&BoundRow> {
        self.rows
            .iter()
            .filter(|r| r.applicable && r.margin < -10.0 * self.tol)
            .collect()
    }

    pub fn applicable_count(&self, name: &str) -> usize {
        self.rows.iter().filter(|r| r.applicable && r.bound_name == name).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair_x,pair_y,t,d_theta,exact,bound_name,bound,margin,applicable\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
                r.pair_x, r.pair_y, r.t, r.d_theta, r.exact, r.bound_name, r.bound, r.margin, r.applicable
            )
            .unwrap();
        }
        out
    }

    /// Rows with enough context to replay a failure.
    pub fn counterexamples(&self) -> serde_json::Value {
        serde_json::to_value(self.violations()).unwrap()
    }
}

/// Evaluates every closed-form bound against exact kernels for each pair
/// and time. Kernels are solved once per source, sources in parallel.
///
/// `envelopes` maps a vertex to its certified on-diagonal envelope; the
/// Gaussian bound is only evaluated for pairs whose endpoints both have one.
pub fn check_theorem_bounds(
    metric: &AdaptedMetric<'_>,
    pairs: &[(usize, usize)],
    times: &[f64],
    ledger: &ConstantsLedger,
    envelopes: &BTreeMap<usize, CertifiedEnvelope>,
    options: BoundOptions,
) -> Result<BoundReport> {
    let g = metric.graph();
    if let Some(&(x, y)) = pairs.iter().find(|(x, y)| *x >= g.len() || *y >= g.len()) {
        return Err(Error::InvalidParameter(format!("pair ({x}, {y}) out of range")));
    }
    let sources: Vec<usize> = pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
    let kernels: BTreeMap<usize, HeatKernelSolution> = sources
        .par_iter()
        .map(|&x| full_kernel(g, x, times, options.tol).map(|k| (x, k)))
        .collect::<Result<_>>()?;
    let theta = g.theta();
    let mut rows = Vec::new();
    for &(x, y) in pairs {
        let d = metric.distance(x, y);
        let kernel = &kernels[&x];
        for (i, &t) in times.iter().enumerate() {
            let exact = kernel.value(i, y);
            let mut push = |name: &'static str, bound: f64, applicable: bool| {
                rows.push(BoundRow {
                    pair_x: x,
                    pair_y: y,
                    t,
                    d_theta: d,
                    exact,
                    bound_name: name,
                    bound,
                    margin: bound - exact,
                    applicable,
                });
            };
            if t > 0.0 {
                push("davies", davies_long_range_bound(theta[x], theta[y], d, t, options.spectral_gap), true);
                let weak = weak_gaussian_bound(theta[x], theta[y], d, t, options.spectral_gap);
                push("weak_gaussian", weak.value, weak.applicable);
            }
            if let (Some(f1), Some(f2)) = (envelopes.get(&x), envelopes.get(&y)) {
                if t <= 0.0 {
                    continue;
                }
                let b = gaussian_upper_bound(ledger, f1, f2, d, t)?;
                // envelopes only speak for their certified domain
                let arg = ledger.alpha0 * t / 2.0;
                let inside = [f1, f2]
                    .iter()
                    .all(|f| f.envelope.domain.0 <= arg && arg <= f.envelope.domain.1);
                match options.restricted {
                    None => push("gaussian", b.value, b.applicable && inside),
                    Some((t1, t2)) => {
                        let window = valid_time_window(ledger, t1, t2, d)?;
                        push("gaussian_restricted", b.value, window.contains(t) && inside);
                    }
                }
            }
        }
    }
    Ok(BoundReport { tol: options.tol, rows })
}
