use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::PercolationSettings;
use super::{certify_all, required_a_const};
use crate::bounds::{valid_time_window, ConstantsLedger, TimeWindow};
use crate::error::{Error, Result};
use crate::graph::build_percolation_cluster;
use crate::heat::full_kernel;
use crate::metric::AdaptedMetric;
use crate::regularity::{fit_on_diagonal_envelope, log_grid, EnvelopeFunction};
use crate::verify::{check_theorem_bounds, BoundOptions, BoundReport};

/// Printed with every study: what the margins do and do not establish.
pub const FITTED_CONSTANTS_STATEMENT: &str = "The on-diagonal constants are fitted: each envelope c·t^{d/2} is the \
largest power envelope lying under 1/p_t(x,x) on the fitting grid of this one cluster, and the binding time stands \
in for the random time after which the on-diagonal estimate holds. The random constants of the on-diagonal bound for \
percolation clusters are therefore not reproduced; nonnegative margins are a property check of the explicit Gaussian \
bound given these fitted envelopes.";

#[derive(Debug, Clone, Serialize)]
pub struct VertexFit {
    pub vertex: usize,
    pub coordinates: Option<Vec<i64>>,
    pub c: f64,
    pub exponent: f64,
    /// Grid time where the fitted envelope touches the kernel; stands in
    /// for the random time after which the on-diagonal bound holds.
    pub binding_time: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PercolationStudy {
    pub d: usize,
    pub side: usize,
    pub p: f64,
    pub seed: u64,
    pub cluster_size: usize,
    pub box_size: usize,
    pub sources: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub fit_window: (f64, f64),
    pub fits: Vec<VertexFit>,
    pub ledger: ConstantsLedger,
    /// Restricted window for `D = 0`; each row uses its own `D`.
    pub window: TimeWindow,
    pub applicable_rows: usize,
    pub violations: usize,
    pub worst_margin: Option<f64>,
    pub statement: &'static str,
    #[serde(skip)]
    pub report: BoundReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StudyOutcome {
    Completed(Box<PercolationStudy>),
    Skipped { notice: String },
}

/// Builds the cluster, fits power envelopes at sampled vertices, and
/// checks the Gaussian bound on the window where envelopes regular only
/// on `(T₁, T₂)` still give it, in the graph metric.
pub fn percolation_study(settings: &PercolationSettings) -> Result<StudyOutcome> {
    settings.validate()?;
    let s = settings;
    let g = match build_percolation_cluster(s.d, s.side, s.p, s.seed) {
        Ok(g) => g,
        Err(Error::DegenerateSample(why)) => {
            let notice = format!("percolation study skipped: degenerate cluster ({why})");
            log::warn!("{notice}");
            return Ok(StudyOutcome::Skipped { notice });
        }
        Err(e) => return Err(e),
    };
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(1);
    let mut sources: Vec<usize> = sample(&mut rng, n, s.sources.min(n)).into_vec();
    sources.sort_unstable();
    let mut pairs = Vec::new();
    for &x in &sources {
        pairs.push((x, x));
        let mut targets: Vec<usize> = sample(&mut rng, n, s.targets_per_source.min(n)).into_vec();
        targets.sort_unstable();
        pairs.extend(targets.into_iter().filter(|&y| y != x).map(|y| (x, y)));
    }
    let needed: Vec<usize> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect::<BTreeSet<_>>().into_iter().collect();

    let grid = log_grid(s.fit_window.0, s.fit_window.1, s.fit_points);
    let exponent = s.d as f64;
    let fitted: Vec<(usize, EnvelopeFunction, VertexFit)> = needed
        .par_iter()
        .map(|&x| {
            let k = full_kernel(&g, x, &grid, s.tol)?;
            let fit = fit_on_diagonal_envelope(&k, x, exponent, s.fit_window)?;
            let c = match fit.envelope.form {
                crate::regularity::EnvelopeForm::Power { c, .. } => c,
                _ => unreachable!("fits are powers"),
            };
            let summary = VertexFit {
                vertex: x,
                coordinates: g.labels().map(|l| l[x].clone()),
                c,
                exponent,
                binding_time: fit.binding_time,
                points: fit.points,
            };
            Ok((x, fit.envelope, summary))
        })
        .collect::<Result<_>>()?;

    let mut a_const: f64 = 1.0;
    for (_, f, _) in &fitted {
        a_const = a_const.max(required_a_const(f, s.gamma, s.fit_window)?);
    }
    let ledger = ConstantsLedger::build(s.gamma, a_const, g.theta_floor(), s.lambda)?;
    let envelopes = certify_all(fitted.iter().map(|(x, f, _)| (*x, f.clone())), &ledger, s.fit_window)?;
    let envelopes: BTreeMap<_, _> = envelopes
        .into_iter()
        .map(|(x, r)| r.map(|c| (x, c)))
        .collect::<Result<_>>()?;

    let metric = AdaptedMetric::graph_metric(&g);
    let options = BoundOptions { tol: s.tol, spectral_gap: 0.0, restricted: Some(s.fit_window) };
    let report = check_theorem_bounds(&metric, &pairs, &s.times, &ledger, &envelopes, options)?;
    let applicable: Vec<f64> = report.rows.iter().filter(|r| r.applicable).map(|r| r.margin).collect();
    Ok(StudyOutcome::Completed(Box::new(PercolationStudy {
        d: s.d,
        side: s.side,
        p: s.p,
        seed: s.seed,
        cluster_size: n,
        box_size: s.side.pow(s.d as u32),
        sources,
        pairs,
        fit_window: s.fit_window,
        fits: fitted.into_iter().map(|(_, _, v)| v).collect(),
        window: valid_time_window(&ledger, s.fit_window.0, s.fit_window.1, 0.0)?,
        ledger,
        applicable_rows: applicable.len(),
        violations: report.violations().len(),
        worst_margin: applicable.into_iter().reduce(f64::min),
        statement: FITTED_CONSTANTS_STATEMENT,
        report,
    })))
}
