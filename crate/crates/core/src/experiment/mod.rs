//! Configuration-driven experiments and their report files.
//!
//! [`run`] executes the tasks of an [`ExperimentConfig`] in order and
//! writes every report into one directory. Outputs depend only on the
//! configuration: kernels are computed in parallel but collected in a fixed
//! order, and no timing or host information is written.

mod config;
mod json;
mod percolation;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::E;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{
    EnvelopeSpec, ExperimentConfig, FitSettings, GivenEnvelope, GraphSpec, LedgerInputs, LemmaSettings, MetricChoice,
    PercolationSettings, Task,
};
pub use json::to_json_string;
pub use percolation::{percolation_study, PercolationStudy, StudyOutcome, VertexFit, FITTED_CONSTANTS_STATEMENT};

use crate::bounds::{CertifiedEnvelope, ConstantsLedger};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::heat::{full_kernel, killed_kernel_with};
use crate::metric::AdaptedMetric;
use crate::regularity::{check_growth, check_regular, fit_on_diagonal_envelope, log_grid, EnvelopeFunction, DEFAULT_GRID};
use crate::verify::{
    check_max_principle, check_tail_lemmas, check_theorem_bounds, check_weighted_sum_lemma, BoundOptions, LemmaCheck,
    Verdict,
};

/// Smallest `A ≥ 1` for which `f` passes both certificates on its domain at `γ`.
pub fn required_a_const(f: &EnvelopeFunction, gamma: f64, window: (f64, f64)) -> Result<f64> {
    let r = check_regular(f, 1.0, gamma, window, DEFAULT_GRID)?;
    let g = check_growth(f, 1.0, &log_grid(window.0, window.1, DEFAULT_GRID))?;
    let growth = g.analytic_sup.map_or(g.worst_value, |s| s.1);
    Ok(1f64.max(r.witness.value).max(growth))
}

/// Certifies each envelope on its window against the ledger's `(A, γ)`.
/// Hypothesis violations are returned per vertex; other errors abort.
type Certified = (usize, Result<CertifiedEnvelope>);

pub(crate) fn certify_all(
    items: impl Iterator<Item = (usize, EnvelopeFunction)>,
    ledger: &ConstantsLedger,
    window: (f64, f64),
) -> Result<Vec<Certified>> {
    let mut out = Vec::new();
    for (x, f) in items {
        match CertifiedEnvelope::certify(f, ledger.a_const, ledger.gamma, window, DEFAULT_GRID) {
            Err(e @ Error::HypothesisViolation(_)) => out.push((x, Err(e))),
            Err(e) => return Err(e),
            Ok(c) => out.push((x, Ok(c))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Tally {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub not_applicable: usize,
}

impl Tally {
    fn record(&mut self, v: Verdict) {
        self.checks += 1;
        match v {
            Verdict::Pass => self.passed += 1,
            Verdict::Fail => self.failed += 1,
            Verdict::NotApplicable => self.not_applicable += 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// 0 iff every applicable check passed.
    pub exit_code: i32,
    pub tally: Tally,
    /// Per task, in execution order.
    pub tasks: Vec<(String, Tally)>,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
    pub notices: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json_string(value)?)
    }
}

fn task_name(t: Task) -> &'static str {
    match t {
        Task::Kernel => "kernel",
        Task::VerifyLemmas => "verify-lemmas",
        Task::VerifyTheorems => "verify-theorems",
        Task::PercolationStudy => "percolation-study",
    }
}

fn build_metric<'g>(config: &ExperimentConfig, g: &'g WeightedGraph, base: &Path) -> Result<AdaptedMetric<'g>> {
    Ok(match &config.metric {
        MetricChoice::Canonical => AdaptedMetric::canonical(g),
        MetricChoice::Graph => AdaptedMetric::graph_metric(g),
        MetricChoice::File(p) => AdaptedMetric::load(g, base.join(p))?,
    })
}

/// Envelopes for `vertices`: fitted to the diagonal kernel, or taken from
/// the configuration.
fn collect_envelopes(
    config: &ExperimentConfig,
    g: &WeightedGraph,
    vertices: &BTreeSet<usize>,
    alpha0: f64,
) -> Result<Vec<(usize, EnvelopeFunction)>> {
    match &config.envelopes {
        None => Ok(Vec::new()),
        Some(EnvelopeSpec::Given(list)) => {
            let fallback = list.iter().find(|e| e.vertex.is_none());
            Ok(vertices
                .iter()
                .filter_map(|&x| {
                    list.iter()
                        .find(|e| e.vertex == Some(x))
                        .or(fallback)
                        .map(|e| (x, e.envelope.clone()))
                })
                .collect())
        }
        Some(EnvelopeSpec::Fit(fit)) => {
            let t_min = config.times[0];
            let t_max = *config.times.last().unwrap();
            let window = fit.window.unwrap_or((alpha0 * t_min / 4.0, 2.0 * t_max));
            let grid = log_grid(window.0, window.1, fit.points);
            let list: Vec<usize> = vertices.iter().copied().collect();
            list.par_iter()
                .map(|&x| {
                    let k = full_kernel(g, x, &grid, config.tol)?;
                    Ok((x, fit_on_diagonal_envelope(&k, x, fit.exponent, window)?.envelope))
                })
                .collect()
        }
    }
}

fn lemma_checks(
    config: &ExperimentConfig,
    metric: &AdaptedMetric<'_>,
    ledger: &ConstantsLedger,
    envelopes: &BTreeMap<usize, CertifiedEnvelope>,
) -> Result<Vec<LemmaCheck>> {
    enum Job {
        MaxPrinciple(usize, f64, f64),
        Tail(usize, f64, f64),
        Weighted(usize, f64, f64),
    }
    let lm = &config.lemmas;
    let mut jobs = Vec::new();
    for &x in &config.sources {
        for &r in &lm.radii {
            for &t in &config.times {
                jobs.push(Job::MaxPrinciple(x, r, t));
            }
        }
        for &r in &lm.radii {
            for &t in &config.times {
                jobs.push(Job::Tail(x, r, t));
            }
        }
        for &d in &lm.distances {
            for &t in &config.times {
                jobs.push(Job::Weighted(x, d, t));
            }
        }
    }
    let c = 6.0 * ledger.gamma * E * E;
    let no_envelope = |lemma: &str, x: usize| {
        LemmaCheck::not_applicable(lemma, json!({"x0": x}), "no certified envelope at this vertex")
    };
    let out: Vec<Vec<LemmaCheck>> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::MaxPrinciple(x, r, t0) => {
                let ball = metric.ball(x, 2.0 * r + 2.0);
                let s = t0 + (r + 1.0) / c;
                let check = check_max_principle(
                    metric,
                    &ball.members,
                    x,
                    r,
                    (t0 / 2.0, t0),
                    s,
                    ledger,
                    lm.max_principle_grid,
                    config.tol,
                )?;
                Ok(vec![check])
            }
            Job::Tail(x, r, t0) => match envelopes.get(&x) {
                Some(f) => check_tail_lemmas(metric, x, r, t0, ledger, &f.envelope, config.tol),
                None => Ok(vec![no_envelope("tail_estimate", x)]),
            },
            Job::Weighted(x, d, t) => match envelopes.get(&x) {
                Some(f) => Ok(vec![check_weighted_sum_lemma(metric, x, d, t, ledger, &f.envelope, config.tol)?]),
                None => Ok(vec![no_envelope("weighted_sum", x)]),
            },
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

/// Runs every task and writes the reports into `out`.
///
/// Relative paths inside the configuration resolve against `base`. Failed
/// checks do not abort the run; they set a nonzero exit code. Errors are
/// returned for invalid input and numerical failures.
pub fn run(config: &ExperimentConfig, base: &Path, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    let graph = match &config.graph {
        Some(_) if config.tasks.iter().any(|t| *t != Task::PercolationStudy) => Some(config.build_graph(base)?),
        _ => None,
    };
    fs::create_dir_all(out)?;
    let mut w = Writer { dir: out, files: Vec::new() };
    let mut total = Tally::default();
    let mut per_task = Vec::new();
    let mut notices = Vec::new();

    let mut prepared = None;
    if let Some(g) = &graph {
        let metric = build_metric(config, g, base)?;
        let li = &config.ledger;
        let c_theta = li.c_theta.unwrap_or_else(|| g.theta_floor());
        // α₀ does not depend on A, so a provisional ledger fixes the fit window
        let provisional = ConstantsLedger::build(li.gamma, li.a_const.unwrap_or(1.0), c_theta, li.lambda)?;
        let mut vertices: BTreeSet<usize> = config.sources.iter().copied().collect();
        if config.tasks.contains(&Task::VerifyTheorems) {
            vertices.extend(config.resolved_pairs(g.len()).iter().flat_map(|&(x, y)| [x, y]));
        }
        let raw = collect_envelopes(config, g, &vertices, provisional.alpha0)?;
        let a_const = match li.a_const {
            Some(a) => a,
            None => {
                let mut a: f64 = 1.0;
                for (_, f) in &raw {
                    a = a.max(required_a_const(f, li.gamma, f.domain)?);
                }
                a
            }
        };
        let ledger = ConstantsLedger::build(li.gamma, a_const, c_theta, li.lambda)?;
        w.write("ledger.json", &to_json_string(&ledger.to_json())?)?;

        let mut certs = Vec::new();
        let mut envelopes = BTreeMap::new();
        let mut cert_tally = Tally::default();
        for (x, f) in raw {
            let window = f.domain;
            let result = certify_all(std::iter::once((x, f.clone())), &ledger, window)?.pop().unwrap().1;
            match result {
                Ok(c) => {
                    cert_tally.record(Verdict::Pass);
                    certs.push(json!({"vertex": x, "passed": true, "certificate": c}));
                    envelopes.insert(x, c);
                }
                Err(e) => {
                    cert_tally.record(Verdict::Fail);
                    certs.push(json!({"vertex": x, "passed": false, "envelope": f, "error": e.to_string()}));
                }
            }
        }
        if !certs.is_empty() {
            w.json("certificates.json", &certs)?;
            per_task.push(("certificates".to_string(), cert_tally));
        }
        prepared = Some((metric, ledger, envelopes));
    }

    for &task in &config.tasks {
        let mut tally = Tally::default();
        match task {
            Task::Kernel => {
                let g = graph.as_ref().expect("validated");
                let all: Vec<usize> = (0..g.len()).collect();
                let kernels: Vec<_> = config
                    .sources
                    .par_iter()
                    .map(|&x| killed_kernel_with(g, &all, x, &config.times, config.tol, config.solver))
                    .collect::<Result<_>>()?;
                for k in kernels {
                    w.write(&format!("kernels/kernel_{}.csv", k.source), &k.to_csv(true))?;
                }
            }
            Task::VerifyLemmas => {
                let (metric, ledger, envelopes) = prepared.as_ref().expect("validated");
                let checks = lemma_checks(config, metric, ledger, envelopes)?;
                for c in &checks {
                    tally.record(c.verdict);
                }
                w.json("lemma_checks.json", &checks)?;
            }
            Task::VerifyTheorems => {
                let (metric, ledger, envelopes) = prepared.as_ref().expect("validated");
                let pairs = config.resolved_pairs(metric.graph().len());
                let options = BoundOptions { tol: config.tol, spectral_gap: 0.0, restricted: None };
                let report = check_theorem_bounds(metric, &pairs, &config.times, ledger, envelopes, options)?;
                let violations = report.violations();
                for r in &report.rows {
                    tally.record(match (r.applicable, r.margin >= -10.0 * report.tol) {
                        (false, _) => Verdict::NotApplicable,
                        (true, true) => Verdict::Pass,
                        (true, false) => Verdict::Fail,
                    });
                }
                w.write("bounds.csv", &report.to_csv())?;
                if !violations.is_empty() {
                    w.json("counterexamples.json", &report.counterexamples())?;
                }
            }
            Task::PercolationStudy => {
                let settings = config.percolation.clone().unwrap_or_default();
                match percolation_study(&settings)? {
                    StudyOutcome::Skipped { notice } => {
                        notices.push(notice.clone());
                        w.json("percolation_report.json", &json!({"status": "skipped", "notice": notice}))?;
                    }
                    StudyOutcome::Completed(study) => {
                        for r in &study.report.rows {
                            tally.record(match (r.applicable, r.margin >= -10.0 * study.report.tol) {
                                (false, _) => Verdict::NotApplicable,
                                (true, true) => Verdict::Pass,
                                (true, false) => Verdict::Fail,
                            });
                        }
                        notices.push(FITTED_CONSTANTS_STATEMENT.to_string());
                        w.write("percolation_bounds.csv", &study.report.to_csv())?;
                        let mut report = serde_json::to_value(&*study)?;
                        report["status"] = json!("completed");
                        report["ledger"] = study.ledger.to_json();
                        w.json("percolation_report.json", &report)?;
                    }
                }
            }
        }
        total.checks += tally.checks;
        total.passed += tally.passed;
        total.failed += tally.failed;
        total.not_applicable += tally.not_applicable;
        per_task.push((task_name(task).to_string(), tally));
    }
    if let Some((_, cert)) = per_task.iter().find(|(n, _)| n == "certificates") {
        total.checks += cert.checks;
        total.passed += cert.passed;
        total.failed += cert.failed;
    }

    let exit_code = if total.failed == 0 { 0 } else { 1 };
    w.files.push("summary.json".to_string());
    let summary = RunSummary { exit_code, tally: total, tasks: per_task, files: w.files.clone(), notices };
    w.json("summary.json", &summary)?;
    w.files.pop();
    Ok(summary)
}
