use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{
    build_lattice_box, build_percolation_cluster, complete_two, cycle, io::load_graph, path, star, EdgeWeights,
    SpeedPreset, WeightedGraph,
};
use crate::heat::{SolverChoice, DEFAULT_TOL};
use crate::regularity::EnvelopeFunction;

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Needed by every task except `percolation-study`.
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    /// Defaults to the constant-speed walk for builders and to the file's
    /// own weights for graph files.
    #[serde(default)]
    pub speed: Option<SpeedPreset>,
    #[serde(default)]
    pub metric: MetricChoice,
    #[serde(default)]
    pub envelopes: Option<EnvelopeSpec>,
    #[serde(default)]
    pub ledger: LedgerInputs,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_sources")]
    pub sources: Vec<usize>,
    /// Defaults to every source paired with every vertex.
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default)]
    pub lemmas: LemmaSettings,
    #[serde(default)]
    pub percolation: Option<PercolationSettings>,
    /// Used when no output directory is given on the command line.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Kernel,
    VerifyLemmas,
    VerifyTheorems,
    PercolationStudy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    CompleteTwo,
    Path {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    Star {
        leaves: usize,
        #[serde(default = "one")]
        weight: f64,
    },
    Lattice {
        d: usize,
        side: usize,
        #[serde(default)]
        torus: bool,
        #[serde(default = "one")]
        weight: f64,
    },
    Percolation {
        d: usize,
        side: usize,
        p: f64,
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

impl GraphSpec {
    /// Builds the graph; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<WeightedGraph> {
        match self {
            GraphSpec::CompleteTwo => Ok(complete_two()),
            GraphSpec::Path { n } => path(*n),
            GraphSpec::Cycle { n } => cycle(*n),
            GraphSpec::Star { leaves, weight } => star(*leaves, *weight),
            GraphSpec::Lattice { d, side, torus, weight } => {
                build_lattice_box(*d, *side, *torus, EdgeWeights::Constant(*weight))
            }
            GraphSpec::Percolation { d, side, p, seed } => build_percolation_cluster(*d, *side, *p, *seed),
            GraphSpec::File { path } => load_graph(base.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    /// Edge lengths `min(1, √(θ_x/π_x), √(θ_y/π_y))`.
    #[default]
    Canonical,
    /// Hop distance; adapted only when `θ_x ≥ π_x`.
    Graph,
    /// Overrides in `l id1 id2 length` format.
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeSpec {
    /// Fit `c t^{d/2}` to each needed vertex's diagonal kernel.
    Fit(FitSettings),
    /// Explicit envelopes; an entry without `vertex` applies to every vertex
    /// not listed otherwise.
    Given(Vec<GivenEnvelope>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub exponent: f64,
    /// Defaults to `[α₀ t_min / 4, 2 t_max]`.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_fit_points")]
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GivenEnvelope {
    #[serde(default)]
    pub vertex: Option<usize>,
    #[serde(flatten)]
    pub envelope: EnvelopeFunction,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerInputs {
    #[serde(default = "two")]
    pub gamma: f64,
    /// Defaults to the smallest value the envelopes' certificates allow.
    #[serde(rename = "A", default)]
    pub a_const: Option<f64>,
    #[serde(default = "two")]
    pub lambda: f64,
    /// Defaults to `min θ`.
    #[serde(default)]
    pub c_theta: Option<f64>,
}

impl Default for LedgerInputs {
    fn default() -> Self {
        LedgerInputs { gamma: 2.0, a_const: None, lambda: 2.0, c_theta: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSettings {
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_distances")]
    pub distances: Vec<f64>,
    #[serde(default = "default_mp_grid")]
    pub max_principle_grid: usize,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        LemmaSettings {
            radii: default_radii(),
            distances: default_distances(),
            max_principle_grid: default_mp_grid(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolationSettings {
    #[serde(default = "default_perc_d")]
    pub d: usize,
    #[serde(default = "default_perc_side")]
    pub side: usize,
    #[serde(default = "default_perc_p")]
    pub p: f64,
    #[serde(default = "default_perc_seed")]
    pub seed: u64,
    #[serde(default = "default_perc_sources")]
    pub sources: usize,
    #[serde(default = "default_perc_targets")]
    pub targets_per_source: usize,
    /// `(T₁, T₂)`; the fitted envelopes are certified on this window only.
    #[serde(default = "default_perc_window")]
    pub fit_window: (f64, f64),
    #[serde(default = "default_fit_points")]
    pub fit_points: usize,
    #[serde(default = "default_perc_times")]
    pub times: Vec<f64>,
    #[serde(default = "two")]
    pub gamma: f64,
    #[serde(default = "two")]
    pub lambda: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for PercolationSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_sources() -> Vec<usize> {
    vec![0]
}
fn default_fit_points() -> usize {
    64
}
fn default_radii() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}
fn default_distances() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 4.0]
}
fn default_mp_grid() -> usize {
    32
}
fn default_perc_d() -> usize {
    2
}
fn default_perc_side() -> usize {
    64
}
fn default_perc_p() -> f64 {
    0.6
}
fn default_perc_seed() -> u64 {
    1
}
fn default_perc_sources() -> usize {
    6
}
fn default_perc_targets() -> usize {
    4
}
fn default_perc_window() -> (f64, f64) {
    (1e-4, 64.0)
}
fn default_perc_times() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0, 32.0]
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_times(name: &str, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(config_err(format!("{name} must not be empty")));
    }
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(config_err(format!("{name} must be positive and finite")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

fn check_window(name: &str, w: (f64, f64)) -> Result<()> {
    if !(w.0 > 0.0 && w.1 > w.0 && w.1.is_finite()) {
        return Err(config_err(format!("{name} ({}, {}) needs 0 < a < b", w.0, w.1)));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn needs_graph(&self) -> bool {
        self.tasks.iter().any(|t| *t != Task::PercolationStudy)
    }

    /// Schema checks that need no graph; run before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(config_err("task list is empty"));
        }
        let l = &self.ledger;
        if !(l.gamma > 1.0 && l.gamma.is_finite()) {
            return Err(config_err(format!("ledger.gamma must be > 1, got {}", l.gamma)));
        }
        if !(l.lambda > 1.0 && l.lambda.is_finite()) {
            return Err(config_err(format!("ledger.lambda must be > 1, got {}", l.lambda)));
        }
        if let Some(a) = l.a_const {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(config_err(format!("ledger.A must be ≥ 1, got {a}")));
            }
        }
        if let Some(c) = l.c_theta {
            if !(c > 0.0 && c.is_finite()) {
                return Err(config_err(format!("ledger.c_theta must be positive, got {c}")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(config_err(format!("tol must be in (0, 0.01), got {}", self.tol)));
        }
        if self.needs_graph() {
            if self.graph.is_none() {
                return Err(config_err("graph is required for kernel and verification tasks"));
            }
            check_times("times", &self.times)?;
            if self.sources.is_empty() {
                return Err(config_err("sources must not be empty"));
            }
        }
        let t_max = self.times.last().copied().unwrap_or(0.0);
        match &self.envelopes {
            Some(EnvelopeSpec::Fit(fit)) => {
                if !(fit.exponent >= 0.0 && fit.exponent.is_finite()) {
                    return Err(config_err(format!("fit exponent must be ≥ 0, got {}", fit.exponent)));
                }
                if fit.points < 2 {
                    return Err(config_err("fit needs at least two points"));
                }
                if let Some(w) = fit.window {
                    check_window("envelopes.fit.window", w)?;
                    if w.1 < t_max {
                        return Err(config_err(format!("envelope window ends at {} before the last time {t_max}", w.1)));
                    }
                }
            }
            Some(EnvelopeSpec::Given(list)) => {
                if list.is_empty() {
                    return Err(config_err("envelopes.given is empty"));
                }
                for g in list {
                    g.envelope.validate().map_err(|e| config_err(e.to_string()))?;
                    let w = g.envelope.domain;
                    check_window("envelope window", w)?;
                    if w.1 < t_max {
                        return Err(config_err(format!("envelope window ends at {} before the last time {t_max}", w.1)));
                    }
                }
                let defaults = list.iter().filter(|g| g.vertex.is_none()).count();
                if defaults > 1 {
                    return Err(config_err("at most one envelope may omit its vertex"));
                }
            }
            None => {}
        }
        let lm = &self.lemmas;
        if lm.radii.iter().chain(&lm.distances).any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(config_err("lemma radii and distances must be finite and ≥ 0"));
        }
        if lm.max_principle_grid < 2 {
            return Err(config_err("lemmas.max_principle_grid must be ≥ 2"));
        }
        if self.tasks.contains(&Task::PercolationStudy) || self.percolation.is_some() {
            self.percolation.clone().unwrap_or_default().validate()?;
        }
        Ok(())
    }

    /// Checks that need the built graph (vertex ids in range).
    pub fn validate_against(&self, g: &WeightedGraph) -> Result<()> {
        let n = g.len();
        if let Some(&x) = self.sources.iter().find(|&&x| x >= n) {
            return Err(config_err(format!("source {x} out of range (graph has {n} vertices)")));
        }
        if let Some(pairs) = &self.pairs {
            if let Some(&(x, y)) = pairs.iter().find(|(x, y)| *x >= n || *y >= n) {
                return Err(config_err(format!("pair ({x}, {y}) out of range (graph has {n} vertices)")));
            }
        }
        if let Some(EnvelopeSpec::Given(list)) = &self.envelopes {
            if let Some(v) = list.iter().filter_map(|g| g.vertex).find(|&v| v >= n) {
                return Err(config_err(format!("envelope vertex {v} out of range")));
            }
        }
        if let Some(SpeedPreset::Custom(w)) = &self.speed {
            if w.len() != n {
                return Err(config_err(format!("custom speed has {} entries for {n} vertices", w.len())));
            }
        }
        Ok(())
    }

    /// Builds the graph with the configured speed measure.
    pub fn build_graph(&self, base: &Path) -> Result<WeightedGraph> {
        let spec = self.graph.as_ref().ok_or_else(|| config_err("no graph configured"))?;
        let g = spec.build(base)?;
        let g = match (&self.speed, spec) {
            (Some(speed), _) => {
                if let SpeedPreset::Custom(w) = speed {
                    if w.len() != g.len() {
                        return Err(config_err(format!("custom speed has {} entries for {} vertices", w.len(), g.len())));
                    }
                }
                g.with_speed(speed.clone())?
            }
            (None, GraphSpec::File { .. }) => g,
            (None, _) => g.with_speed(SpeedPreset::Csrw)?,
        };
        self.validate_against(&g)?;
        Ok(g)
    }

    /// Explicit pairs, or every source against every vertex.
    pub fn resolved_pairs(&self, n: usize) -> Vec<(usize, usize)> {
        match &self.pairs {
            Some(p) => p.clone(),
            None => self.sources.iter().flat_map(|&x| (0..n).map(move |y| (x, y))).collect(),
        }
    }
}

impl PercolationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(config_err(format!("percolation.p must be in (0, 1), got {}", self.p)));
        }
        if self.d < 1 || self.side < 2 {
            return Err(config_err("percolation needs d ≥ 1 and side ≥ 2"));
        }
        if self.sources == 0 {
            return Err(config_err("percolation.sources must be ≥ 1"));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(config_err(format!("percolation.gamma must be > 1, got {}", self.gamma)));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(config_err(format!("percolation.lambda must be > 1, got {}", self.lambda)));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(config_err(format!("percolation.tol must be in (0, 0.01), got {}", self.tol)));
        }
        if self.fit_points < 2 {
            return Err(config_err("percolation.fit_points must be ≥ 2"));
        }
        check_window("percolation.fit_window", self.fit_window)?;
        check_times("percolation.times", &self.times)?;
        if self.times.iter().any(|&t| t > self.fit_window.1) {
            return Err(config_err("percolation.times must lie inside the fit window"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(
            r#"{"graph": {"builder": "complete_two"}, "tasks": ["verify-theorems"], "times": [1.0],
                "pairs": [[0, 1]]}"#,
        )
        .unwrap();
        assert_eq!(c.graph, Some(GraphSpec::CompleteTwo));
        assert_eq!(c.metric, MetricChoice::Canonical);
        assert_eq!(c.ledger.gamma, 2.0);
        assert_eq!(c.resolved_pairs(2), vec![(0, 1)]);
    }

    #[test]
    fn rejects_bad_gamma_and_unknown_fields() {
        let bad = r#"{"graph": {"builder": "complete_two"}, "tasks": ["kernel"], "times": [1.0], "ledger": {"gamma": 1.0}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(m)) if m.contains("gamma")));
        let bad = r#"{"graph": {"builder": "complete_two"}, "tasks": ["kernel"], "times": [1.0], "colour": 3}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))));
        let bad = r#"{"graph": {"builder": "path", "n": 3, "m": 2}, "tasks": ["kernel"], "times": [1.0]}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_inconsistent_windows_and_times() {
        let bad = r#"{"graph": {"builder": "complete_two"}, "tasks": ["kernel"], "times": [2.0, 1.0]}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let bad = r#"{"graph": {"builder": "complete_two"}, "tasks": ["verify-theorems"], "times": [1.0, 8.0],
            "envelopes": {"given": [{"form": "power", "params": {"c": 1.0, "d": 1.0}, "window": [0.001, 4.0]}]}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(m)) if m.contains("window")));
        let ok = r#"{"graph": {"builder": "complete_two"}, "tasks": ["verify-theorems"], "times": [1.0, 8.0],
            "envelopes": {"given": [{"vertex": 1, "form": "power", "params": {"c": 1.0, "d": 1.0}, "window": [0.001, 16.0]}]}}"#;
        let c = ExperimentConfig::from_json(ok).unwrap();
        let Some(EnvelopeSpec::Given(list)) = c.envelopes else { panic!() };
        assert_eq!(list[0].vertex, Some(1));
        assert_eq!(list[0].envelope.domain, (0.001, 16.0));
    }

    #[test]
    fn graph_spec_builds_with_speed() {
        let c = ExperimentConfig::from_json(
            r#"{"graph": {"builder": "lattice", "d": 2, "side": 3, "torus": true}, "speed": "vsrw",
                "tasks": ["kernel"], "times": [1.0], "sources": [8]}"#,
        )
        .unwrap();
        let g = c.build_graph(Path::new(".")).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.theta().iter().all(|&t| t == 1.0));
        let c = ExperimentConfig::from_json(
            r#"{"graph": {"builder": "path", "n": 3}, "tasks": ["kernel"], "times": [1.0], "sources": [3]}"#,
        )
        .unwrap();
        assert!(matches!(c.build_graph(Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn percolation_only_needs_no_graph() {
        let c = ExperimentConfig::from_json(r#"{"tasks": ["percolation-study"], "percolation": {"side": 16}}"#).unwrap();
        let p = c.percolation.unwrap();
        assert_eq!((p.side, p.p, p.seed, p.d), (16, 0.6, 1, 2));
        assert!(ExperimentConfig::from_json(r#"{"tasks": ["percolation-study"], "percolation": {"p": 1.0}}"#).is_err());
    }
}
