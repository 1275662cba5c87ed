//! Numerical checks of the intermediate inequalities behind the Gaussian
//! bound, evaluated on exact kernels.

mod lemmas;
mod report;

pub use lemmas::{check_max_principle, check_tail_lemmas, check_weighted_sum_lemma, sequences, TailSequences};
pub use report::{check_theorem_bounds, BoundOptions, BoundReport, BoundRow};

use std::f64::consts::E;

use serde::Serialize;
use serde_json::Value;

use crate::bounds::ConstantsLedger;
use crate::error::{Error, Result};
use crate::heat::HeatKernelSolution;
use crate::metric::AdaptedMetric;

/// Space-time weight `ξ_R(x, t) = −(δ d_R(x)² + ε)/(s − t)` with
/// `d_R(x) = (R − d_θ(x₀, x))₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalFrame {
    pub x0: usize,
    pub r: f64,
    pub t: f64,
    pub s: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl FunctionalFrame {
    pub fn new(ledger: &ConstantsLedger, x0: usize, r: f64, t: f64, s: f64) -> Result<Self> {
        if !(t > 0.0 && s > t && r >= 0.0) {
            return Err(Error::InvalidParameter(format!("need s > t > 0 and R ≥ 0, got s = {s}, t = {t}, R = {r}")));
        }
        Ok(FunctionalFrame { x0, r, t, s, delta: ledger.delta, epsilon: ledger.epsilon })
    }

    pub fn at_time(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && self.s > t) {
            return Err(Error::InvalidParameter(format!("need s > t > 0, got s = {}, t = {t}", self.s)));
        }
        Ok(FunctionalFrame { t, ..*self })
    }

    /// `ξ_R` at a vertex at distance `dist` from `x₀`.
    pub fn xi(&self, dist: f64) -> f64 {
        let dr = (self.r - dist).max(0.0);
        -(self.delta * dr * dr + self.epsilon) / (self.s - self.t)
    }

    /// `6γe²(s − t) − R − ½`; the monotonicity of `J` is asserted when this is ≥ 0.
    pub fn max_principle_margin(&self, gamma: f64) -> f64 {
        6.0 * gamma * E * E * (self.s - self.t) - self.r - 0.5
    }
}

fn index_of(kernel: &HeatKernelSolution, t: f64) -> Result<usize> {
    kernel
        .time_index(t)
        .ok_or_else(|| Error::InvalidParameter(format!("time {t} is not on the kernel grid")))
}

/// `J_R(t) = Σ_{x ∈ subset} u(x, t)² e^{ξ_R(x, t)} θ_x`.
pub fn functional_j(metric: &AdaptedMetric<'_>, kernel: &HeatKernelSolution, frame: &FunctionalFrame) -> Result<f64> {
    let i = index_of(kernel, frame.t)?;
    let dist = metric.distances_from(frame.x0);
    let theta = metric.graph().theta();
    Ok(kernel
        .subset
        .iter()
        .map(|&x| {
            let u = kernel.values[i][x];
            u * u * frame.xi(dist[x]).exp() * theta[x]
        })
        .sum())
}

/// `I_R(t) = Σ_{d_θ(x₀, x) > R} u(x, t)² θ_x`.
pub fn functional_i(metric: &AdaptedMetric<'_>, kernel: &HeatKernelSolution, r: f64, t: f64) -> Result<f64> {
    let i = index_of(kernel, t)?;
    let dist = metric.distances_from(kernel.source);
    let theta = metric.graph().theta();
    Ok(kernel
        .subset
        .iter()
        .filter(|&&x| dist[x] > r)
        .map(|&x| kernel.values[i][x].powi(2) * theta[x])
        .sum())
}

/// `E_{κ,D,H}(x₀, t) = Σ_{x ∈ H} u(x, t)² exp(κ (d_θ(x₀, x) ∧ D)²/t) θ_x`;
/// `H` defaults to the kernel's subset.
pub fn functional_e(
    metric: &AdaptedMetric<'_>,
    kernel: &HeatKernelSolution,
    kappa: f64,
    d: f64,
    t: f64,
    h: Option<&[usize]>,
) -> Result<f64> {
    if !(kappa >= 0.0 && d >= 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter(format!("need κ ≥ 0, D ≥ 0, t > 0, got {kappa}, {d}, {t}")));
    }
    let i = index_of(kernel, t)?;
    let dist = metric.distances_from(kernel.source);
    let theta = metric.graph().theta();
    let h = h.unwrap_or(&kernel.subset);
    Ok(h.iter()
        .map(|&x| {
            let rho = dist[x].min(d);
            kernel.values[i][x].powi(2) * (kappa * rho * rho / t).exp() * theta[x]
        })
        .sum())
}

/// The test function `ψ_λ = λ (D ∧ d_θ(·, x₁))` and its exponential energy
/// `b(ψ, x) = (2θ_x)⁻¹ Σ_y π_xy (e^{ψ(y)−ψ(x)} + e^{ψ(x)−ψ(y)} − 2)`.
#[derive(Debug, Clone, Serialize)]
pub struct DaviesQuantities {
    pub lambda: f64,
    pub psi: Vec<f64>,
    pub b: Vec<f64>,
    pub sup_b: f64,
    /// `c(ψ) = sup b − Λ`
    pub c: f64,
    /// `½λ²e^λ`, the uniform estimate for `b`.
    pub estimate: f64,
    pub holds: bool,
}

pub fn davies_test_quantities(
    metric: &AdaptedMetric<'_>,
    x1: usize,
    x2: usize,
    lambda: f64,
    spectral_gap: f64,
) -> Result<DaviesQuantities> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be nonnegative, got {lambda}")));
    }
    let g = metric.graph();
    let dist = metric.distances_from(x1);
    let d = dist[x2];
    let psi: Vec<f64> = dist.iter().map(|&r| lambda * r.min(d)).collect();
    let b: Vec<f64> = (0..g.len())
        .map(|x| {
            let s: f64 = g
                .neighbors(x)
                .map(|(y, w)| {
                    // 2cosh(a) − 2 = 4sinh²(a/2), exact near 0
                    let h = ((psi[y] - psi[x]) / 2.0).sinh();
                    w * 4.0 * h * h
                })
                .sum();
            s / (2.0 * g.theta()[x])
        })
        .collect();
    let sup_b = b.iter().copied().fold(0.0, f64::max);
    let estimate = 0.5 * lambda * lambda * lambda.exp();
    Ok(DaviesQuantities {
        lambda,
        holds: sup_b <= estimate * (1.0 + 1e-12),
        psi,
        b,
        sup_b,
        c: sup_b - spectral_gap,
        estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// One inequality `lhs ≤ rhs` checked numerically.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub hypotheses: Value,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl LemmaCheck {
    pub fn inequality(lemma: &str, hypotheses: Value, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        LemmaCheck {
            lemma: lemma.to_string(),
            hypotheses,
            lhs,
            rhs,
            slack,
            tolerance,
            verdict: if slack >= -tolerance { Verdict::Pass } else { Verdict::Fail },
            note: None,
            details: Value::Null,
        }
    }

    pub fn not_applicable(lemma: &str, hypotheses: Value, reason: impl Into<String>) -> Self {
        LemmaCheck {
            lemma: lemma.to_string(),
            hypotheses,
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            tolerance: 0.0,
            verdict: Verdict::NotApplicable,
            note: Some(reason.into()),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}
