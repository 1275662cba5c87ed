//! On-diagonal envelope functions `f` (heat kernel hypotheses of the form
//! `p_t(x, x) ≤ 1/f(t)`), their `(A, γ)`-regularity and the growth condition
//! `f(t) ≤ A e^{√t}`.
//!
//! A function `g` is `(A, γ)`-regular on `(a, b)` when
//! `g(γt₁)/g(t₁) ≤ A · g(γt₂)/g(t₂)` for all `a < t₁ < t₂ < b/γ`.
//! The checks here run on log-spaced grids, so a pass certifies the grid only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::HeatKernelSolution;

/// Default number of grid points for regularity checks.
pub const DEFAULT_GRID: usize = 256;

/// Relative slack on the regularity verdict.
const VERDICT_SLACK: f64 = 1e-9;

const GRID_NOTE: &str = "verdict covers the listed grid only; pairs between grid points are not examined";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "snake_case")]
pub enum EnvelopeForm {
    /// `c · t^{d/2}`
    Power { c: f64, d: f64 },
    /// `c · exp(rate · t^exponent)`
    Exponential { c: f64, rate: f64, exponent: f64 },
    /// `c1 · t^{d1/2}` below `knee`, `c2 · t^{d2/2}` from `knee` on.
    PiecewisePower { c1: f64, d1: f64, knee: f64, c2: f64, d2: f64 },
    /// Log-log linear interpolation of `(times[i], values[i])`.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFunction {
    #[serde(flatten)]
    pub form: EnvelopeForm,
    #[serde(alias = "window", default = "unbounded")]
    pub domain: (f64, f64),
}

fn unbounded() -> (f64, f64) {
    (0.0, f64::INFINITY)
}

impl EnvelopeFunction {
    pub fn power(c: f64, d: f64) -> Self {
        EnvelopeFunction { form: EnvelopeForm::Power { c, d }, domain: unbounded() }
    }

    pub fn exponential(c: f64, rate: f64, exponent: f64) -> Self {
        EnvelopeFunction { form: EnvelopeForm::Exponential { c, rate, exponent }, domain: unbounded() }
    }

    /// Two powers glued continuously at `knee`.
    pub fn piecewise_continuous(c1: f64, d1: f64, knee: f64, d2: f64) -> Self {
        let c2 = c1 * knee.powf((d1 - d2) / 2.0);
        EnvelopeFunction {
            form: EnvelopeForm::PiecewisePower { c1, d1, knee, c2, d2 },
            domain: unbounded(),
        }
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidEnvelope("table needs at least two (time, value) pairs".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] <= 0.0 {
            return Err(Error::InvalidEnvelope("table times must be positive and ascending".into()));
        }
        let domain = (times[0], *times.last().unwrap());
        let f = EnvelopeFunction { form: EnvelopeForm::Tabulated { times, values }, domain };
        f.validate()?;
        Ok(f)
    }

    pub fn with_domain(mut self, a: f64, b: f64) -> Self {
        self.domain = (a, b);
        self
    }

    /// Rejects nonpositive parameters and tables that are not increasing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidEnvelope(m.to_string()));
        let (a, b) = self.domain;
        if !(a >= 0.0 && b > a) {
            return bad("domain must satisfy 0 ≤ a < b");
        }
        match &self.form {
            EnvelopeForm::Power { c, d } => {
                if !(*c > 0.0 && *d >= 0.0 && d.is_finite()) {
                    return bad("power envelope needs c > 0 and d ≥ 0");
                }
            }
            EnvelopeForm::Exponential { c, rate, exponent } => {
                if !(*c > 0.0 && *rate >= 0.0 && *exponent >= 0.0) {
                    return bad("exponential envelope needs c > 0, rate ≥ 0, exponent ≥ 0");
                }
            }
            EnvelopeForm::PiecewisePower { c1, d1, knee, c2, d2 } => {
                if !(*c1 > 0.0 && *c2 > 0.0 && *d1 >= 0.0 && *d2 >= 0.0 && *knee > 0.0) {
                    return bad("piecewise envelope needs positive coefficients and knee, nonnegative exponents");
                }
                if c2 * knee.powf(d2 / 2.0) < c1 * knee.powf(d1 / 2.0) * (1.0 - 1e-12) {
                    return bad("piecewise envelope drops at the knee");
                }
            }
            EnvelopeForm::Tabulated { times, values } => {
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return bad("table values must be positive and finite");
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return bad("table values must be nondecreasing");
                }
                if times.len() != values.len() {
                    return bad("table columns differ in length");
                }
            }
        }
        Ok(())
    }

    /// `ln f(t)`; NaN outside a table's range.
    pub fn ln_value(&self, t: f64) -> f64 {
        match &self.form {
            EnvelopeForm::Power { c, d } => c.ln() + 0.5 * d * t.ln(),
            EnvelopeForm::Exponential { c, rate, exponent } => {
                let s = if *exponent == 0.5 { t.sqrt() } else { t.powf(*exponent) };
                c.ln() + rate * s
            }
            EnvelopeForm::PiecewisePower { c1, d1, knee, c2, d2 } => {
                if t < *knee {
                    c1.ln() + 0.5 * d1 * t.ln()
                } else {
                    c2.ln() + 0.5 * d2 * t.ln()
                }
            }
            EnvelopeForm::Tabulated { times, values } => {
                if !(t >= times[0] && t <= *times.last().unwrap()) {
                    return f64::NAN;
                }
                let i = times.partition_point(|&s| s <= t).min(times.len() - 1).max(1);
                let (t0, t1) = (times[i - 1].ln(), times[i].ln());
                let (v0, v1) = (values[i - 1].ln(), values[i].ln());
                let w = (t.ln() - t0) / (t1 - t0);
                v0 + w * (v1 - v0)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioWitness {
    pub t1: f64,
    pub t2: f64,
    /// `[g(γt₁)/g(t₁)] / [g(γt₂)/g(t₂)]`
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticVerdict {
    /// The constant `g(γt)/g(t)`.
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityCertificate {
    pub a_const: f64,
    pub gamma: f64,
    pub window: (f64, f64),
    pub grid: Vec<f64>,
    pub witness: RatioWitness,
    pub passed: bool,
    pub analytic: Option<AnalyticVerdict>,
    pub note: &'static str,
}

fn ensure_monotone(f: &EnvelopeFunction, points: &[f64]) -> Result<()> {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut prev = f64::NEG_INFINITY;
    for &t in &sorted {
        let v = f.ln_value(t);
        if !v.is_finite() {
            return Err(Error::InvalidEnvelope(format!("envelope undefined or nonpositive at t = {t}")));
        }
        if v < prev {
            return Err(Error::InvalidEnvelope(format!("envelope decreases at t = {t}")));
        }
        prev = v;
    }
    Ok(())
}

/// Grid check of `(A, γ)`-regularity on `window = (a, b)`.
///
/// The grid is log-spaced on `[a, b/γ]`. The supremum over grid pairs
/// `t₁ < t₂` of `r(t₁)/r(t₂)` with `r(t) = g(γt)/g(t)` is found in one pass
/// with a running maximum.
pub fn check_regular(
    f: &EnvelopeFunction,
    a_const: f64,
    gamma: f64,
    window: (f64, f64),
    grid_size: usize,
) -> Result<RegularityCertificate> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("γ must exceed 1, got {gamma}")));
    }
    if !(a_const >= 1.0) {
        return Err(Error::InvalidParameter(format!("A must be at least 1, got {a_const}")));
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
    }
    let (a, b) = window;
    if !(a > 0.0 && b.is_finite() && b > gamma * a) {
        return Err(Error::InvalidParameter(format!(
            "window ({a}, {b}) must be finite with 0 < a and γa < b"
        )));
    }
    if a < f.domain.0 || b > f.domain.1 {
        return Err(Error::InvalidParameter(format!(
            "window ({a}, {b}) leaves the envelope domain ({}, {})",
            f.domain.0, f.domain.1
        )));
    }
    f.validate()?;
    let grid = log_grid(a, b / gamma, grid_size);
    let mut all: Vec<f64> = grid.clone();
    all.extend(grid.iter().map(|t| gamma * t));
    ensure_monotone(f, &all)?;

    let log_r: Vec<f64> = grid.iter().map(|&t| f.ln_value(gamma * t) - f.ln_value(t)).collect();
    let mut best = (f64::NEG_INFINITY, 0, 1);
    let mut lead = 0;
    for j in 1..grid.len() {
        if log_r[j - 1] > log_r[lead] {
            lead = j - 1;
        }
        let diff = log_r[lead] - log_r[j];
        if diff > best.0 {
            best = (diff, lead, j);
        }
    }
    let witness = RatioWitness { t1: grid[best.1], t2: grid[best.2], value: best.0.exp() };
    let passed = witness.value <= a_const * (1.0 + VERDICT_SLACK);
    let analytic = match f.form {
        EnvelopeForm::Power { d, .. } => Some(AnalyticVerdict { ratio: gamma.powf(d / 2.0), passed: true }),
        _ => None,
    };
    Ok(RegularityCertificate {
        a_const,
        gamma,
        window,
        grid,
        witness,
        passed,
        analytic,
        note: GRID_NOTE,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCertificate {
    pub a_const: f64,
    pub grid_range: (f64, f64),
    pub grid_points: usize,
    /// Largest `f(t)/e^{√t}` on the grid and where it occurs.
    pub worst_t: f64,
    pub worst_value: f64,
    /// True supremum over `(0, ∞)` for power envelopes.
    pub analytic_sup: Option<(f64, f64)>,
    pub passed: bool,
}

/// `sup_{t>0} c t^{d/2} e^{−√t}`: stationary at `√t = d`, value `c d^d e^{−d}`.
pub fn power_growth_sup(c: f64, d: f64) -> (f64, f64) {
    if d == 0.0 {
        return (0.0, c);
    }
    (d * d, c * (d * (d.ln() - 1.0)).exp())
}

/// Checks `f(t) ≤ A e^{√t}` on `grid`; power envelopes are decided exactly.
pub fn check_growth(f: &EnvelopeFunction, a_const: f64, grid: &[f64]) -> Result<GrowthCertificate> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let ln_a = a_const.ln();
    let mut worst = (f64::NEG_INFINITY, grid[0]);
    for &t in grid {
        let v = f.ln_value(t) - t.sqrt();
        if v > worst.0 || v.is_nan() {
            worst = (v, t);
        }
    }
    let analytic_sup = match f.form {
        EnvelopeForm::Power { c, d } => Some(power_growth_sup(c, d)),
        _ => None,
    };
    let tol = 1e-12 * ln_a.abs().max(1.0);
    let passed = match analytic_sup {
        Some((_, sup)) => sup <= a_const * (1.0 + 1e-12),
        None => worst.0 <= ln_a + tol,
    };
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthCertificate {
        a_const,
        grid_range: (lo, hi),
        grid_points: grid.len(),
        worst_t: worst.1,
        worst_value: worst.0.exp(),
        analytic_sup,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeFit {
    pub envelope: EnvelopeFunction,
    /// Grid time at which `p_t(x, x) · f(t) = 1`.
    pub binding_time: f64,
    pub points: usize,
}

/// Largest `c` with `p_t(x, x) ≤ 1/(c t^{d/2})` at every grid time in `window`.
pub fn fit_on_diagonal_envelope(
    kernel: &HeatKernelSolution,
    x: usize,
    d: f64,
    window: (f64, f64),
) -> Result<EnvelopeFit> {
    if kernel.source != x {
        return Err(Error::Data(format!("kernel starts at {}, not at {x}", kernel.source)));
    }
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("exponent d must be nonnegative, got {d}")));
    }
    let mut best: Option<(f64, f64)> = None;
    let mut points = 0;
    for (i, &t) in kernel.times.iter().enumerate() {
        if t < window.0 || t > window.1 || t <= 0.0 {
            continue;
        }
        let p = kernel.values[i][x];
        if !(p > 0.0) {
            return Err(Error::Data(format!("kernel value {p} at t = {t} is not positive")));
        }
        points += 1;
        let c = 1.0 / (t.powf(d / 2.0) * p);
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, t));
        }
    }
    let Some((mut c, binding_time)) = best else {
        return Err(Error::Data(format!("no kernel times inside ({}, {})", window.0, window.1)));
    };
    // rounding in f(t) = exp(ln c + (d/2) ln t) may overshoot by a few ulps
    let inside: Vec<(f64, f64)> = kernel
        .times
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t >= window.0 && t <= window.1 && t > 0.0)
        .map(|(i, &t)| (t, kernel.values[i][x]))
        .collect();
    while inside.iter().any(|&(t, p)| p * EnvelopeFunction::power(c, d).value(t) > 1.0) {
        c *= 1.0 - 4.0 * f64::EPSILON;
    }
    Ok(EnvelopeFit {
        envelope: EnvelopeFunction::power(c, d).with_domain(window.0, window.1),
        binding_time,
        points,
    })
}
