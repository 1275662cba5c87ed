use std::f64::consts::E;

use serde::Serialize;

use super::ConstantsLedger;
use crate::error::{Error, Result};
use crate::regularity::{check_growth, check_regular, log_grid, EnvelopeFunction, GrowthCertificate, RegularityCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    /// Whether the bound is asserted at this `(D, t)`.
    pub applicable: bool,
}

/// Long-range bound, valid for every `t > 0`:
/// `(θ_xθ_y)^{-1/2} exp(−(D/2) log(D/(2et)) − Λt)`, with `0·log 0 = 0`.
pub fn davies_long_range_bound(theta_x: f64, theta_y: f64, d: f64, t: f64, spectral_gap: f64) -> f64 {
    let pre = (theta_x * theta_y).sqrt().recip();
    let spatial = if d == 0.0 { 0.0 } else { -0.5 * d * (d / (2.0 * E * t)).ln() };
    pre * (spatial - spectral_gap * t).exp()
}

/// Weak Gaussian bound `(θ_xθ_y)^{-1/2} exp(−(D²/2t)(1 − D/t) − Λt)`,
/// asserted for `t ≥ D`.
pub fn weak_gaussian_bound(theta_x: f64, theta_y: f64, d: f64, t: f64, spectral_gap: f64) -> BoundValue {
    let pre = (theta_x * theta_y).sqrt().recip();
    let value = pre * (-(d * d / (2.0 * t)) * (1.0 - d / t) - spectral_gap * t).exp();
    BoundValue { value, applicable: t >= d }
}

/// An envelope together with the certificates that make it usable as a
/// hypothesis of the Gaussian bound.
#[derive(Debug, Clone, Serialize)]
pub struct CertifiedEnvelope {
    pub envelope: EnvelopeFunction,
    pub regularity: RegularityCertificate,
    pub growth: GrowthCertificate,
}

impl CertifiedEnvelope {
    /// Checks `(A, γ)`-regularity on `window` and `f ≤ A e^{√t}` on a grid over it.
    pub fn certify(f: EnvelopeFunction, a_const: f64, gamma: f64, window: (f64, f64), grid_size: usize) -> Result<Self> {
        let regularity = check_regular(&f, a_const, gamma, window, grid_size)?;
        if !regularity.passed {
            return Err(Error::HypothesisViolation(format!(
                "envelope is not ({a_const}, {gamma})-regular on the grid: ratio {} at t₁ = {}, t₂ = {}",
                regularity.witness.value, regularity.witness.t1, regularity.witness.t2
            )));
        }
        let growth = check_growth(&f, a_const, &log_grid(window.0, window.1, grid_size))?;
        if !growth.passed {
            return Err(Error::HypothesisViolation(format!(
                "growth condition fails: f(t)/e^√t = {} > A = {a_const} at t = {}",
                growth.analytic_sup.map_or(growth.worst_value, |s| s.1),
                growth.analytic_sup.map_or(growth.worst_t, |s| s.0)
            )));
        }
        Ok(CertifiedEnvelope { envelope: f, regularity, growth })
    }

    fn admits(&self, ledger: &ConstantsLedger) -> Result<()> {
        let r = &self.regularity;
        if r.a_const > ledger.a_const * (1.0 + 1e-12) || (r.gamma - ledger.gamma).abs() > 1e-12 * ledger.gamma {
            return Err(Error::HypothesisViolation(format!(
                "envelope certified for (A, γ) = ({}, {}) but the ledger uses ({}, {})",
                r.a_const, r.gamma, ledger.a_const, ledger.gamma
            )));
        }
        Ok(())
    }
}

/// `C₁ (f₁(α₀t/2) f₂(α₀t/2))^{-1/2} exp(−κ₀D²/(2t))`, asserted for `t ≥ max(1, D)`.
pub fn gaussian_upper_bound(
    ledger: &ConstantsLedger,
    f1: &CertifiedEnvelope,
    f2: &CertifiedEnvelope,
    d: f64,
    t: f64,
) -> Result<BoundValue> {
    f1.admits(ledger)?;
    f2.admits(ledger)?;
    if !(t > 0.0) || !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("need t > 0 and D ≥ 0, got t = {t}, D = {d}")));
    }
    let s = ledger.alpha0 * t / 2.0;
    let ln_f = 0.5 * (f1.envelope.ln_value(s) + f2.envelope.ln_value(s));
    let value = (ledger.c1.ln() - ln_f - ledger.c2 * d * d / t).exp();
    Ok(BoundValue { value, applicable: t >= d.max(1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub empty: bool,
}

impl TimeWindow {
    pub fn contains(&self, t: f64) -> bool {
        !self.empty && t >= self.t_min && t < self.t_max
    }
}

/// Times at which the bound holds when the envelopes are only regular on
/// `(T₁, T₂)`: `t ≥ max(72γ⁴e⁴T₁², 1, D)` and `t < T₂`.
pub fn valid_time_window(ledger: &ConstantsLedger, t1: f64, t2: f64, d: f64) -> Result<TimeWindow> {
    if !(t1 >= 0.0 && t2 > t1) {
        return Err(Error::InvalidParameter(format!("need 0 ≤ T₁ < T₂, got ({t1}, {t2})")));
    }
    let t_min = (72.0 * ledger.gamma.powi(4) * E.powi(4) * t1 * t1).max(1.0).max(d);
    Ok(TimeWindow { t_min, t_max: t2, empty: t2 <= t_min })
}
