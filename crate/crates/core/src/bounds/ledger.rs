//! The explicit constants behind the Gaussian upper bound, built from the
//! regularity inputs `(γ, A)`, the vertex weight floor `C_θ` and the cosh
//! parameter `λ`.

use std::f64::consts::{E, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cosh parameter.
pub const DEFAULT_LAMBDA: f64 = 2.0;

/// `2cosh K − 2 − λK²`, written as `4sinh²(K/2) − λK²` to avoid cancellation.
fn cosh_gap(k: f64, lambda: f64) -> f64 {
    let s = (k / 2.0).sinh();
    4.0 * s * s - lambda * k * k
}

/// Largest `K > 0` with `2cosh t − 2 ≤ λt²` for all `|t| ≤ K`.
///
/// `(2sinh(K/2)/K)²` increases from 1, so the root is unique and bisection
/// on the monotone ratio converges to absolute accuracy 1e-12.
pub fn solve_k_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "λ must exceed 1 for 2cosh t − 2 ≤ λt² to have a positive root, got {lambda}"
        )));
    }
    let ratio = |k: f64| {
        let r = 2.0 * (k / 2.0).sinh() / k;
        r * r
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while ratio(hi) < lambda {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mid > 0.0 && ratio(mid) < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub name: &'static str,
    pub value: f64,
    pub formula: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub statement: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsLedger {
    pub gamma: f64,
    pub a_const: f64,
    pub c_theta: f64,
    pub lambda: f64,
    pub k_lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// `k` attaining the infimum defining `β`.
    pub beta_k: u32,
    pub alpha: f64,
    pub m0: f64,
    pub m1: f64,
    pub n0: f64,
    pub n1: f64,
    pub kappa0: f64,
    pub t0_sum: f64,
    pub t1_sum: f64,
    pub alpha0: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `inf_{k≥0} γ^{k+1} / ((2γ−1)(k+2)(k+3)⁴)` and its minimiser.
///
/// Consecutive terms have ratio `γ(k+2)/(k+3) · ((k+3)/(k+4))⁴`, which
/// increases in `k`; once it reaches 1 the sequence never decreases again.
pub fn beta_infimum(gamma: f64) -> (f64, u32) {
    let term = |k: f64| gamma.powf(k + 1.0) / ((2.0 * gamma - 1.0) * (k + 2.0) * (k + 3.0).powi(4));
    let mut k = 0u32;
    loop {
        let kf = k as f64;
        let q = gamma * (kf + 2.0) / (kf + 3.0) * ((kf + 3.0) / (kf + 4.0)).powi(4);
        if q >= 1.0 {
            return (term(kf), k);
        }
        k += 1;
    }
}

/// `Σ_{j≥1} exp(a_j)` for decreasing exponents, to relative accuracy 1e-14.
fn tail_sum(exponent: impl Fn(u32) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut j = 1;
    loop {
        let term = exponent(j).exp();
        sum += term;
        if term <= 1e-16 * sum || j > 4096 {
            return sum;
        }
        j += 1;
    }
}

impl ConstantsLedger {
    /// Assembles every constant and checks the invariants.
    pub fn build(gamma: f64, a_const: f64, c_theta: f64, lambda: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("γ must exceed 1, got {gamma}")));
        }
        if !(a_const >= 1.0 && a_const.is_finite()) {
            return Err(Error::InvalidParameter(format!("A must be at least 1, got {a_const}")));
        }
        if !(c_theta > 0.0 && c_theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("C_θ must be positive, got {c_theta}")));
        }
        let e2 = E * E;
        let k_lambda = solve_k_lambda(lambda)?;
        let delta = k_lambda / (6.0 * gamma * e2);
        let epsilon = lambda * delta * delta / (4.0 * (1.0 - lambda * delta));
        let (beta, beta_k) = beta_infimum(gamma);
        let alpha = 2.0 / gamma;
        let m0 = (24.0 * epsilon * gamma.powi(3) * e2 / ((gamma - 1.0) * (2.0 * gamma - 1.0)))
            .exp()
            .max(2.0 * a_const);
        let m1 = delta * beta;
        let n0 = (24.0 * epsilon * gamma * gamma * e2 / (gamma - 1.0)).exp() / c_theta;
        let n1 = 1.0 / (12.0 * gamma);
        let kappa0 = 0.5 * (m1 / 16.0).min(n1 / 8.0);
        let t0_sum = tail_sum(|j| (4.0 * kappa0 - m1) * 4f64.powi(j as i32 - 1));
        let t1_sum = tail_sum(|j| (2f64.powi(j as i32 - 1) - 1.0) * (4.0 * kappa0 - n1) / SQRT_2);
        let c = kappa0.exp()
            + (m0 * t0_sum + n0 * t1_sum * a_const)
            + (m0 * ((16.0 * kappa0 - m1) / 8.0).exp() + n0 * a_const);
        let alpha0 = alpha
            .min((4.0 * kappa0 - n1).powi(2))
            .min((8.0 * kappa0 - n1).powi(2) / 8.0);
        let ledger = ConstantsLedger {
            gamma,
            a_const,
            c_theta,
            lambda,
            k_lambda,
            delta,
            epsilon,
            beta,
            beta_k,
            alpha,
            m0,
            m1,
            n0,
            n1,
            kappa0,
            t0_sum,
            t1_sum,
            alpha0,
            c,
            c1: c,
            c2: kappa0 / 2.0,
        };
        if let Some(bad) = ledger.invariants().into_iter().find(|c| !c.holds) {
            return Err(Error::LedgerInvariant(format!(
                "{} fails: {} (lhs {:e}, rhs {:e})",
                bad.name, bad.statement, bad.lhs, bad.rhs
            )));
        }
        Ok(ledger)
    }

    pub fn with_defaults(gamma: f64, a_const: f64, c_theta: f64) -> Result<Self> {
        Self::build(gamma, a_const, c_theta, DEFAULT_LAMBDA)
    }

    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let e2 = E * E;
        let (l, d, eps, k) = (self.lambda, self.delta, self.epsilon, self.k_lambda);
        let eps_min = l * d * d / (4.0 * (1.0 - l * d));
        let c5 = 4.0 * eps / (l * d * (d + 4.0 * eps));
        let target = 6.0 * self.gamma * e2;
        vec![
            InvariantCheck { name: "C1", holds: l > 1.0, lhs: l, rhs: 1.0, statement: "λ > 1" },
            InvariantCheck { name: "C2", holds: d < 1.0 / l, lhs: d, rhs: 1.0 / l, statement: "δ < 1/λ" },
            InvariantCheck {
                name: "C3",
                holds: eps >= eps_min * (1.0 - 1e-12),
                lhs: eps,
                rhs: eps_min,
                statement: "ε ≥ λδ²/(4(1−λδ))",
            },
            InvariantCheck {
                name: "C4",
                holds: (k / d - target).abs() <= 1e-12 * target,
                lhs: k / d,
                rhs: target,
                statement: "K_λ/δ = 6γe²",
            },
            InvariantCheck {
                name: "C5",
                holds: c5 >= 1.0 - 1e-12,
                lhs: c5,
                rhs: 1.0,
                statement: "4ε/(λδ(δ+4ε)) ≥ 1",
            },
            InvariantCheck {
                name: "K_root",
                holds: cosh_gap(k, l).abs() <= 1e-10,
                lhs: 2.0 * k.cosh() - 2.0,
                rhs: l * k * k,
                statement: "2cosh K_λ − 2 = λK_λ²",
            },
            InvariantCheck {
                name: "kappa_m",
                holds: 16.0 * self.kappa0 - self.m1 < 0.0,
                lhs: 16.0 * self.kappa0 - self.m1,
                rhs: 0.0,
                statement: "16κ₀ − m₁ < 0",
            },
            InvariantCheck {
                name: "kappa_n",
                holds: 8.0 * self.kappa0 - self.n1 < 0.0,
                lhs: 8.0 * self.kappa0 - self.n1,
                rhs: 0.0,
                statement: "8κ₀ − n₁ < 0",
            },
        ]
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        let e = |name, value, formula| LedgerEntry { name, value, formula };
        vec![
            e("gamma", self.gamma, "input"),
            e("A", self.a_const, "input"),
            e("C_theta", self.c_theta, "input: θ_x ≥ C_θ for all x"),
            e("lambda", self.lambda, "input, λ > 1"),
            e("K_lambda", self.k_lambda, "largest root of 2cosh K − 2 = λK²"),
            e("delta", self.delta, "K_λ/(6γe²)"),
            e("epsilon", self.epsilon, "λδ²/(4(1−λδ))"),
            e("beta", self.beta, "inf_{k≥0} γ^{k+1}/((2γ−1)(k+2)(k+3)^4)"),
            e("beta_k", self.beta_k as f64, "argmin k of the β infimum"),
            e("alpha", self.alpha, "2/γ"),
            e("m0", self.m0, "max(exp(24εγ³e²/((γ−1)(2γ−1))), 2A)"),
            e("m1", self.m1, "δβ"),
            e("n0", self.n0, "C_θ⁻¹ exp(24εγ²e²/(γ−1))"),
            e("n1", self.n1, "1/(12γ)"),
            e("kappa0", self.kappa0, "½ min(m₁/16, n₁/8)"),
            e("T0", self.t0_sum, "Σ_{j≥1} exp((4κ₀−m₁)4^{j−1})"),
            e("T1", self.t1_sum, "Σ_{j≥1} exp((2^{j−1}−1)(4κ₀−n₁)/√2)"),
            e("alpha0", self.alpha0, "min(α, (4κ₀−n₁)², (8κ₀−n₁)²/8)"),
            e("C", self.c, "e^{κ₀} + (m₀T₀ + n₀T₁A) + (m₀e^{(16κ₀−m₁)/8} + n₀A)"),
            e("C1", self.c1, "C"),
            e("C2", self.c2, "κ₀/2"),
        ]
    }

    /// JSON object with every constant, its formula and the invariant checks.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "constants": self.entries(),
            "invariants": self.invariants(),
            "bound": "p_t(x,y) ≤ C₁ (f₁(α₀t/2) f₂(α₀t/2))^{-1/2} exp(−C₂ d_θ(x,y)²/t) for t ≥ max(1, d_θ(x,y))",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k_lambda_for_two() {
        let k = solve_k_lambda(2.0).unwrap();
        assert!((2.98..2.99).contains(&k), "K = {k}");
        assert!(cosh_gap(k, 2.0).abs() < 1e-10);
    }

    #[test]
    fn k_lambda_rejects_small_lambda() {
        for l in [1.0, 0.5, -2.0, f64::NAN] {
            assert!(solve_k_lambda(l).is_err());
        }
    }

    #[test]
    fn k_lambda_shrinks_as_lambda_approaches_one() {
        let ks: Vec<f64> = [1.5, 1.1, 1.01, 1.001, 1.0001].iter().map(|&l| solve_k_lambda(l).unwrap()).collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]));
        assert!(ks[4] < 0.1);
    }

    #[test]
    fn cosh_inequality_on_grid() {
        for l in [1.5, 2.0, 3.0] {
            let k = solve_k_lambda(l).unwrap();
            for i in 0..=200 {
                let t = k * i as f64 / 200.0;
                assert!(2.0 * t.cosh() - 2.0 <= l * t * t * (1.0 + 1e-12) + 1e-300, "λ {l} t {t}");
            }
            let t = 1.01 * k;
            assert!(2.0 * t.cosh() - 2.0 > l * t * t);
        }
    }

    #[test]
    fn beta_scan_matches_brute_force() {
        for gamma in [1.1, 1.5, 2.0, 4.0, 10.0] {
            let (beta, k) = beta_infimum(gamma);
            let brute = (0..200)
                .map(|k| gamma.powi(k + 1) / ((2.0 * gamma - 1.0) * (k as f64 + 2.0) * (k as f64 + 3.0).powi(4)))
                .fold(f64::INFINITY, f64::min);
            assert!((beta - brute).abs() <= 1e-15 * brute, "γ {gamma}: {beta} vs {brute} at k {k}");
        }
    }

    #[test]
    fn gamma_two_constants() {
        let l = ConstantsLedger::with_defaults(2.0, 1.0, 1.0).unwrap();
        let e2 = E * E;
        assert!((l.delta - l.k_lambda / (12.0 * e2)).abs() < 1e-15);
        assert!((l.delta - 0.0337).abs() < 5e-4);
        assert!((l.epsilon - 6.09e-4).abs() < 2e-5);
        assert!((l.beta - 7.40e-4).abs() < 5e-6);
        assert!(l.beta_k == 4 || l.beta_k == 5);
        assert_eq!(l.n1, 1.0 / 24.0);
        assert_eq!(l.alpha, 1.0);
        assert_eq!(l.c1, l.c);
        assert_eq!(l.c2, l.kappa0 / 2.0);
    }

    #[test]
    fn kappa_has_slack_factor_two() {
        let l = ConstantsLedger::with_defaults(2.0, 3.0, 0.5).unwrap();
        let binding = (l.m1 / 16.0).min(l.n1 / 8.0);
        assert_eq!(l.kappa0 * 2.0, binding);
        assert!(16.0 * l.kappa0 - l.m1 <= -l.m1 / 2.0 * (1.0 - 1e-12));
    }

    #[test]
    fn tail_sums_match_long_sums() {
        let l = ConstantsLedger::with_defaults(2.0, 1.0, 1.0).unwrap();
        let t0: f64 = (1..60).map(|j| ((4.0 * l.kappa0 - l.m1) * 4f64.powi(j - 1)).exp()).sum();
        let t1: f64 = (1..60)
            .map(|j| ((2f64.powi(j - 1) - 1.0) * (4.0 * l.kappa0 - l.n1) / SQRT_2).exp())
            .sum();
        assert!((l.t0_sum - t0).abs() <= 1e-14 * t0);
        assert!((l.t1_sum - t1).abs() <= 1e-14 * t1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ConstantsLedger::with_defaults(1.0, 1.0, 1.0).is_err());
        assert!(ConstantsLedger::with_defaults(2.0, 0.9, 1.0).is_err());
        assert!(ConstantsLedger::with_defaults(2.0, 1.0, 0.0).is_err());
        assert!(ConstantsLedger::build(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn json_lists_formulas() {
        let l = ConstantsLedger::with_defaults(2.0, 1.0, 1.0).unwrap();
        let v = l.to_json();
        let constants = v["constants"].as_array().unwrap();
        assert_eq!(constants.len(), 21);
        assert!(constants.iter().all(|c| c["formula"].as_str().is_some_and(|s| !s.is_empty())));
        assert!(v["invariants"].as_array().unwrap().iter().all(|c| c["holds"] == true));
    }

    proptest! {
        #[test]
        fn invariants_hold_for_admissible_inputs(gamma in 1.01f64..20.0, lambda in 1.05f64..6.0, a in 1.0f64..50.0, ct in 0.01f64..10.0) {
            let l = ConstantsLedger::build(gamma, a, ct, lambda).unwrap();
            prop_assert!(l.invariants().iter().all(|c| c.holds));
            prop_assert!(l.alpha0 <= l.alpha && l.alpha0 > 0.0);
        }
    }
}
