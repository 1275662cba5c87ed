//! Transient solution by uniformization.
//!
//! With `Λ ≥ max_x π_x/θ_x` the operator `P = I + L/Λ` is nonnegative and
//! substochastic, and `e^{tL} = Σ_k Pois(k; Λt) P^k`. Every term is
//! nonnegative, so small kernel values keep full relative accuracy. Dropping
//! Poisson weights outside `[left, right]` changes the sup norm by at most the
//! dropped mass times `‖v‖_∞`, which gives an a-priori error bound.

use super::operator::RestrictedOperator;

/// Poisson weights `Pois(k; mean)` for `k ∈ [left, right]` plus a bound on
/// the probability mass outside that window.
#[derive(Debug, Clone)]
pub(crate) struct PoissonWindow {
    pub left: usize,
    pub weights: Vec<f64>,
    pub dropped: f64,
}

fn ln_factorial(m: usize) -> f64 {
    if m < 32 {
        return (2..=m).map(|k| (k as f64).ln()).sum();
    }
    let x = m as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

impl PoissonWindow {
    /// Window whose dropped mass is at most `budget`, or the window
    /// reached after `max_terms` terms on the right.
    pub fn new(mean: f64, budget: f64, max_terms: usize) -> Self {
        if mean == 0.0 {
            return PoissonWindow { left: 0, weights: vec![1.0], dropped: 0.0 };
        }
        let mode = mean.floor() as usize;
        let ln_mode = -mean + mode as f64 * mean.ln() - ln_factorial(mode);
        let w_mode = ln_mode.exp();
        let half = budget * 0.25;

        let mut right = vec![w_mode];
        let mut k = mode;
        let right_tail = loop {
            let w = *right.last().unwrap();
            let r = mean / (k + 1) as f64;
            if r < 1.0 {
                let tail = w * r / (1.0 - r);
                if tail <= half || k >= max_terms {
                    break tail;
                }
            }
            if k >= max_terms {
                break 1.0;
            }
            right.push(w * r);
            k += 1;
        };

        let mut left_part = Vec::new();
        let mut w = w_mode;
        let mut k = mode;
        let left_tail = loop {
            if k == 0 {
                break 0.0;
            }
            let r = k as f64 / mean;
            let tail = if r < 1.0 { w * r / (1.0 - r) } else { f64::INFINITY };
            if tail <= half {
                break tail;
            }
            w *= r;
            k -= 1;
            left_part.push(w);
        };
        let left = k;
        left_part.reverse();
        left_part.extend(right);
        // The mode weight carries the cancellation error of the log formula
        // (relative ~1e-16·mean), so renormalise. Normalising by the tail
        // bounds instead of the true tails costs at most another tail mass.
        let tails = left_tail + right_tail;
        let total: f64 = left_part.iter().sum::<f64>() + tails;
        for w in &mut left_part {
            *w /= total;
        }
        PoissonWindow {
            left,
            weights: left_part,
            dropped: (2.0 * tails / total).min(1.0),
        }
    }

    pub fn right(&self) -> usize {
        self.left + self.weights.len() - 1
    }
}

/// Advances `v` by time `dt` in place. Returns the truncation error bound
/// in the sup norm.
pub(crate) fn advance(op: &RestrictedOperator, v: &mut Vec<f64>, dt: f64, tol: f64, max_terms: usize) -> f64 {
    if dt == 0.0 {
        return 0.0;
    }
    let lambda = op.max_rate().max(f64::MIN_POSITIVE);
    let sup = v.iter().copied().fold(0.0, f64::max);
    if sup == 0.0 {
        return 0.0;
    }
    let window = PoissonWindow::new(lambda * dt, tol / sup, max_terms);
    let n = op.len();
    let mut acc = vec![0.0; n];
    let mut cur = std::mem::take(v);
    let mut next = vec![0.0; n];
    for k in 0..=window.right() {
        if k >= window.left {
            let w = window.weights[k - window.left];
            for (a, c) in acc.iter_mut().zip(&cur) {
                *a += w * c;
            }
        }
        if k < window.right() {
            op.uniformized_step(lambda, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    *v = acc;
    window.dropped * sup
}
