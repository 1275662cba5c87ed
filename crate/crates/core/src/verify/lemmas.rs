use std::f64::consts::E;

use serde_json::json;

use super::{functional_e, functional_i, functional_j, FunctionalFrame, LemmaCheck};
use crate::bounds::ConstantsLedger;
use crate::error::{Error, Result};
use crate::heat::{full_kernel, killed_kernel};
use crate::metric::AdaptedMetric;
use crate::regularity::EnvelopeFunction;

fn covers(f: &EnvelopeFunction, lo: f64, hi: f64) -> bool {
    f.domain.0 <= lo * (1.0 + 1e-12) && hi <= f.domain.1 * (1.0 + 1e-12)
}

/// Checks that `J_R` on the killed kernel of `subset` does not increase on
/// `[t1, t0]` when `R − 6γe²(s − t) + ½ ≤ 0` there.
///
/// The slope test uses forward differences on `grid_size` equally spaced
/// times; the tolerance is `1e-8 · max J`.
#[allow(clippy::too_many_arguments)]
pub fn check_max_principle(
    metric: &AdaptedMetric<'_>,
    subset: &[usize],
    x0: usize,
    r: f64,
    interval: (f64, f64),
    s: f64,
    ledger: &ConstantsLedger,
    grid_size: usize,
    tol: f64,
) -> Result<LemmaCheck> {
    let (t1, t0) = interval;
    let hyp = json!({"x0": x0, "R": r, "t1": t1, "t0": t0, "s": s, "subset_size": subset.len()});
    if !(t1 > 0.0 && t0 > t1 && s > t0 && r >= 0.0) || grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "need 0 < t1 < t0 < s, R ≥ 0 and two grid points, got {hyp}"
        )));
    }
    let frame = FunctionalFrame::new(ledger, x0, r, t0, s)?;
    // the hypothesis is tightest at the largest t
    let margin = frame.max_principle_margin(ledger.gamma);
    if margin < 0.0 {
        return Ok(LemmaCheck::not_applicable(
            "max_principle",
            hyp,
            format!("R − 6γe²(s − t) + ½ = {:e} > 0 at t = t0", -margin),
        ));
    }
    let times: Vec<f64> = (0..grid_size)
        .map(|i| t1 + (t0 - t1) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let kernel = killed_kernel(metric.graph(), subset, x0, &times, tol)?;
    let js: Vec<f64> = times
        .iter()
        .map(|&t| functional_j(metric, &kernel, &frame.at_time(t)?))
        .collect::<Result<_>>()?;
    let scale = js.iter().copied().fold(0.0, f64::max);
    let slope = js
        .windows(2)
        .zip(times.windows(2))
        .map(|(j, t)| (j[1] - j[0]) / (t[1] - t[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LemmaCheck::inequality("max_principle", hyp, slope, 0.0, 1e-8 * scale)
        .with_details(json!({"times": times, "J": js})))
}

/// The sequences `t_j = t₀γ^{-j}`, `s_j = 2t_j`, `R_j = (½ + 1/(j+2))R₀`
/// and the last index `j*` at which `R_j − 6γe²(s_j − t_j) + ½ ≤ 0`.
#[derive(Debug, Clone)]
pub struct TailSequences {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub j_star: Option<usize>,
}

impl TailSequences {
    pub fn s(&self, j: usize) -> f64 {
        2.0 * self.t[j]
    }
}

pub fn sequences(r0: f64, t0: f64, gamma: f64) -> TailSequences {
    let c = 6.0 * gamma * E * E;
    let t_at = |j: usize| t0 * gamma.powi(-(j as i32));
    let r_at = |j: usize| (0.5 + 1.0 / (j as f64 + 2.0)) * r0;
    // R_j > R₀/2, so the condition fails for good once t_j < (R₀/2 + ½)/c
    let floor = (r0 / 2.0 + 0.5) / c;
    let mut j_star = None;
    let mut j = 0;
    while t_at(j) >= floor {
        if r_at(j) + 0.5 <= c * t_at(j) {
            j_star = Some(j);
        }
        j += 1;
    }
    let n = j_star.map_or(1, |j| j + 2);
    TailSequences {
        t: (0..n).map(t_at).collect(),
        r: (0..n).map(r_at).collect(),
        j_star,
    }
}

/// The telescoping tail estimates for `I_{R₀}(t₀)`: one two-term inequality
/// per step `j ≤ j*`, the bracket `R₀/(12γe²) < t_{j*} < R₀/(2e²)`, and the
/// final estimate `I_{R₀}(t₀) ≤ m₀ e^{−m₁R₀²/t₀}/f(αt₀) + n₀ e^{−n₁R₀}`,
/// which requires `t₀ ≥ R₀ ≥ ½`.
pub fn check_tail_lemmas(
    metric: &AdaptedMetric<'_>,
    x0: usize,
    r0: f64,
    t0: f64,
    ledger: &ConstantsLedger,
    envelope: &EnvelopeFunction,
    tol: f64,
) -> Result<Vec<LemmaCheck>> {
    if !(r0 >= 0.0 && t0 > 0.0) {
        return Err(Error::InvalidParameter(format!("need R₀ ≥ 0 and t₀ > 0, got {r0}, {t0}")));
    }
    let gamma = ledger.gamma;
    let seq = sequences(r0, t0, gamma);
    let base = json!({"x0": x0, "R0": r0, "t0": t0});
    let Some(j_star) = seq.j_star else {
        let why = "R₀ − 6γe²t₀ + ½ > 0, so no telescoping step is admissible";
        return Ok(vec![
            LemmaCheck::not_applicable("tail_step", base.clone(), why),
            LemmaCheck::not_applicable("j_star_bracket", base.clone(), why),
            LemmaCheck::not_applicable("tail_estimate", base, why),
        ]);
    };
    let mut times: Vec<f64> = seq.t.clone();
    times.reverse();
    let kernel = full_kernel(metric.graph(), x0, &times, tol)?;
    let i_at = |j: usize, r: f64| functional_i(metric, &kernel, r, seq.t[j]);
    let needed = (2.0 * seq.t[j_star + 1], 2.0 * t0);
    let envelope_ok = covers(envelope, needed.0, needed.1);
    let check_tol = 10.0 * tol;
    let mut out = Vec::new();

    for j in 0..=j_star {
        let (tj, tn, s) = (seq.t[j], seq.t[j + 1], seq.s(j));
        let (rj, rn) = (seq.r[j], seq.r[j + 1]);
        let hyp = json!({"j": j, "R0": rj, "R1": rn, "t0": tj, "t1": tn, "s": s});
        if !covers(envelope, 2.0 * tn, 2.0 * tn) {
            out.push(LemmaCheck::not_applicable("tail_step", hyp, format!("envelope not certified at {}", 2.0 * tn)));
            continue;
        }
        let lhs = i_at(j, rj)?;
        let grow = (ledger.epsilon / (s - tj)).exp();
        let decay = (-(ledger.delta * (rj - rn).powi(2) + ledger.epsilon) / (s - tn)).exp();
        let rhs = grow * i_at(j + 1, rn)? + grow * decay / envelope.value(2.0 * tn);
        out.push(LemmaCheck::inequality("tail_step", hyp, lhs, rhs, check_tol));
    }

    let t_star = seq.t[j_star];
    let lo = r0 / (12.0 * gamma * E * E);
    let hi = r0 / (2.0 * E * E);
    let mut bracket = LemmaCheck::inequality(
        "j_star_bracket",
        json!({"R0": r0, "t0": t0, "j_star": j_star, "lower": lo, "upper": hi}),
        t_star,
        hi,
        0.0,
    );
    bracket.slack = (t_star - lo).min(hi - t_star);
    bracket.verdict = if bracket.slack > 0.0 { super::Verdict::Pass } else { super::Verdict::Fail };
    if r0 < 0.5 {
        // the bracket's upper end uses ½ ≤ 2R_{j*+1}, which needs R₀ ≥ ½
        bracket = LemmaCheck::not_applicable("j_star_bracket", bracket.hypotheses, "R₀ < ½");
    }
    out.push(bracket);

    let hyp = json!({"x0": x0, "R0": r0, "t0": t0, "j_star": j_star, "envelope_window": [needed.0, needed.1]});
    if !(t0 >= r0 && r0 >= 0.5) {
        out.push(LemmaCheck::not_applicable("tail_estimate", hyp, "requires t₀ ≥ R₀ ≥ ½"));
    } else if !envelope_ok {
        out.push(LemmaCheck::not_applicable(
            "tail_estimate",
            hyp,
            format!("envelope domain {:?} does not cover [{}, {}]", envelope.domain, needed.0, needed.1),
        ));
    } else {
        let lhs = i_at(0, r0)?;
        let rhs = ledger.m0 / envelope.value(ledger.alpha * t0) * (-ledger.m1 * r0 * r0 / t0).exp()
            + ledger.n0 * (-ledger.n1 * r0).exp();
        out.push(LemmaCheck::inequality("tail_estimate", hyp, lhs, rhs, check_tol));
    }
    Ok(out)
}

/// Checks `E_{κ₀,D,G}(x₀, t) ≤ C/f(α₀t)` for `t ≥ max(½, D/2)` and reports
/// the split over the annuli `A_0, …, A_{k*+1}` with `2^{k*} ≤ √t`.
pub fn check_weighted_sum_lemma(
    metric: &AdaptedMetric<'_>,
    x0: usize,
    d: f64,
    t: f64,
    ledger: &ConstantsLedger,
    envelope: &EnvelopeFunction,
    tol: f64,
) -> Result<LemmaCheck> {
    let hyp = json!({"x0": x0, "D": d, "t": t});
    if !(t >= 0.5f64.max(d / 2.0)) {
        return Ok(LemmaCheck::not_applicable("weighted_sum", hyp, "requires t ≥ max(½, D/2)"));
    }
    let arg = ledger.alpha0 * t;
    // the proof evaluates f between α₀t and 2t
    if !covers(envelope, arg, 2.0 * t) {
        return Ok(LemmaCheck::not_applicable(
            "weighted_sum",
            hyp,
            format!("envelope domain {:?} does not cover [{arg}, {}]", envelope.domain, 2.0 * t),
        ));
    }
    let kernel = full_kernel(metric.graph(), x0, &[t], tol)?;
    let dist = metric.distances_from(x0);
    let sq = t.sqrt();
    let mut k_star = 0u32;
    while 2f64.powi(k_star as i32 + 1) <= sq {
        k_star += 1;
    }
    let annulus = |x: usize| -> u32 {
        let r = dist[x];
        if r <= sq {
            return 0;
        }
        for k in 1..=k_star {
            if r <= 2f64.powi(k as i32) * sq {
                return k;
            }
        }
        k_star + 1
    };
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k_star as usize + 2];
    for x in 0..metric.graph().len() {
        parts[annulus(x) as usize].push(x);
    }
    let split: Vec<f64> = parts
        .iter()
        .map(|h| functional_e(metric, &kernel, ledger.kappa0, d, t, Some(h)))
        .collect::<Result<_>>()?;
    let total = functional_e(metric, &kernel, ledger.kappa0, d, t, None)?;
    let sum: f64 = split.iter().sum();
    let rhs = ledger.c / envelope.value(arg);
    let mut check = LemmaCheck::inequality("weighted_sum", hyp, total, rhs, 10.0 * tol).with_details(json!({
        "k_star": k_star,
        "annulus_sizes": parts.iter().map(Vec::len).collect::<Vec<_>>(),
        "annulus_terms": split,
        "split_sum": sum,
    }));
    if (sum - total).abs() > 1e-12 * total.max(1e-300) {
        check = check.with_note(format!("annulus split sums to {sum:e}, total {total:e}"));
        check.verdict = super::Verdict::Fail;
    }
    Ok(check)
}
