use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_DOUBLINGS: u32 = 64;

/// `inf_{λ>0} (f(λ) − λs)` for `f` with a unimodal `f(λ) − λs`.
///
/// Without a bracket the search starts on `[0, 1]` and doubles the right end
/// while the objective keeps decreasing there; after 64 doublings the
/// infimum is reported as divergent.
pub fn legendre(f: impl Fn(f64) -> f64, s: f64, bracket: Option<(f64, f64)>) -> Result<f64> {
    let h = |x: f64| f(x) - x * s;
    let (mut lo, mut hi) = bracket.unwrap_or((0.0, 1.0));
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bad bracket ({lo}, {hi})")));
    }
    if bracket.is_none() {
        let mut n = 0;
        while h(2.0 * hi) < h(hi) {
            lo = hi / 2.0;
            hi *= 2.0;
            n += 1;
            if n >= MAX_DOUBLINGS {
                return Err(Error::Diverges(format!(
                    "objective still decreasing at λ = {hi:e} for s = {s}"
                )));
            }
        }
        hi *= 2.0;
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut hc, mut hd) = (h(c), h(d));
    while b - a > 1e-10 * (1.0 + c.abs()) {
        if hc < hd {
            b = d;
            d = c;
            hd = hc;
            c = b - GOLDEN * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + GOLDEN * (b - a);
            hd = h(d);
        }
    }
    Ok([h(a), h(b), hc, hd].into_iter().fold(f64::INFINITY, f64::min))
}
