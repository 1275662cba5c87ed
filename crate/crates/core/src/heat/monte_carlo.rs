//! Direct simulation of the walk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Samples are split into this many independent streams regardless of the
/// thread count, so results depend only on the seed.
const CHUNKS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloEstimate {
    pub source: usize,
    pub times: Vec<f64>,
    pub samples: usize,
    /// `values[i][y]` estimates `p_{t_i}(source, y)`.
    pub values: Vec<Vec<f64>>,
    /// One standard error per entry, `sqrt(q(1−q)/n)/θ_y`.
    pub std_err: Vec<Vec<f64>>,
}

fn simulate(g: &WeightedGraph, x0: usize, times: &[f64], n: usize, rng: &mut ChaCha8Rng, hits: &mut [Vec<u64>]) {
    for _ in 0..n {
        let mut x = x0;
        let mut clock = 0.0;
        let mut i = 0;
        while i < times.len() {
            let hold = Exp::new(g.rate(x)).unwrap().sample(rng);
            let next_jump = clock + hold;
            while i < times.len() && times[i] < next_jump {
                hits[i][x] += 1;
                i += 1;
            }
            clock = next_jump;
            let mut u = rng.random::<f64>() * g.pi_total()[x];
            let mut target = x;
            for (y, w) in g.neighbors(x) {
                target = y;
                if u < w {
                    break;
                }
                u -= w;
            }
            x = target;
        }
    }
}

/// Estimates `p_t(x0, ·)` from `samples` independent walks.
pub fn monte_carlo_kernel(
    g: &WeightedGraph,
    x0: usize,
    times: &[f64],
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<MonteCarloEstimate> {
    if x0 >= g.len() {
        return Err(Error::InvalidParameter(format!("source {x0} out of range")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must be finite, nonnegative and ascending".into()));
    }
    let per_chunk: Vec<usize> = (0..CHUNKS)
        .map(|c| samples / CHUNKS + usize::from(c < samples % CHUNKS))
        .collect();
    let threads = threads.clamp(1, CHUNKS);
    let empty = || vec![vec![0u64; g.len()]; times.len()];
    let mut chunk_hits: Vec<Vec<Vec<u64>>> = (0..CHUNKS).map(|_| empty()).collect();
    std::thread::scope(|scope| {
        let mut slots: Vec<Vec<(usize, &mut Vec<Vec<u64>>)>> = (0..threads).map(|_| Vec::new()).collect();
        for (c, h) in chunk_hits.iter_mut().enumerate() {
            slots[c % threads].push((c, h));
        }
        for work in slots {
            let per_chunk = &per_chunk;
            scope.spawn(move || {
                for (c, hits) in work {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    simulate(g, x0, times, per_chunk[c], &mut rng, hits);
                }
            });
        }
    });
    // fixed-order reduction
    let mut total = empty();
    for hits in &chunk_hits {
        for (row, add) in total.iter_mut().zip(hits) {
            for (a, b) in row.iter_mut().zip(add) {
                *a += b;
            }
        }
    }
    let n = samples as f64;
    let theta = g.theta();
    let values = total
        .iter()
        .map(|row| row.iter().zip(theta).map(|(&h, th)| h as f64 / n / th).collect())
        .collect();
    let std_err = total
        .iter()
        .map(|row| {
            row.iter()
                .zip(theta)
                .map(|(&h, th)| {
                    let q = h as f64 / n;
                    (q * (1.0 - q) / n).sqrt() / th
                })
                .collect()
        })
        .collect();
    Ok(MonteCarloEstimate {
        source: x0,
        times: times.to_vec(),
        samples,
        values,
        std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete_two;

    #[test]
    fn deterministic_across_thread_counts() {
        let g = complete_two();
        let a = monte_carlo_kernel(&g, 0, &[0.5, 1.0], 5000, 9, 1).unwrap();
        let b = monte_carlo_kernel(&g, 0, &[0.5, 1.0], 5000, 9, 7).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn k2_within_five_standard_errors() {
        let g = complete_two();
        let est = monte_carlo_kernel(&g, 0, &[0.0, 0.4, 2.0], 40_000, 3, 4).unwrap();
        assert_eq!(est.values[0][0], 1.0);
        for (i, &t) in est.times.iter().enumerate().skip(1) {
            let exact = (1.0 + (-2.0 * t).exp()) / 2.0;
            assert!((est.values[i][0] - exact).abs() < 5.0 * est.std_err[i][0]);
        }
    }
}
