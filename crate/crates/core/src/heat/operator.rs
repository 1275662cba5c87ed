use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Generator `L_θ` restricted to a vertex subset with zero boundary values.
///
/// Holding rates use the full vertex measure `π_x`, so mass leaking out of
/// the subset is killed.
#[derive(Debug, Clone)]
pub(crate) struct RestrictedOperator {
    pub vertices: Vec<usize>,
    pub local: Vec<usize>,
    offsets: Vec<usize>,
    nbr: Vec<usize>,
    /// `π_xy / θ_x` for every stored neighbour.
    jump_rate: Vec<f64>,
    pub theta: Vec<f64>,
    /// `π_x / θ_x`.
    pub rate: Vec<f64>,
    pub full: bool,
}

impl RestrictedOperator {
    pub fn new(g: &WeightedGraph, subset: &[usize]) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::InvalidParameter("empty subset".into()));
        }
        let mut vertices = subset.to_vec();
        vertices.sort_unstable();
        vertices.dedup();
        if *vertices.last().unwrap() >= g.len() {
            return Err(Error::InvalidParameter("subset vertex out of range".into()));
        }
        let mut local = vec![usize::MAX; g.len()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let mut offsets = vec![0];
        let mut nbr = Vec::new();
        let mut jump_rate = Vec::new();
        let mut theta = Vec::with_capacity(vertices.len());
        let mut rate = Vec::with_capacity(vertices.len());
        for &v in &vertices {
            let th = g.theta()[v];
            for (y, w) in g.neighbors(v) {
                if local[y] != usize::MAX {
                    nbr.push(local[y]);
                    jump_rate.push(w / th);
                }
            }
            offsets.push(nbr.len());
            theta.push(th);
            rate.push(g.rate(v));
        }
        let full = vertices.len() == g.len();
        Ok(RestrictedOperator {
            vertices,
            local,
            offsets,
            nbr,
            jump_rate,
            theta,
            rate,
            full,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn max_rate(&self) -> f64 {
        self.rate.iter().copied().fold(0.0, f64::max)
    }

    /// `out = (I + L/Λ) v`, a nonnegative substochastic map when `Λ ≥ max rate`.
    pub fn uniformized_step(&self, lambda: f64, v: &[f64], out: &mut [f64]) {
        for x in 0..self.len() {
            let mut acc = v[x] * (1.0 - self.rate[x] / lambda);
            for k in self.offsets[x]..self.offsets[x + 1] {
                acc += self.jump_rate[k] / lambda * v[self.nbr[k]];
            }
            out[x] = acc;
        }
    }

    /// Symmetrised `−L` on `ℓ²(θ)`: `S = Θ^{1/2} (−L) Θ^{-1/2}`, applied to `v`.
    pub fn apply_symmetric(&self, v: &[f64], out: &mut [f64]) {
        for x in 0..self.len() {
            let sx = self.theta[x].sqrt();
            let mut acc = self.rate[x] * v[x];
            for k in self.offsets[x]..self.offsets[x + 1] {
                let y = self.nbr[k];
                // π_xy / sqrt(θ_x θ_y) = jump_rate * sqrt(θ_x / θ_y)
                acc -= self.jump_rate[k] * sx / self.theta[y].sqrt() * v[y];
            }
            out[x] = acc;
        }
    }

    pub fn dense_symmetric(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for x in 0..n {
            m[(x, x)] = self.rate[x];
            let sx = self.theta[x].sqrt();
            for k in self.offsets[x]..self.offsets[x + 1] {
                let y = self.nbr[k];
                m[(x, y)] = -self.jump_rate[k] * sx / self.theta[y].sqrt();
            }
        }
        // symmetrise rounding
        let t = m.transpose();
        (m + t) * 0.5
    }
}
