//! Weighted graphs with a speed measure.
//!
//! A [`WeightedGraph`] stores symmetric conductances `π_xy` in compressed
//! adjacency form together with the vertex speed measure `θ_x` and the cached
//! vertex measure `π_x = Σ_y π_xy`. The walk generated by
//! `(L_θ f)(x) = θ_x⁻¹ Σ_y π_xy (f(y) − f(x))` jumps from `x` to `y` with
//! probability `π_xy / π_x` after an exponential holding time of rate
//! `π_x / θ_x`.
//!
//! Graphs are finite, connected and immutable once built.

mod builders;
pub mod io;
mod percolation;
mod union_find;

pub use builders::{build_lattice_box, complete_two, cycle, path, star, EdgeWeights};
pub use percolation::build_percolation_cluster;
pub use union_find::UnionFind;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Choice of the speed measure `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedPreset {
    /// Constant-speed walk, `θ_x = π_x`; unit mean holding times.
    Csrw,
    /// Variable-speed walk, `θ_x = 1`.
    Vsrw,
    /// Arbitrary positive weights, one per vertex.
    Custom(Vec<f64>),
}

/// Finite connected weighted graph with a positive speed measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    theta: Vec<f64>,
    pi_total: Vec<f64>,
    labels: Option<Vec<Vec<i64>>>,
}

impl WeightedGraph {
    /// Builds a graph on vertices `0..n` from an undirected edge list.
    ///
    /// Each edge must appear once (in either orientation), carry a positive
    /// finite weight, and join two distinct vertices. The graph must be
    /// connected.
    pub fn new(n: usize, edges: &[(usize, usize, f64)], speed: SpeedPreset) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut degree = vec![0usize; n];
        for &(x, y, w) in edges {
            if x >= n || y >= n {
                return Err(Error::InvalidGraph(format!("edge ({x}, {y}) out of range 0..{n}")));
            }
            if x == y {
                return Err(Error::InvalidGraph(format!("loop at vertex {x}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidGraph(format!("edge ({x}, {y}) has weight {w}")));
            }
            degree[x] += 1;
            degree[y] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut adj = vec![(0usize, 0.0f64); offsets[n]];
        for &(x, y, w) in edges {
            adj[fill[x]] = (y, w);
            fill[x] += 1;
            adj[fill[y]] = (x, w);
            fill[y] += 1;
        }
        for x in 0..n {
            let row = &mut adj[offsets[x]..offsets[x + 1]];
            row.sort_by_key(|&(y, _)| y);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidGraph(format!("multiple edges at vertex {x}")));
            }
        }
        let (neighbors, weights): (Vec<_>, Vec<_>) = adj.into_iter().unzip();
        let pi_total = (0..n)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();
        let mut g = WeightedGraph {
            offsets,
            neighbors,
            weights,
            theta: Vec::new(),
            pi_total,
            labels: None,
        };
        if !g.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        g.set_speed(speed)?;
        Ok(g)
    }

    /// Returns the same graph with a different speed measure.
    pub fn with_speed(mut self, speed: SpeedPreset) -> Result<Self> {
        self.set_speed(speed)?;
        Ok(self)
    }

    /// Attaches per-vertex coordinate labels (lattice positions) for reports.
    pub fn with_labels(mut self, labels: Vec<Vec<i64>>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    fn set_speed(&mut self, speed: SpeedPreset) -> Result<()> {
        self.theta = match speed {
            SpeedPreset::Csrw => self.pi_total.clone(),
            SpeedPreset::Vsrw => vec![1.0; self.len()],
            SpeedPreset::Custom(theta) => {
                if theta.len() != self.len() {
                    return Err(Error::InvalidParameter(format!(
                        "{} speed weights for {} vertices",
                        theta.len(),
                        self.len()
                    )));
                }
                if let Some(x) = theta.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
                    return Err(Error::InvalidParameter(format!(
                        "theta[{x}] = {} is not positive",
                        theta[x]
                    )));
                }
                theta
            }
        };
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &y in self.neighbor_ids(x) {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == n
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Neighbours of `x` with their conductances, in increasing vertex order.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.neighbors[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn neighbor_ids(&self, x: usize) -> &[usize] {
        &self.neighbors[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    /// Range of adjacency slots belonging to `x`; slot-indexed data such as
    /// edge lengths lines up with [`WeightedGraph::neighbors`].
    pub fn slots(&self, x: usize) -> std::ops::Range<usize> {
        self.offsets[x]..self.offsets[x + 1]
    }

    pub fn slot_target(&self, slot: usize) -> usize {
        self.neighbors[slot]
    }

    pub fn slot_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Conductance `π_xy`, zero when `x` and `y` are not adjacent.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        let ids = self.neighbor_ids(x);
        match ids.binary_search(&y) {
            Ok(i) => self.weights[self.offsets[x] + i],
            Err(_) => 0.0,
        }
    }

    /// Undirected edges `(x, y, π_xy)` with `x < y`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |x| {
            self.neighbors(x).filter(move |&(y, _)| x < y).map(move |(y, w)| (x, y, w))
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn pi_total(&self) -> &[f64] {
        &self.pi_total
    }

    pub fn labels(&self) -> Option<&[Vec<i64>]> {
        self.labels.as_deref()
    }

    /// Smallest speed weight; any admissible `C_θ` is at most this.
    pub fn theta_floor(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total holding rate `π_x / θ_x` at `x`.
    pub fn rate(&self, x: usize) -> f64 {
        self.pi_total[x] / self.theta[x]
    }

    /// `(L_θ f)(x) = θ_x⁻¹ Σ_y π_xy (f(y) − f(x))` at every vertex.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "function length must match vertex count");
        (0..self.len())
            .map(|x| {
                let fx = f[x];
                let s: f64 = self.neighbors(x).map(|(y, w)| w * (f[y] - fx)).sum();
                s / self.theta[x]
            })
            .collect()
    }

    /// Graph (hop-count) distances from `x0`.
    pub fn hop_distances(&self, x0: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        dist[x0] = 0;
        let mut queue = VecDeque::from([x0]);
        while let Some(x) = queue.pop_front() {
            for &y in self.neighbor_ids(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}
