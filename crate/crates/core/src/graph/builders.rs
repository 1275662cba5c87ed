use super::{SpeedPreset, WeightedGraph};
use crate::error::{Error, Result};

/// Edge conductances for the lattice builders.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeWeights {
    Constant(f64),
    /// One weight per edge in the builder's canonical edge order.
    PerEdge(Vec<f64>),
}

/// Nearest-neighbour edges of `{0..side-1}^d` in canonical order.
///
/// Vertex index is `Σ_i c_i side^i` (axis 0 fastest). Edges are listed by
/// increasing lower endpoint, then by axis. With `torus` the wrap-around
/// edge `side-1 ~ 0` is added on every axis, except for `side == 2` where it
/// would duplicate an existing edge.
pub(crate) fn lattice_edges(d: usize, side: usize, torus: bool) -> Result<Vec<(usize, usize)>> {
    if d < 1 {
        return Err(Error::InvalidParameter(format!("dimension must be >= 1, got {d}")));
    }
    if side < 2 {
        return Err(Error::InvalidParameter(format!("side must be >= 2, got {side}")));
    }
    let n = side
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidParameter("lattice too large".into()))?;
    let mut edges = Vec::with_capacity(n * d);
    for v in 0..n {
        let mut stride = 1;
        for _axis in 0..d {
            let c = (v / stride) % side;
            if c + 1 < side {
                edges.push((v, v + stride));
            } else if torus && side > 2 {
                edges.push((v - c * stride, v));
            }
            stride *= side;
        }
    }
    Ok(edges)
}

pub(crate) fn lattice_labels(d: usize, side: usize, vertices: &[usize]) -> Vec<Vec<i64>> {
    vertices
        .iter()
        .map(|&v| {
            let mut rest = v;
            (0..d)
                .map(|_| {
                    let c = rest % side;
                    rest /= side;
                    c as i64
                })
                .collect()
        })
        .collect()
}

/// Lattice box `{0..side-1}^d`, optionally with periodic boundary.
///
/// The speed measure is the constant-speed one (`θ = π`); switch with
/// [`WeightedGraph::with_speed`].
pub fn build_lattice_box(d: usize, side: usize, torus: bool, weights: EdgeWeights) -> Result<WeightedGraph> {
    let pairs = lattice_edges(d, side, torus)?;
    let edges: Vec<(usize, usize, f64)> = match weights {
        EdgeWeights::Constant(w) => pairs.iter().map(|&(a, b)| (a, b, w)).collect(),
        EdgeWeights::PerEdge(ws) => {
            if ws.len() != pairs.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} weights for {} lattice edges",
                    ws.len(),
                    pairs.len()
                )));
            }
            pairs.iter().zip(ws).map(|(&(a, b), w)| (a, b, w)).collect()
        }
    };
    let n = side.pow(d as u32);
    let all: Vec<usize> = (0..n).collect();
    WeightedGraph::new(n, &edges, SpeedPreset::Csrw)?.with_labels(lattice_labels(d, side, &all))
}

/// The two-vertex graph `K2` with a unit edge.
pub fn complete_two() -> WeightedGraph {
    WeightedGraph::new(2, &[(0, 1, 1.0)], SpeedPreset::Csrw).expect("K2 is valid")
}

/// Path `0 - 1 - ... - (n-1)` with unit weights.
pub fn path(n: usize) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("path needs >= 2 vertices, got {n}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    WeightedGraph::new(n, &edges, SpeedPreset::Csrw)
}

/// Cycle on `n >= 3` vertices with unit weights.
pub fn cycle(n: usize) -> Result<WeightedGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("cycle needs >= 3 vertices, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    WeightedGraph::new(n, &edges, SpeedPreset::Csrw)
}

/// Star with centre `0` and `leaves` leaves, each spoke of conductance `w`.
pub fn star(leaves: usize, w: f64) -> Result<WeightedGraph> {
    if leaves < 1 {
        return Err(Error::InvalidParameter("star needs at least one leaf".into()));
    }
    let edges: Vec<_> = (1..=leaves).map(|i| (0, i, w)).collect();
    WeightedGraph::new(leaves + 1, &edges, SpeedPreset::Csrw)
}
