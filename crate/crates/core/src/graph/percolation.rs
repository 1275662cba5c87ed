use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::builders::{lattice_edges, lattice_labels};
use super::{SpeedPreset, UnionFind, WeightedGraph};
use crate::error::{Error, Result};

/// Largest cluster of Bernoulli(`p`) bond percolation on the box `{0..side-1}^d`.
///
/// Each lattice edge, visited in canonical order, is kept when a uniform draw
/// from a ChaCha8 stream seeded with `seed` falls below `p`. The returned
/// graph carries unit conductances, the constant-speed measure, lattice
/// coordinates as labels, and vertices renumbered densely in lattice order.
/// Ties between equally large clusters go to the one containing the smallest
/// lattice index.
pub fn build_percolation_cluster(d: usize, side: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("retention probability must be in (0, 1), got {p}")));
    }
    if d == 2 && p <= 0.5 {
        log::warn!("p = {p} is not supercritical for d = 2 (p_c = 1/2); no giant cluster expected");
    }
    let pairs = lattice_edges(d, side, false)?;
    let n = side.pow(d as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<(usize, usize)> = pairs
        .into_iter()
        .filter(|_| rng.random::<f64>() < p)
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateSample(format!("no edge retained (side {side}, p {p}, seed {seed})")));
    }

    let mut uf = UnionFind::new(n);
    for &(a, b) in &kept {
        uf.union(a, b);
    }
    // first vertex (in lattice order) of a largest set
    let mut best = 0;
    let mut best_size = 0;
    for v in 0..n {
        let s = uf.set_size(v);
        if s > best_size {
            best = v;
            best_size = s;
        }
    }
    let root = uf.find(best);
    let members: Vec<usize> = (0..n).filter(|&v| uf.find(v) == root).collect();
    if members.len() < 2 {
        return Err(Error::DegenerateSample("largest cluster is a single vertex".into()));
    }
    let mut index = vec![usize::MAX; n];
    for (i, &v) in members.iter().enumerate() {
        index[v] = i;
    }
    let edges: Vec<(usize, usize, f64)> = kept
        .iter()
        .filter(|&&(a, _)| index[a] != usize::MAX)
        .map(|&(a, b)| (index[a], index[b], 1.0))
        .collect();
    WeightedGraph::new(members.len(), &edges, SpeedPreset::Csrw)?
        .with_labels(lattice_labels(d, side, &members))
}
