//! Metrics adapted to the speed measure.
//!
//! An admissible metric `d_θ` satisfies, at every vertex `x`,
//!
//! ```text
//! θ_x⁻¹ Σ_{y~x} π_xy d_θ(x,y)² ≤ 1      (i)
//! d_θ(x,y) ≤ 1 for every edge {x,y}     (ii)
//! ```
//!
//! Metrics here are shortest-path metrics over positive edge lengths. The
//! canonical choice `ℓ(x,y) = min(1, √(θ_x/π_x), √(θ_y/π_y))` always passes
//! both conditions, and for the constant-speed walk it is the graph metric.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Absolute slack allowed in both admissibility conditions.
pub const ADAPTED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Canonical,
    GraphMetric,
    UserSupplied,
}

/// Shortest-path metric over per-edge lengths, with a per-source distance cache.
#[derive(Debug)]
pub struct AdaptedMetric<'g> {
    graph: &'g WeightedGraph,
    /// One length per adjacency slot of `graph`.
    lengths: Vec<f64>,
    provenance: Provenance,
    cache: Vec<OnceLock<Arc<Vec<f64>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Visit(f64, usize);

impl Eq for Visit {}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'g> AdaptedMetric<'g> {
    fn from_lengths(graph: &'g WeightedGraph, lengths: Vec<f64>, provenance: Provenance) -> Self {
        AdaptedMetric {
            graph,
            lengths,
            provenance,
            cache: (0..graph.len()).map(|_| OnceLock::new()).collect(),
        }
    }

    /// `ℓ(x,y) = min(1, √(θ_x/π_x), √(θ_y/π_y))`.
    pub fn canonical(graph: &'g WeightedGraph) -> Self {
        let scale: Vec<f64> = (0..graph.len())
            .map(|x| (graph.theta()[x] / graph.pi_total()[x]).sqrt())
            .collect();
        let mut lengths = vec![0.0; graph.slot_count()];
        for x in 0..graph.len() {
            for slot in graph.slots(x) {
                let y = graph.slot_target(slot);
                lengths[slot] = 1.0f64.min(scale[x]).min(scale[y]);
            }
        }
        Self::from_lengths(graph, lengths, Provenance::Canonical)
    }

    /// Unit edge lengths. Admissible for the constant-speed walk, not in general.
    pub fn graph_metric(graph: &'g WeightedGraph) -> Self {
        Self::from_lengths(graph, vec![1.0; graph.slot_count()], Provenance::GraphMetric)
    }

    /// Lengths given per undirected edge; edges not listed keep the canonical length.
    pub fn user_supplied(graph: &'g WeightedGraph, overrides: &HashMap<(usize, usize), f64>) -> Result<Self> {
        let mut m = Self::canonical(graph);
        for (&(a, b), &len) in overrides {
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidParameter(format!("length of {{{a}, {b}}} must be positive, got {len}")));
            }
            if a >= graph.len() || b >= graph.len() || graph.weight(a, b) == 0.0 {
                return Err(Error::InvalidParameter(format!("{{{a}, {b}}} is not an edge")));
            }
            for (x, y) in [(a, b), (b, a)] {
                let slot = graph.slots(x).find(|&s| graph.slot_target(s) == y).unwrap();
                m.lengths[slot] = len;
            }
        }
        m.provenance = Provenance::UserSupplied;
        Ok(m)
    }

    /// Reads `l <id1> <id2> <length>` records; `#` starts a comment.
    pub fn load(graph: &'g WeightedGraph, path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(graph, &std::fs::read_to_string(path)?)
    }

    pub fn parse(graph: &'g WeightedGraph, text: &str) -> Result<Self> {
        let mut overrides = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Validation { line, message };
            let toks: Vec<&str> = content.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "l" {
                return Err(bad(format!("expected `l <id1> <id2> <length>`, got {content:?}")));
            }
            let a: usize = toks[1].parse().map_err(|_| bad(format!("bad id {:?}", toks[1])))?;
            let b: usize = toks[2].parse().map_err(|_| bad(format!("bad id {:?}", toks[2])))?;
            let len: f64 = toks[3].parse().map_err(|_| bad(format!("bad length {:?}", toks[3])))?;
            if a >= graph.len() || b >= graph.len() || graph.weight(a, b) == 0.0 {
                return Err(bad(format!("{{{a}, {b}}} is not an edge")));
            }
            if !(len > 0.0 && len.is_finite()) {
                return Err(bad(format!("length must be positive, got {len}")));
            }
            let key = (a.min(b), a.max(b));
            if let Some(prev) = overrides.insert(key, len) {
                if prev != len {
                    return Err(bad(format!("conflicting lengths {prev} and {len} for {{{a}, {b}}}")));
                }
            }
        }
        Self::user_supplied(graph, &overrides)
    }

    /// Same lengths multiplied by `factor` (user-supplied provenance).
    pub fn scaled(&self, factor: f64) -> Self {
        let lengths = self.lengths.iter().map(|l| l * factor).collect();
        Self::from_lengths(self.graph, lengths, Provenance::UserSupplied)
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Length of the edge stored in adjacency slot `slot`.
    pub fn edge_length(&self, slot: usize) -> f64 {
        self.lengths[slot]
    }

    /// Single-source shortest-path distances, cached per source.
    pub fn distances_from(&self, x0: usize) -> Arc<Vec<f64>> {
        self.cache[x0]
            .get_or_init(|| Arc::new(self.dijkstra(x0, f64::INFINITY)))
            .clone()
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.distances_from(x)[y]
    }

    /// Dijkstra from `x0`, not expanding vertices farther than `limit`.
    fn dijkstra(&self, x0: usize, limit: f64) -> Vec<f64> {
        let g = self.graph;
        let mut dist = vec![f64::INFINITY; g.len()];
        let mut heap = BinaryHeap::new();
        dist[x0] = 0.0;
        heap.push(Visit(0.0, x0));
        while let Some(Visit(d, x)) = heap.pop() {
            if d > dist[x] || d > limit {
                continue;
            }
            for slot in g.slots(x) {
                let y = g.slot_target(slot);
                let nd = d + self.lengths[slot];
                if nd < dist[y] {
                    dist[y] = nd;
                    heap.push(Visit(nd, y));
                }
            }
        }
        dist
    }

    /// Closed ball `{y : d(x, y) ≤ r}`, members in increasing order.
    pub fn ball(&self, x: usize, r: f64) -> Ball {
        assert!(r >= 0.0, "radius must be nonnegative");
        let d = self.distances_from(x);
        Ball {
            center: x,
            radius: r,
            members: (0..d.len()).filter(|&y| d[y] <= r).collect(),
        }
    }

    /// Checks both admissibility conditions with exact edge distances.
    pub fn verify(&self) -> AdaptedReport {
        let g = self.graph;
        let mut vertex_slack = Vec::with_capacity(g.len());
        let mut edge_slack = Vec::new();
        for x in 0..g.len() {
            let reach = g.slots(x).map(|s| self.lengths[s]).fold(0.0, f64::max);
            let local = self.dijkstra(x, reach);
            let mut sum = 0.0;
            for (y, w) in g.neighbors(x) {
                let d = local[y];
                sum += w * d * d;
                if x < y {
                    edge_slack.push(EdgeSlack { x, y, distance: d, slack: 1.0 - d });
                }
            }
            let value = sum / g.theta()[x];
            vertex_slack.push(VertexSlack { x, value, slack: 1.0 - value });
        }
        let passed = vertex_slack.iter().all(|v| v.slack >= -ADAPTED_TOL)
            && edge_slack.iter().all(|e| e.slack >= -ADAPTED_TOL);
        AdaptedReport {
            provenance: self.provenance,
            passed,
            vertex_slack,
            edge_slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

impl Ball {
    pub fn contains(&self, y: usize) -> bool {
        self.members.binary_search(&y).is_ok()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexSlack {
    pub x: usize,
    /// `θ_x⁻¹ Σ_y π_xy d(x,y)²`
    pub value: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSlack {
    pub x: usize,
    pub y: usize,
    pub distance: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptedReport {
    pub provenance: Provenance,
    pub passed: bool,
    pub vertex_slack: Vec<VertexSlack>,
    pub edge_slack: Vec<EdgeSlack>,
}

impl AdaptedReport {
    /// Up to `k` vertices with the smallest condition-(i) slack.
    pub fn worst_vertices(&self, k: usize) -> Vec<&VertexSlack> {
        let mut v: Vec<_> = self.vertex_slack.iter().collect();
        v.sort_by(|a, b| a.slack.total_cmp(&b.slack));
        v.truncate(k);
        v
    }

    /// Up to `k` edges with the smallest condition-(ii) slack.
    pub fn worst_edges(&self, k: usize) -> Vec<&EdgeSlack> {
        let mut v: Vec<_> = self.edge_slack.iter().collect();
        v.sort_by(|a, b| a.slack.total_cmp(&b.slack));
        v.truncate(k);
        v
    }

    pub fn min_vertex_slack(&self) -> f64 {
        self.vertex_slack.iter().map(|v| v.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn min_edge_slack(&self) -> f64 {
        self.edge_slack.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_lattice_box, complete_two, path, star, EdgeWeights, SpeedPreset};
    use proptest::prelude::*;

    #[test]
    fn k2_canonical() {
        let g = complete_two();
        let m = AdaptedMetric::canonical(&g);
        assert_eq!(m.edge_length(0), 1.0);
        assert_eq!(*m.distances_from(0), vec![0.0, 1.0]);
    }

    #[test]
    fn path_distances() {
        let g = path(3).unwrap();
        let m = AdaptedMetric::canonical(&g);
        assert_eq!(*m.distances_from(0), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn star_center_length() {
        // centre: pi = 4, theta = 1; leaves: pi = 1, theta = 1
        let g = star(4, 1.0).unwrap().with_speed(SpeedPreset::Vsrw).unwrap();
        let m = AdaptedMetric::canonical(&g);
        for slot in g.slots(0) {
            assert_eq!(m.edge_length(slot), 0.5);
        }
        assert!(m.verify().passed);
    }

    #[test]
    fn graph_metric_fails_on_vsrw_star() {
        let g = star(4, 1.0).unwrap().with_speed(SpeedPreset::Vsrw).unwrap();
        let report = AdaptedMetric::graph_metric(&g).verify();
        assert!(!report.passed);
        let worst = report.worst_vertices(1)[0];
        assert_eq!(worst.x, 0);
        assert_eq!(worst.value, 4.0);
    }

    #[test]
    fn doubled_metric_fails_edge_condition() {
        let g = complete_two();
        let report = AdaptedMetric::canonical(&g).scaled(2.0).verify();
        assert!(!report.passed);
        assert_eq!(report.min_edge_slack(), -1.0);
    }

    #[test]
    fn canonical_on_torus_passes() {
        let g = build_lattice_box(2, 16, true, EdgeWeights::Constant(1.0)).unwrap();
        assert!(AdaptedMetric::canonical(&g).verify().passed);
    }

    #[test]
    fn balls() {
        let g = complete_two();
        let m = AdaptedMetric::canonical(&g);
        assert_eq!(m.ball(0, 0.0).members, vec![0]);
        assert_eq!(m.ball(0, 1.0).members, vec![0, 1]);
        let t = build_lattice_box(2, 5, false, EdgeWeights::Constant(1.0)).unwrap();
        let mt = AdaptedMetric::canonical(&t);
        assert_eq!(mt.ball(3, 100.0).members.len(), 25);
    }

    #[test]
    fn metric_file_overrides() {
        let g = path(3).unwrap();
        let m = AdaptedMetric::parse(&g, "# shorter first edge\nl 0 1 0.25\n").unwrap();
        assert_eq!(m.provenance(), Provenance::UserSupplied);
        assert_eq!(*m.distances_from(0), vec![0.0, 0.25, 1.25]);
        assert!(AdaptedMetric::parse(&g, "l 0 2 0.5\n").is_err());
        assert!(AdaptedMetric::parse(&g, "l 0 1 -1\n").is_err());
        assert!(AdaptedMetric::parse(&g, "l 0 1 0.5\nl 1 0 0.6\n").is_err());
    }

    #[test]
    fn shortcut_edge_uses_path_distance() {
        // triangle where the direct edge is long but a two-hop path is short
        let g = crate::graph::cycle(3).unwrap();
        let m = AdaptedMetric::parse(&g, "l 0 1 0.2\nl 1 2 0.2\nl 0 2 5\n").unwrap();
        let report = m.verify();
        let e = report.edge_slack.iter().find(|e| (e.x, e.y) == (0, 2)).unwrap();
        assert!((e.distance - 0.4).abs() < 1e-15);
        assert!(report.passed);
    }

    fn weighted_box() -> impl Strategy<Value = WeightedGraph> {
        (2usize..5, proptest::collection::vec(0.1f64..10.0, 40), proptest::collection::vec(0.05f64..5.0, 25))
            .prop_map(|(side, w, th)| {
                let edges = 2 * side * (side - 1);
                build_lattice_box(2, side, false, EdgeWeights::PerEdge(w[..edges].to_vec()))
                    .unwrap()
                    .with_speed(SpeedPreset::Custom(th[..side * side].to_vec()))
                    .unwrap()
            })
    }

    proptest! {
        #[test]
        fn canonical_always_admissible(g in weighted_box()) {
            prop_assert!(AdaptedMetric::canonical(&g).verify().passed);
        }

        #[test]
        fn triangle_inequality(g in weighted_box(), a in 0usize..25, b in 0usize..25, c in 0usize..25) {
            let n = g.len();
            let (a, b, c) = (a % n, b % n, c % n);
            let m = AdaptedMetric::canonical(&g);
            prop_assert_eq!(m.distance(a, a), 0.0);
            prop_assert!((m.distance(a, b) - m.distance(b, a)).abs() <= 1e-12);
            prop_assert!(m.distance(a, c) <= m.distance(a, b) + m.distance(b, c) + 1e-12);
        }

        #[test]
        fn balls_are_monotone(g in weighted_box(), x in 0usize..25, r1 in 0.0f64..3.0, dr in 0.0f64..3.0) {
            let m = AdaptedMetric::canonical(&g);
            let x = x % g.len();
            let small = m.ball(x, r1);
            let big = m.ball(x, r1 + dr);
            prop_assert!(small.members.iter().all(|y| big.contains(*y)));
        }

        #[test]
        fn csrw_canonical_is_hop_distance(side in 2usize..7, torus in any::<bool>(), x in 0usize..49) {
            let g = build_lattice_box(2, side, torus, EdgeWeights::Constant(1.0)).unwrap();
            let x = x % g.len();
            let m = AdaptedMetric::canonical(&g);
            let d = m.distances_from(x);
            let hops = g.hop_distances(x);
            for y in 0..g.len() {
                prop_assert_eq!(d[y], hops[y] as f64);
            }
        }
    }
}
