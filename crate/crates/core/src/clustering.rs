//! Gating, union-find and the largest isolated clustering (LIC).
//!
//! Two first-sensor components are linked when some second-sensor component
//! falls inside both of their gates. Connected components of that graph,
//! together with the union of their gates, split both index sets into
//! clusters such that every cross-cluster pair has `d > γ`.

use rayon::prelude::*;

use crate::gci::DistanceMatrix;
use crate::scalar::Real;

/// `Ψ(ℓ) = { ℓ' : d(ℓ, ℓ') ≤ γ }` for every first-sensor `ℓ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateTable {
    n2: usize,
    sets: Vec<Vec<usize>>,
}

impl GateTable {
    pub fn from_sets(n2: usize, sets: Vec<Vec<usize>>) -> Self {
        Self { n2, sets }
    }

    pub fn n1(&self) -> usize {
        self.sets.len()
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn gated(&self, l1: usize) -> &[usize] {
        &self.sets[l1]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// First-sensor components gated by each `ℓ'`.
    pub fn buckets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n2];
        for (l1, set) in self.sets.iter().enumerate() {
            for &l2 in set {
                out[l2].push(l1);
            }
        }
        out
    }
}

/// Gate with the boundary included: `d == γ` is inside.
pub fn gate<T: Real>(d: &DistanceMatrix<T>, gamma: T) -> GateTable {
    let sets = (0..d.rows())
        .into_par_iter()
        .map(|i| (0..d.cols()).filter(|&j| d.get(i, j) <= gamma).collect())
        .collect();
    GateTable { n2: d.cols(), sets }
}

/// Undirected graph over first-sensor components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssocGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl AssocGraph {
    /// Edges are normalized to `(min, max)`, deduplicated and sorted;
    /// self-loops are dropped.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|e| e.0 != e.1)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Self { n, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Edge between `ℓ1 ≠ ℓ2` whenever their gates intersect.
pub fn build_graph(gt: &GateTable) -> AssocGraph {
    let edges = gt.buckets().into_iter().flat_map(|members| {
        let pairs: Vec<(usize, usize)> = members
            .iter()
            .enumerate()
            .flat_map(|(k, &a)| members[k + 1..].iter().map(move |&b| (a, b)))
            .collect();
        pairs
    });
    AssocGraph::new(gt.n1(), edges)
}

/// Disjoint-set forest with union by rank and path compression.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Sets with sorted members, ordered by smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            let root = self.find(x);
            if slot[root] == usize::MAX {
                slot[root] = out.len();
                out.push(Vec::new());
            }
            out[slot[root]].push(x);
        }
        out
    }
}

/// Connected components, canonically ordered.
pub fn connected_components(g: &AssocGraph) -> Vec<Vec<usize>> {
    let mut ds = DisjointSet::new(g.vertex_count());
    for &(a, b) in g.edges() {
        ds.union(a, b);
    }
    ds.groups()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterKind {
    /// Both sides nonempty; the only kind that is fused.
    Joint,
    /// A first-sensor component with an empty gate.
    FirstOnly,
    /// A second-sensor component gated by nothing.
    SecondOnly,
}

/// One cluster `(L1_g, L2_g)`, members sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub l1: Vec<usize>,
    pub l2: Vec<usize>,
}

impl Cluster {
    pub fn kind(&self) -> ClusterKind {
        match (self.l1.is_empty(), self.l2.is_empty()) {
            (false, false) => ClusterKind::Joint,
            (false, true) => ClusterKind::FirstOnly,
            _ => ClusterKind::SecondOnly,
        }
    }
}

/// The finest partition of both index sets in which every cross-cluster pair
/// is outside the gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LargestIsolatedClustering {
    n1: usize,
    n2: usize,
    clusters: Vec<Cluster>,
}

impl LargestIsolatedClustering {
    /// Wraps clusters as given; nothing is checked (see
    /// [`is_partition`](Self::is_partition) and [`is_isolated`](Self::is_isolated)).
    pub fn from_clusters(n1: usize, n2: usize, clusters: Vec<Cluster>) -> Self {
        Self { n1, n2, clusters }
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn of_kind(&self, kind: ClusterKind) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.kind() == kind)
    }

    /// The fused (`C_I`) clusters in canonical order.
    pub fn joint(&self) -> impl Iterator<Item = &Cluster> {
        self.of_kind(ClusterKind::Joint)
    }

    /// Both index sets are covered exactly once.
    pub fn is_partition(&self) -> bool {
        let mut seen1 = vec![false; self.n1];
        let mut seen2 = vec![false; self.n2];
        for c in &self.clusters {
            for &i in &c.l1 {
                if i >= self.n1 || std::mem::replace(&mut seen1[i], true) {
                    return false;
                }
            }
            for &j in &c.l2 {
                if j >= self.n2 || std::mem::replace(&mut seen2[j], true) {
                    return false;
                }
            }
        }
        seen1.into_iter().all(|s| s) && seen2.into_iter().all(|s| s)
    }

    /// Every pair `(ℓ, ℓ')` taken from different clusters has `d > γ`.
    pub fn is_isolated<T: Real>(&self, d: &DistanceMatrix<T>, gamma: T) -> bool {
        let mut owner2 = vec![usize::MAX; self.n2];
        for (k, c) in self.clusters.iter().enumerate() {
            for &j in &c.l2 {
                owner2[j] = k;
            }
        }
        self.clusters.iter().enumerate().all(|(k, c)| {
            c.l1.iter()
                .all(|&i| (0..self.n2).all(|j| owner2[j] == k || d.get(i, j) > gamma))
        })
    }
}

/// Assembles the LIC from a partition of the first sensor's indices.
pub fn form_lic(parts: &[Vec<usize>], gt: &GateTable) -> LargestIsolatedClustering {
    let mut covered = vec![false; gt.n2()];
    let mut clusters = Vec::with_capacity(parts.len());
    for part in parts {
        let mut l1 = part.clone();
        l1.sort_unstable();
        let mut l2: Vec<usize> = l1
            .iter()
            .flat_map(|&i| gt.gated(i).iter().copied())
            .collect();
        l2.sort_unstable();
        l2.dedup();
        for &j in &l2 {
            covered[j] = true;
        }
        clusters.push(Cluster { l1, l2 });
    }
    clusters.sort_by_key(|c| c.l1.first().copied().unwrap_or(usize::MAX));
    for (j, seen) in covered.into_iter().enumerate() {
        if !seen {
            clusters.push(Cluster {
                l1: Vec::new(),
                l2: vec![j],
            });
        }
    }
    LargestIsolatedClustering {
        n1: gt.n1(),
        n2: gt.n2(),
        clusters,
    }
}

/// Gate, bucketed union-find and LIC in one pass: all `ℓ` sharing a gated
/// `ℓ'` are unioned directly, which yields the same components as
/// [`build_graph`] without materializing its edges.
pub fn cluster<T: Real>(d: &DistanceMatrix<T>, gamma: T) -> (GateTable, LargestIsolatedClustering) {
    let gt = gate(d, gamma);
    let mut ds = DisjointSet::new(gt.n1());
    for members in gt.buckets() {
        for w in members.windows(2) {
            ds.union(w[0], w[1]);
        }
    }
    let lic = form_lic(&ds.groups(), &gt);
    (gt, lic)
}
