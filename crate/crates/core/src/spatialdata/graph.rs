use std::collections::BTreeSet;

use super::{euclidean, DataError, SpatialDataset};
use crate::numkernel::{Matrix, NumError, SymMatrix};

pub const DEFAULT_KNN: usize = 6;

/// Undirected simple graph on `n` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degree: Vec<usize>,
    components: usize,
}

impl SpatialGraph {
    /// Edges are normalized to `(min, max)` and deduplicated. Self-loops and
    /// out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, NumError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(NumError::DimensionMismatch {
                    expected: n,
                    found: a.max(b) + 1,
                });
            }
            if a == b {
                return Err(NumError::DomainError(format!("self-loop on node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut degree = vec![0; n];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let components = count_components(n, &edges);
        Ok(Self {
            n,
            edges,
            degree,
            components,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self) -> &[usize] {
        &self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }
}

fn count_components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut components = n;
    for &(a, b) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            components -= 1;
        }
    }
    components
}

/// Symmetrized k-nearest-neighbour graph: `i ~ j` when either lists the
/// other among its `k` nearest. Distance ties go to the lower index.
pub fn knn_graph(d: &SpatialDataset, k: usize) -> Result<SpatialGraph, DataError> {
    let n = d.n();
    if k == 0 || k >= n {
        return Err(DataError::KTooLarge { k, n });
    }
    let c = d.coords();
    let mut edges = Vec::with_capacity(n * k);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i).map(|j| (euclidean(c[i], c[j]), j)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(order[..k].iter().map(|&(_, j)| (i, j)));
    }
    Ok(SpatialGraph::new(n, edges)?)
}

/// `L = D − W` with binary weights.
pub fn graph_laplacian(g: &SpatialGraph) -> SymMatrix {
    let n = g.n();
    let mut m = Matrix::zeros(n, n);
    for (i, &deg) in g.degree().iter().enumerate() {
        m[(i, i)] = deg as f64;
    }
    for &(a, b) in g.edges() {
        m[(a, b)] = -1.0;
        m[(b, a)] = -1.0;
    }
    SymMatrix::new(m).expect("graph with at least one node")
}
