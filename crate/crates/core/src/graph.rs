//! Weighted communication digraph between the leader (node 0) and the followers.
//!
//! An edge `(parent, child, w)` means `child` receives data from `parent`. The
//! adjacency matrix is stored receiver-major: `a[(i, j)]` is the weight with
//! which agent `i` listens to agent `j`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the virtual leader.
pub const LEADER: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(parent: usize, child: usize, weight: f64) -> Self {
        Self {
            parent,
            child,
            weight,
        }
    }
}

/// A validated digraph with `node_count` nodes, node 0 being the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<Edge>,
    adjacency: DMatrix<f64>,
}

/// Laplacian `L` together with its leader/follower partition.
///
/// `phi` holds the leader-edge weights `a_i0` on its diagonal and `h` is the
/// follower block of `L` (rows and columns 1..=N).
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPartition {
    pub laplacian: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl DirectedGraph {
    /// Validates and builds a graph. Rejects self-loops, nonpositive or
    /// non-finite weights, out-of-range ids, edges into the leader and
    /// duplicate edges.
    pub fn new(node_count: usize, edges: &[Edge]) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: node_count,
            });
        }
        let mut adjacency = DMatrix::zeros(node_count, node_count);
        for e in edges {
            let invalid = |reason: &str| Error::InvalidEdge {
                parent: e.parent,
                child: e.child,
                reason: reason.to_string(),
            };
            if e.parent >= node_count || e.child >= node_count {
                return Err(invalid("node id out of range"));
            }
            if e.parent == e.child {
                return Err(invalid("self-loop"));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(invalid("weight must be finite and strictly positive"));
            }
            if e.child == LEADER {
                return Err(invalid("the leader does not receive data"));
            }
            if adjacency[(e.child, e.parent)] != 0.0 {
                return Err(Error::DuplicateEdge {
                    parent: e.parent,
                    child: e.child,
                });
            }
            adjacency[(e.child, e.parent)] = e.weight;
        }
        Ok(Self {
            node_count,
            edges: edges.to_vec(),
            adjacency,
        })
    }

    /// Unit-weight chain `0 -> 1 -> ... -> followers`.
    pub fn chain(followers: usize) -> Result<Self> {
        let edges: Vec<Edge> = (1..=followers).map(|k| Edge::new(k - 1, k, 1.0)).collect();
        Self::new(followers + 1, &edges)
    }

    /// Unit-weight star: the leader feeds every follower directly.
    pub fn star(followers: usize) -> Result<Self> {
        let edges: Vec<Edge> = (1..=followers).map(|k| Edge::new(LEADER, k, 1.0)).collect();
        Self::new(followers + 1, &edges)
    }

    /// The degenerate network with no followers.
    pub fn leader_only() -> Self {
        Self {
            node_count: 1,
            edges: Vec::new(),
            adjacency: DMatrix::zeros(1, 1),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn follower_count(&self) -> usize {
        self.node_count - 1
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Receiver-major adjacency matrix.
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// `(source, weight)` pairs agent `i` listens to, in ascending source order.
    pub fn in_neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.node_count)
            .filter_map(|j| {
                let w = self.adjacency[(i, j)];
                (w != 0.0).then_some((j, w))
            })
            .collect()
    }

    pub fn laplacian(&self) -> LaplacianPartition {
        let n = self.node_count;
        let mut laplacian = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                let a = self.adjacency[(i, j)];
                if i != j && a != 0.0 {
                    laplacian[(i, j)] = -a;
                    degree += a;
                }
            }
            laplacian[(i, i)] = degree;
        }
        let followers = n - 1;
        let phi = DMatrix::from_fn(followers, followers, |i, j| {
            if i == j {
                self.adjacency[(i + 1, LEADER)]
            } else {
                0.0
            }
        });
        let h = laplacian.view((1, 1), (followers, followers)).into_owned();
        LaplacianPartition { laplacian, phi, h }
    }

    /// True iff every follower is reachable from the leader along edge direction.
    pub fn has_spanning_tree_from_leader(&self) -> bool {
        self.unreachable_followers().is_empty()
    }

    /// Followers that cannot be reached from the leader, in ascending order.
    pub fn unreachable_followers(&self) -> Vec<usize> {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([LEADER]);
        seen[LEADER] = true;
        while let Some(u) = queue.pop_front() {
            for (v, s) in seen.iter_mut().enumerate() {
                if !*s && self.adjacency[(v, u)] != 0.0 {
                    *s = true;
                    queue.push_back(v);
                }
            }
        }
        (1..self.node_count).filter(|&v| !seen[v]).collect()
    }
}

impl LaplacianPartition {
    /// Smallest real part over the eigenvalues of `H`.
    pub fn min_real_eigenvalue_h(&self) -> f64 {
        min_real_eigenvalue(&self.h)
    }
}

/// Smallest real part over the eigenvalues of a square matrix.
pub fn min_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min)
}
