use dalc::graph::{min_real_eigenvalue, DirectedGraph, Edge};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random edge lists over up to 6 followers. Edges into the leader and
/// self-loops are filtered, duplicates collapsed.
fn edge_lists() -> impl Strategy<Value = (usize, Vec<Edge>)> {
    (2usize..=7).prop_flat_map(|nodes| {
        let edge = (0..nodes, 1..nodes, 0.1f64..3.0);
        (
            Just(nodes),
            proptest::collection::vec(edge, 0..(nodes * nodes)).prop_map(|raw| {
                let mut seen = std::collections::BTreeSet::new();
                raw.into_iter()
                    .filter(|&(p, c, _)| p != c && seen.insert((p, c)))
                    .map(|(p, c, w)| Edge::new(p, c, w))
                    .collect()
            }),
        )
    })
}

/// Warshall transitive closure.
fn reachable_from_leader(nodes: usize, edges: &[Edge]) -> bool {
    let mut reach = vec![vec![false; nodes]; nodes];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for e in edges {
        reach[e.parent][e.child] = true;
    }
    for k in 0..nodes {
        for i in 0..nodes {
            for j in 0..nodes {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach[0].iter().all(|&r| r)
}

proptest! {
    #[test]
    fn laplacian_rows_sum_to_zero((nodes, edges) in edge_lists()) {
        let g = DirectedGraph::new(nodes, &edges).unwrap();
        let p = g.laplacian();
        for i in 0..nodes {
            let sum: f64 = p.laplacian.row(i).iter().sum();
            let scale: f64 = p.laplacian.row(i).iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!(sum.abs() <= 1e-12 * scale, "row {i} sums to {sum}");
        }
        // Off-diagonals non-positive, diagonal non-negative.
        for i in 0..nodes {
            for j in 0..nodes {
                let v = p.laplacian[(i, j)];
                let sign_ok = if i == j { v >= 0.0 } else { v <= 0.0 };
                prop_assert!(sign_ok, "entry ({}, {}) = {}", i, j, v);
            }
        }
    }

    #[test]
    fn partition_reassembles((nodes, edges) in edge_lists()) {
        let g = DirectedGraph::new(nodes, &edges).unwrap();
        let p = g.laplacian();
        let n = nodes - 1;
        let expected: DMatrix<f64> = p.laplacian.view((1, 1), (n, n)).into();
        prop_assert_eq!(&p.h, &expected);
        for i in 0..n {
            prop_assert_eq!(p.phi[(i, i)], g.adjacency()[(i + 1, 0)]);
        }
    }

    #[test]
    fn spanning_tree_iff_h_is_positive_stable((nodes, edges) in edge_lists()) {
        let g = DirectedGraph::new(nodes, &edges).unwrap();
        let oracle = reachable_from_leader(nodes, &edges);
        prop_assert_eq!(g.has_spanning_tree_from_leader(), oracle);
        let min_re = g.laplacian().min_real_eigenvalue_h();
        if oracle {
            prop_assert!(min_re > 1e-9, "reachable but min Re = {min_re}");
        } else {
            prop_assert!(min_re < 1e-9, "unreachable but min Re = {min_re}");
        }
    }

    #[test]
    fn follower_relabeling_preserves_spectrum_and_reachability(
        (nodes, edges) in edge_lists(),
        seed in any::<u64>(),
    ) {
        let n = nodes - 1;
        let mut perm: Vec<usize> = (1..nodes).collect();
        // Fisher-Yates driven by a splitmix-style sequence.
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let j = (s >> 33) as usize % (i + 1);
            perm.swap(i, j);
        }
        let relabel = |v: usize| if v == 0 { 0 } else { perm[v - 1] };
        let moved: Vec<Edge> = edges
            .iter()
            .map(|e| Edge::new(relabel(e.parent), relabel(e.child), e.weight))
            .collect();
        let a = DirectedGraph::new(nodes, &edges).unwrap();
        let b = DirectedGraph::new(nodes, &moved).unwrap();
        prop_assert_eq!(a.has_spanning_tree_from_leader(), b.has_spanning_tree_from_leader());
        let (ea, eb) = (a.laplacian().min_real_eigenvalue_h(), b.laplacian().min_real_eigenvalue_h());
        prop_assert!((ea - eb).abs() <= 1e-6, "{ea} vs {eb}");
        for i in 1..nodes {
            prop_assert_eq!(
                a.adjacency()[(i, 0)],
                b.adjacency()[(relabel(i), 0)]
            );
        }
    }
}

#[test]
fn min_eigenvalue_of_diagonal_matrix() {
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -0.5, 2.0]));
    assert_eq!(min_real_eigenvalue(&m), -0.5);
}
