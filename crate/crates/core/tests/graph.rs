use hdcml::graph::{legal_toh_moves, random_connected_graph, toh_graph, Graph, TohState};
use hdcml::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sized_graph() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..=12).prop_flat_map(|n| (Just(n), (n - 1)..=n * (n - 1) / 2, any::<u64>()))
}

proptest! {
    #[test]
    fn random_graphs_are_connected_and_symmetric((n, m, seed) in sized_graph()) {
        let g = random_connected_graph(n, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(g.n(), n);
        prop_assert_eq!(g.e(), 2 * m);
        prop_assert!(g.is_strongly_connected());
        for &(a, b) in g.edges() {
            prop_assert!(a != b);
            prop_assert!(g.has_edge(b, a));
        }
    }

    #[test]
    fn gating_has_one_source_per_edge((n, m, seed) in sized_graph()) {
        let g = random_connected_graph(n, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let gate = g.gating_matrix();
        let total: f64 = gate.column_sums().iter().sum();
        prop_assert_eq!(total, g.e() as f64);
        for c in 0..g.e() {
            let (src, _) = g.edge(c);
            for node in 0..n {
                prop_assert_eq!(gate.get(c, node), if node == src { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn edge_list_round_trips((n, m, seed) in sized_graph()) {
        let g = random_connected_graph(n, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(back.n(), g.n());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn toh_moves_are_reversible(i in 0usize..27) {
        let s = TohState::from_index(i);
        let next = legal_toh_moves(s);
        prop_assert!((2..=3).contains(&next.len()));
        for t in next {
            prop_assert!(legal_toh_moves(t).contains(&s));
            let changed = s.pegs().iter().zip(t.pegs()).filter(|(a, b)| **a != *b).count();
            prop_assert_eq!(changed, 1);
        }
    }
}

#[test]
fn toh_graph_shape() {
    let g = toh_graph();
    assert_eq!(g.n(), 27);
    assert_eq!(g.e(), 78);
    let sums = g.gating_matrix().column_sums();
    assert!(sums.iter().all(|&s| s == 2.0 || s == 3.0));
    assert_eq!(sums.iter().filter(|&&s| s == 2.0).count(), 3);
    for b in TohState::all() {
        assert_eq!(g.label(b.index()), b.to_string());
        assert_eq!(TohState::parse(&b.to_string()), Some(b));
    }
    let from_112: Vec<String> = legal_toh_moves(TohState::new(1, 1, 2)).iter().map(ToString::to_string).collect();
    assert_eq!(from_112, ["111", "113", "132"]);
}

#[test]
fn bfs_on_toh_corners() {
    let g = toh_graph();
    let d = g.bfs(TohState::new(1, 1, 1).index());
    assert_eq!(d[TohState::new(2, 2, 2).index()], Some(7));
    assert_eq!(d[TohState::new(1, 1, 1).index()], Some(0));
}

#[test]
fn small_and_infeasible_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = random_connected_graph(2, 1, &mut rng).unwrap();
    assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
    let gate = g.gating_matrix();
    assert_eq!(gate.0, nalgebra::DMatrix::identity(2, 2));
    let g = random_connected_graph(27, 39, &mut rng).unwrap();
    assert_eq!(g.e(), 78);
    assert!(matches!(random_connected_graph(5, 2, &mut rng), Err(Error::InfeasibleGraph { .. })));
    assert!(matches!(random_connected_graph(4, 7, &mut rng), Err(Error::InfeasibleGraph { .. })));
}

#[test]
fn edge_list_parsing() {
    let g = Graph::from_edge_list("# comment\n3\n0 1\n1 0\n1 2\n2 1\n").unwrap();
    assert_eq!((g.n(), g.e()), (3, 4));
    assert!(Graph::from_edge_list("2\n0 x\n").is_err());
    assert!(Graph::new(2, [(0, 0)]).is_err());
}
