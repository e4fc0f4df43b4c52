use proptest::prelude::*;
use rand::Rng;
use rrgap::graph::{linear_form, linear_form_stats, parse_graph, set_pair_matrix, write_graph};
use rrgap::samplers::sample_uniform_simple;
use rrgap::{AdjacencyMatrix, DenseMatrix, GraphModel, RngStream, VertexSet};

fn random_set<R: Rng>(n: usize, rng: &mut R) -> VertexSet {
    VertexSet::new(n, (0..n).filter(|_| rng.random_bool(0.4))).unwrap()
}

#[test]
fn edge_count_is_a_linear_form() {
    let mut rng = RngStream::new(1, 0).rng();
    for _ in 0..1000 {
        let n = rng.random_range(5..20);
        let d = rng.random_range(1..n);
        if n * d % 2 == 1 {
            continue;
        }
        let a = sample_uniform_simple(n, d, &mut rng).unwrap();
        let (s, t) = (random_set(n, &mut rng), random_set(n, &mut rng));
        let q = set_pair_matrix::<f64>(&s, &t).unwrap();
        // brute-force count of ordered pairs, each edge inside S∩T counted from both ends
        let brute: u64 = s
            .members()
            .iter()
            .flat_map(|&u| t.members().iter().map(move |&v| (u, v)))
            .map(|(u, v)| a.get(u, v) as u64)
            .sum();
        let e = a.edge_count(&s, &t).unwrap();
        assert_eq!(e, brute);
        assert_eq!(linear_form(&q, &a).unwrap(), e as f64);
    }
}

#[test]
fn stats_of_regular_models() {
    let mut rng = RngStream::new(2, 0).rng();
    for _ in 0..200 {
        let n = rng.random_range(6..40);
        let d = 2 * rng.random_range(1..=(n - 2) / 2);
        let q = DenseMatrix::from_fn(n, |u, v| ((u * 7 + v * 7) % 5) as f64 / 4.0);
        for model in [GraphModel::UniformSimple { n, d }, GraphModel::UniformPermutation { n, d }] {
            let st = linear_form_stats(&q, &model.expected_matrix()).unwrap();
            // Q_uv² <= a·Q_uv
            assert!(st.sigma_tilde_sq <= st.a * st.mu + 1e-12);
            let a = model.sample(&mut rng).unwrap();
            assert!(linear_form(&q, &a).unwrap() >= 0.0);
        }
    }
}

#[test]
fn file_examples() {
    let text = "# triangle plus pendant\n4 - 0\n1 2\n2 3\n3 1\n3 4\n";
    let a = parse_graph(text).unwrap();
    assert_eq!(a.degrees(), vec![2, 2, 3, 1]);
    let loops = parse_graph("2 2 1\n1 1 2\n2 2 2\n").unwrap();
    assert!(loops.is_regular(2) && loops.is_multigraph());
    assert!(parse_graph("").is_err());
    assert!(parse_graph("3 2 0\n1 2 x\n").is_err());
    assert!(parse_graph("3 - 0\n0 1\n").is_err());
}

#[test]
fn complement_swaps_edges() {
    let p = AdjacencyMatrix::petersen();
    let c = p.complement().unwrap();
    assert!(c.is_regular(6));
    assert_eq!(c.complement().unwrap(), p);
    for u in 0..10 {
        for v in 0..10 {
            if u != v {
                assert_eq!(p.get(u, v) + c.get(u, v), 1);
            }
        }
    }
}

fn graph_strategy() -> impl Strategy<Value = AdjacencyMatrix> {
    (1usize..12, any::<bool>()).prop_flat_map(|(n, multi)| {
        proptest::collection::vec(0u32..3, n * (n + 1) / 2).prop_map(move |raw| {
            let mut e = vec![0u32; n * n];
            let mut k = 0;
            for u in 0..n {
                for v in u..n {
                    let w = if multi { raw[k] } else { raw[k].min(1) * u32::from(u != v) };
                    // loops add twice their multiplicity to the diagonal
                    let w = if u == v { 2 * w } else { w };
                    e[u * n + v] = w;
                    e[v * n + u] = w;
                    k += 1;
                }
            }
            AdjacencyMatrix::from_entries(n, e, multi).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn write_parse_roundtrip(a in graph_strategy()) {
        prop_assert_eq!(parse_graph(&write_graph(&a)).unwrap(), a);
    }

    #[test]
    fn full_sets_count_twice_the_edges(a in graph_strategy()) {
        let n = a.n();
        let full = VertexSet::full(n);
        prop_assert_eq!(a.edge_count(&full, &full).unwrap(), a.entries().iter().map(|&x| x as u64).sum::<u64>());
        prop_assert_eq!(a.degrees().iter().sum::<u64>(), a.entries().iter().map(|&x| x as u64).sum::<u64>());
    }
}
