use std::collections::BTreeMap;

use combscatter::graphs::{analyze_topology, export_dot, CorrelationGraph, TopologyLabel};
use proptest::prelude::*;

fn graph(edges: &[(i64, i64)]) -> CorrelationGraph {
    CorrelationGraph::from_parts([], edges.iter().map(|&(a, b)| (a, b, -10.0)), [], -20.0)
}

/// Ladder with rails `a_k = 2k`, `b_k = 2k + 1`, `k < len`.
fn ladder(len: i64) -> Vec<(i64, i64)> {
    let mut e = Vec::new();
    for k in 0..len {
        e.push((2 * k, 2 * k + 1));
        if k + 1 < len {
            e.push((2 * k, 2 * k + 2));
            e.push((2 * k + 1, 2 * k + 3));
        }
    }
    e
}

fn single_label(edges: &[(i64, i64)]) -> TopologyLabel {
    let r = analyze_topology(&graph(edges));
    assert_eq!(r.labels.len(), 1, "{edges:?}");
    r.labels[0]
}

#[test]
fn basic_shapes() {
    assert_eq!(single_label(&[(0, 1)]), TopologyLabel::Pair);
    assert_eq!(single_label(&[(0, 1), (1, 2), (2, 3)]), TopologyLabel::Chain);
    assert_eq!(single_label(&ladder(5)), TopologyLabel::SquareLadder);
    let mut diag = ladder(5);
    diag.push((0, 3));
    diag.push((4, 7));
    assert_eq!(single_label(&diag), TopologyLabel::LadderWithDiagonals);
    let ring: Vec<(i64, i64)> = (0..6).map(|k| (k, (k + 1) % 6)).collect();
    assert_eq!(single_label(&ring), TopologyLabel::Other);
    let star = [(0, 1), (0, 2), (0, 3), (0, 4)];
    assert_eq!(single_label(&star), TopologyLabel::Other);
    let mut nnn = ladder(5);
    nnn.push((0, 4));
    assert_eq!(single_label(&nnn), TopologyLabel::Other);
}

#[test]
fn ladder_with_pendant_end() {
    let mut e = ladder(5);
    e.push((8, 10));
    assert_eq!(single_label(&e), TopologyLabel::SquareLadder);
}

#[test]
fn dot_export_is_deterministic() {
    let g = graph(&ladder(3));
    let r = analyze_topology(&g);
    let a = export_dot(&g, &r);
    assert_eq!(a, export_dot(&g, &r));
    assert!(a.contains("graph correlations {"));
    assert!(a.contains("\"0\" -- \"1\""));
}

proptest! {
    #[test]
    fn labels_survive_relabeling(
        len in 2i64..12,
        shift in -100i64..100,
        extra in prop::collection::vec((0i64..24, 0i64..24), 0..4),
    ) {
        let mut e = ladder(len);
        e.extend(extra.into_iter().filter(|(a, b)| a != b && *a < 2 * len && *b < 2 * len));
        let g = graph(&e);
        let mirrored = g.relabeled(|n| shift - n);
        let label_of = |g: &CorrelationGraph| -> BTreeMap<usize, Vec<TopologyLabel>> {
            let r = analyze_topology(g);
            let mut m: BTreeMap<usize, Vec<TopologyLabel>> = BTreeMap::new();
            for (c, l) in r.components.iter().zip(&r.labels) {
                m.entry(c.len()).or_default().push(*l);
            }
            for v in m.values_mut() {
                v.sort_by_key(|l| l.as_str());
            }
            m
        };
        prop_assert_eq!(label_of(&g), label_of(&mirrored));
    }

    #[test]
    fn components_partition_nodes(edges in prop::collection::vec((-20i64..20, -20i64..20), 0..60)) {
        let g = graph(&edges);
        let r = analyze_topology(&g);
        let mut all: Vec<i64> = r.components.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, g.nodes().to_vec());
        for e in g.edges() {
            let ca = r.components.iter().position(|c| c.contains(&e.a));
            let cb = r.components.iter().position(|c| c.contains(&e.b));
            prop_assert_eq!(ca, cb);
        }
    }
}
