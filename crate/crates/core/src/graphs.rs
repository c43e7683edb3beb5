//! Thresholded correlation graphs, components and topology labels.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::basis::{self, Component};
use crate::scattering::DbMatrix;

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub a: i64,
    pub b: i64,
    pub weight_db: f64,
}

impl Edge {
    pub fn key(&self) -> (i64, i64) {
        (self.a, self.b)
    }
}

/// Degenerate `a_i ↔ a*_i` connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfLoop {
    pub node: i64,
    pub weight_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationGraph {
    nodes: Vec<i64>,
    edges: Vec<Edge>,
    self_loops: Vec<SelfLoop>,
    threshold_db: f64,
}

impl CorrelationGraph {
    /// Build from explicit parts; pairs are normalized to `a < b`, duplicates
    /// keep the larger weight, and endpoints are added to the node set.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = i64>,
        edges: impl IntoIterator<Item = (i64, i64, f64)>,
        self_loops: impl IntoIterator<Item = (i64, f64)>,
        threshold_db: f64,
    ) -> Self {
        let mut node_set: BTreeSet<i64> = nodes.into_iter().collect();
        let mut best: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for (i, j, w) in edges {
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            node_set.insert(i);
            node_set.insert(j);
            let e = best.entry(key).or_insert(w);
            *e = e.max(w);
        }
        let mut loops: BTreeMap<i64, f64> = BTreeMap::new();
        for (i, w) in self_loops {
            node_set.insert(i);
            let e = loops.entry(i).or_insert(w);
            *e = e.max(w);
        }
        Self {
            nodes: node_set.into_iter().collect(),
            edges: best
                .into_iter()
                .map(|((a, b), weight_db)| Edge { a, b, weight_db })
                .collect(),
            self_loops: loops
                .into_iter()
                .map(|(node, weight_db)| SelfLoop { node, weight_db })
                .collect(),
            threshold_db,
        }
    }

    pub fn nodes(&self) -> &[i64] {
        &self.nodes
    }

    /// Edges sorted by `(a, b)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn self_loops(&self) -> &[SelfLoop] {
        &self.self_loops
    }

    pub fn threshold_db(&self) -> f64 {
        self.threshold_db
    }

    pub fn edge_keys(&self) -> BTreeSet<(i64, i64)> {
        self.edges.iter().map(Edge::key).collect()
    }

    pub fn has_edge(&self, i: i64, j: i64) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search_by(|e| e.key().cmp(&key)).is_ok()
    }

    /// Ascending neighbor list of a node.
    pub fn neighbors(&self, node: i64) -> Vec<i64> {
        let mut out: Vec<i64> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.a == node {
                    Some(e.b)
                } else if e.b == node {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Same graph with every node mapped through `f` (must be injective).
    pub fn relabeled(&self, f: impl Fn(i64) -> i64) -> Self {
        Self::from_parts(
            self.nodes.iter().map(|&n| f(n)),
            self.edges.iter().map(|e| (f(e.a), f(e.b), e.weight_db)),
            self.self_loops.iter().map(|l| (f(l.node), l.weight_db)),
            self.threshold_db,
        )
    }
}

/// Edges where the mode-level dB value reaches `threshold_db`.
///
/// Each pair `(i, j)` takes the maximum over its four `(a, a*)` entries in
/// both directions. Self-loops come from the `a_i ↔ a*_i` entries only.
pub fn extract_graph(db: &DbMatrix, threshold_db: f64) -> CorrelationGraph {
    let grid = *db.grid();
    let reduced = db.mode_reduced();
    let v = db.values();
    let n = grid.mode_count();
    let mut edges = Vec::new();
    let mut loops = Vec::new();
    for i in 0..n {
        let a = basis::slot(i, Component::A);
        let b = basis::slot(i, Component::Conj);
        let w = v[(a, b)].max(v[(b, a)]);
        if w >= threshold_db {
            loops.push((grid.index_at(i), w));
        }
        for j in i + 1..n {
            let w = reduced[(i, j)].max(reduced[(j, i)]);
            if w >= threshold_db {
                edges.push((grid.index_at(i), grid.index_at(j), w));
            }
        }
    }
    CorrelationGraph::from_parts(grid.indices(), edges, loops, threshold_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyLabel {
    Isolated,
    Pair,
    Chain,
    SquareLadder,
    LadderWithDiagonals,
    Other,
}

impl TopologyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyLabel::Isolated => "isolated",
            TopologyLabel::Pair => "pair",
            TopologyLabel::Chain => "chain",
            TopologyLabel::SquareLadder => "square_ladder",
            TopologyLabel::LadderWithDiagonals => "ladder_with_diagonals",
            TopologyLabel::Other => "other",
        }
    }

    pub fn is_ladder(self) -> bool {
        matches!(self, TopologyLabel::SquareLadder | TopologyLabel::LadderWithDiagonals)
    }
}

impl fmt::Display for TopologyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: TopologyLabel,
    /// Rung pairs for ladder labels, ascending.
    pub rungs: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub components: Vec<Vec<i64>>,
    pub labels: Vec<TopologyLabel>,
    pub ladder_rungs: Vec<Vec<(i64, i64)>>,
}

impl TopologyReport {
    pub fn component_sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

/// Undirected components, each ascending, ordered by smallest node.
pub fn connected_components(graph: &CorrelationGraph) -> Vec<Vec<i64>> {
    let adjacency = Adjacency::new(&graph.nodes, &graph.edges);
    let mut seen = vec![false; adjacency.len()];
    let mut out = Vec::new();
    for start in 0..adjacency.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(u) = queue.pop_front() {
            members.push(graph.nodes[u]);
            for &w in &adjacency.list[u] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Components plus a label and rungs for each.
pub fn analyze_topology(graph: &CorrelationGraph) -> TopologyReport {
    let components = connected_components(graph);
    let mut labels = Vec::with_capacity(components.len());
    let mut ladder_rungs = Vec::with_capacity(components.len());
    for comp in &components {
        let c = classify_topology(comp, graph.edges());
        labels.push(c.label);
        ladder_rungs.push(c.rungs);
    }
    TopologyReport {
        components,
        labels,
        ladder_rungs,
    }
}

struct Adjacency {
    list: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(nodes: &[i64], edges: &[Edge]) -> Self {
        let pos: BTreeMap<i64, usize> = nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
        let mut list = vec![Vec::new(); nodes.len()];
        for e in edges {
            if let (Some(&a), Some(&b)) = (pos.get(&e.a), pos.get(&e.b)) {
                list[a].push(b);
                list[b].push(a);
            }
        }
        for l in &mut list {
            l.sort_unstable();
            l.dedup();
        }
        Self { list }
    }

    fn len(&self) -> usize {
        self.list.len()
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.list[a].binary_search(&b).is_ok()
    }
}

/// Most boundary defects a ladder may carry (pendants plus single-node end layers).
const MAX_DEFECTS: usize = 2;

/// Label a component from its edges alone. Self-loops never enter.
pub fn classify_topology(component: &[i64], edges: &[Edge]) -> Classification {
    let mut nodes: Vec<i64> = component.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let members: BTreeSet<i64> = nodes.iter().copied().collect();
    let local: Vec<Edge> = edges
        .iter()
        .filter(|e| e.a != e.b && members.contains(&e.a) && members.contains(&e.b))
        .copied()
        .collect();
    let adj = Adjacency::new(&nodes, &local);
    let edge_count: usize = adj.list.iter().map(Vec::len).sum::<usize>() / 2;
    let other = Classification {
        label: TopologyLabel::Other,
        rungs: Vec::new(),
    };

    match nodes.len() {
        0 => return other,
        1 => {
            return Classification {
                label: TopologyLabel::Isolated,
                rungs: Vec::new(),
            }
        }
        2 if edge_count == 1 => {
            return Classification {
                label: TopologyLabel::Pair,
                rungs: Vec::new(),
            }
        }
        _ => {}
    }
    if !is_connected(&adj) {
        return other;
    }
    if adj.list.iter().all(|l| l.len() <= 2) && edge_count + 1 == nodes.len() {
        return Classification {
            label: TopologyLabel::Chain,
            rungs: Vec::new(),
        };
    }
    match classify_ladder(&adj) {
        Some((label, rungs)) => {
            let mut rungs: Vec<(i64, i64)> = rungs
                .into_iter()
                .map(|(a, b)| {
                    let (x, y) = (nodes[a], nodes[b]);
                    (x.min(y), x.max(y))
                })
                .collect();
            rungs.sort_unstable();
            Classification { label, rungs }
        }
        None => other,
    }
}

fn is_connected(adj: &Adjacency) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj.list[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

/// Try every way of peeling up to two pendant nodes, then every start set
/// for a rung-by-rung layering. A square ladder beats one with diagonals.
fn classify_ladder(adj: &Adjacency) -> Option<(TopologyLabel, Vec<(usize, usize)>)> {
    let pendants: Vec<usize> = (0..adj.len()).filter(|&u| adj.list[u].len() == 1).collect();
    if pendants.len() > MAX_DEFECTS {
        return None;
    }
    let mut best: Option<(TopologyLabel, Vec<(usize, usize)>)> = None;
    for mask in 0..(1usize << pendants.len()) {
        let removed: Vec<usize> = pendants
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &p)| p)
            .collect();
        if let Some(found) = layered_ladder(adj, &removed) {
            let better = match &best {
                None => true,
                Some((label, _)) => {
                    *label == TopologyLabel::LadderWithDiagonals
                        && found.0 == TopologyLabel::SquareLadder
                }
            };
            if better {
                best = Some(found);
            }
            if matches!(best, Some((TopologyLabel::SquareLadder, _))) {
                break;
            }
        }
    }
    best
}

fn layered_ladder(
    adj: &Adjacency,
    removed: &[usize],
) -> Option<(TopologyLabel, Vec<(usize, usize)>)> {
    let n = adj.len();
    let mut alive = vec![true; n];
    for &r in removed {
        alive[r] = false;
    }
    let live: Vec<usize> = (0..n).filter(|&u| alive[u]).collect();
    let mut starts: Vec<Vec<usize>> = live.iter().map(|&u| vec![u]).collect();
    for &u in &live {
        for &w in &adj.list[u] {
            if alive[w] && u < w {
                starts.push(vec![u, w]);
            }
        }
    }
    let mut best: Option<(TopologyLabel, Vec<(usize, usize)>)> = None;
    for start in starts {
        let Some(layers) = bfs_layers(adj, &alive, &start, live.len()) else {
            continue;
        };
        let Some(label) = check_layers(adj, &layers, removed) else {
            continue;
        };
        let rungs = layers
            .iter()
            .filter(|l| l.len() == 2)
            .map(|l| (l[0], l[1]))
            .collect();
        if label == TopologyLabel::SquareLadder {
            return Some((label, rungs));
        }
        if best.is_none() {
            best = Some((label, rungs));
        }
    }
    best
}

fn bfs_layers(adj: &Adjacency, alive: &[bool], start: &[usize], live: usize) -> Option<Vec<Vec<usize>>> {
    let mut seen = vec![false; adj.len()];
    for &s in start {
        seen[s] = true;
    }
    let mut layers = vec![start.to_vec()];
    let mut total = start.len();
    loop {
        let last = layers.last().expect("non-empty");
        let mut next: Vec<usize> = Vec::new();
        for &u in last {
            for &w in &adj.list[u] {
                if alive[w] && !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        if next.len() > 2 {
            return None;
        }
        next.sort_unstable();
        total += next.len();
        layers.push(next);
    }
    (total == live).then_some(layers)
}

fn check_layers(adj: &Adjacency, layers: &[Vec<usize>], removed: &[usize]) -> Option<TopologyLabel> {
    let count = layers.len();
    let full = layers.iter().filter(|l| l.len() == 2).count();
    if full < 2 {
        return None;
    }
    let mut defects = removed.len();
    for (k, layer) in layers.iter().enumerate() {
        if layer.len() == 1 {
            if k != 0 && k + 1 != count {
                return None;
            }
            defects += 1;
        } else if !adj.has(layer[0], layer[1]) {
            return None;
        }
    }
    if defects > MAX_DEFECTS {
        return None;
    }
    let mut diagonals = false;
    for pair in layers.windows(2) {
        let (x, y) = (&pair[0], &pair[1]);
        if x.len() == 2 && y.len() == 2 {
            let straight = adj.has(x[0], y[0]) && adj.has(x[1], y[1]);
            let crossed = adj.has(x[0], y[1]) && adj.has(x[1], y[0]);
            if !straight && !crossed {
                return None;
            }
            let links = [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .filter(|&&(i, j)| adj.has(x[i], y[j]))
                .count();
            if links > 2 {
                diagonals = true;
            }
        }
    }
    let end_layers: BTreeSet<usize> = layers[0]
        .iter()
        .chain(layers[count - 1].iter())
        .copied()
        .collect();
    for &p in removed {
        if !adj.list[p].iter().any(|w| end_layers.contains(w)) {
            return None;
        }
    }
    Some(if diagonals {
        TopologyLabel::LadderWithDiagonals
    } else {
        TopologyLabel::SquareLadder
    })
}

/// Deterministic graph-description text: one cluster per multi-node
/// component, bare statements for isolated nodes, weights to 0.1 dB.
pub fn export_dot(graph: &CorrelationGraph, report: &TopologyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "// combscatter {} correlation graph, threshold {} dB",
        crate::VERSION,
        format_db(graph.threshold_db)
    );
    out.push_str("graph correlations {\n");
    let mut cluster = 0usize;
    for (k, comp) in report.components.iter().enumerate() {
        if comp.len() == 1 {
            continue;
        }
        let members: BTreeSet<i64> = comp.iter().copied().collect();
        let _ = writeln!(out, "  subgraph cluster_{cluster} {{");
        let _ = writeln!(out, "    label=\"{}\";", report.labels[k]);
        for n in comp {
            let _ = writeln!(out, "    \"{n}\";");
        }
        for e in graph.edges.iter().filter(|e| members.contains(&e.a)) {
            let _ = writeln!(
                out,
                "    \"{}\" -- \"{}\" [label=\"{:.1}\"];",
                e.a, e.b, e.weight_db
            );
        }
        out.push_str("  }\n");
        cluster += 1;
    }
    for comp in report.components.iter().filter(|c| c.len() == 1) {
        let _ = writeln!(out, "  \"{}\";", comp[0]);
    }
    for l in &graph.self_loops {
        let _ = writeln!(
            out,
            "  \"{0}\" -- \"{0}\" [label=\"{1:.1}\", style=dashed];",
            l.node, l.weight_db
        );
    }
    out.push_str("}\n");
    out
}

fn format_db(x: f64) -> String {
    format!("{x:?}")
}
