//! Report writers. Every file starts with a provenance line; floats use
//! the shortest round-trip representation so output is byte-stable.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::{FitResult, PhaseSweepResult};
use crate::basis::{slot_label, Component};
use crate::graphs::{CorrelationGraph, TopologyReport};
use crate::model::ModeGrid;
use crate::scattering::DbMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(config_sha256: impl Into<String>) -> Self {
        Self {
            tool: "combscatter",
            version: crate::VERSION,
            config_sha256: config_sha256.into(),
        }
    }

    /// `# combscatter <version> config_sha256=<hash>`
    pub fn comment_line(&self) -> String {
        format!("# {} {} config_sha256={}\n", self.tool, self.version, self.config_sha256)
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn slot_labels(grid: &ModeGrid, quadrature: bool) -> Vec<String> {
    grid.indices()
        .flat_map(|j| {
            if quadrature {
                [format!("x_{j}"), format!("p_{j}")]
            } else {
                [slot_label(j, Component::A), slot_label(j, Component::Conj)]
            }
        })
        .collect()
}

fn labeled_matrix(m: &DMatrix<f64>, labels: &[String], corner: &str, p: &Provenance) -> String {
    let mut s = p.comment_line();
    let _ = writeln!(s, "{corner},{}", labels.join(","));
    for r in 0..m.nrows() {
        s.push_str(&labels[r]);
        for c in 0..m.ncols() {
            s.push(',');
            s.push_str(&num(m[(r, c)]));
        }
        s.push('\n');
    }
    s
}

/// Pump-off relative `|S|` in dB, rows are outputs and columns inputs.
pub fn db_matrix_csv(db: &DbMatrix, p: &Provenance) -> String {
    labeled_matrix(db.values(), &slot_labels(db.grid(), false), "out\\in", p)
}

/// A quadrature-basis matrix (covariance or `S_x`).
pub fn quadrature_csv(m: &DMatrix<f64>, grid: &ModeGrid, p: &Provenance) -> String {
    labeled_matrix(m, &slot_labels(grid, true), "row\\col", p)
}

/// One row per phase, one column per intermodulation track.
pub fn sweep_csv(r: &PhaseSweepResult, p: &Provenance) -> String {
    let mut s = p.comment_line();
    let names: Vec<String> = r.tracks.iter().map(|t| t.name()).collect();
    let _ = writeln!(s, "phase_rad,{}", names.join(","));
    for (k, phase) in r.phases.iter().enumerate() {
        s.push_str(&num(*phase));
        for t in &r.tracks {
            s.push(',');
            s.push_str(&num(t.db[k]));
        }
        s.push('\n');
    }
    s
}

/// The sampled `d(g, γ)` surface; rows are `g`, columns `γ`.
pub fn fit_surface_csv(r: &FitResult, p: &Provenance) -> String {
    let mut s = p.comment_line();
    let gammas: Vec<String> = r.gamma_samples.iter().map(|&g| num(g)).collect();
    let _ = writeln!(s, "g\\gamma_rad_per_s,{}", gammas.join(","));
    for (g, row) in r.g_samples.iter().zip(&r.surface) {
        s.push_str(&num(*g));
        for d in row {
            s.push(',');
            s.push_str(&num(*d));
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct ComponentOut<'a> {
    nodes: &'a [i64],
    label: &'a str,
    rungs: &'a [(i64, i64)],
}

#[derive(Serialize)]
struct TopologyOut<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    threshold_db: f64,
    node_count: usize,
    edge_count: usize,
    components: Vec<ComponentOut<'a>>,
    edges: Vec<(i64, i64, f64)>,
    self_loops: Vec<(i64, f64)>,
}

pub fn topology_json(graph: &CorrelationGraph, report: &TopologyReport, p: &Provenance) -> String {
    let out = TopologyOut {
        provenance: p,
        threshold_db: graph.threshold_db(),
        node_count: graph.nodes().len(),
        edge_count: graph.edges().len(),
        components: report
            .components
            .iter()
            .zip(&report.labels)
            .zip(&report.ladder_rungs)
            .map(|((nodes, label), rungs)| ComponentOut {
                nodes,
                label: label.as_str(),
                rungs,
            })
            .collect(),
        edges: graph.edges().iter().map(|e| (e.a, e.b, e.weight_db)).collect(),
        self_loops: graph.self_loops().iter().map(|l| (l.node, l.weight_db)).collect(),
    };
    to_json(&out)
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Serialize `body` with the provenance fields first.
pub fn with_provenance<T: Serialize>(body: &T, p: &Provenance) -> String {
    to_json(&Wrapped { provenance: p, body })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
