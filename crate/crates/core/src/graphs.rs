//! Labeled undirected graphs read off precision matrices, and the analytics
//! computed on them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Attribute, DataError, WordMetadata};
use crate::format::fmt_f64;
use crate::glasso::ZERO_TOL;
use crate::matrix::{MatrixError, SymMatrix};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no attribute value for vertex {0}")]
    MissingAttribute(String),
    #[error("vertex {0} is not assigned to a group")]
    UnassignedVertex(String),
    #[error("graphs have different vertex sets")]
    VertexSetMismatch,
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),
    #[error("self-loop at {0}")]
    SelfLoop(String),
    #[error("edge {0}–{1} listed twice")]
    DuplicateEdge(String, String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Vertex label → group name.
pub type Grouping = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub weight: f64,
    /// Sample correlation of the endpoints; absent for aggregated graphs.
    pub pearson: Option<f64>,
}

/// Undirected graph on labeled vertices. Edges are keyed by vertex index
/// pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    vertices: Vec<String>,
    groups: Option<Vec<String>>,
    edges: BTreeMap<(usize, usize), Edge>,
    index: HashMap<String, usize>,
}

impl LabeledGraph {
    pub fn new(vertices: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(v.clone()));
            }
        }
        Ok(Self {
            vertices,
            groups: None,
            edges: BTreeMap::new(),
            index,
        })
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Edges in index order.
    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), &Edge)> {
        self.edges.iter().map(|(&k, e)| (k, e))
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<&Edge> {
        self.edges.get(&(i.min(j), i.max(j)))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge(i, j).is_some()
    }

    pub fn add_edge(&mut self, i: usize, j: usize, edge: Edge) -> Result<()> {
        let n = self.vertices.len();
        if i >= n || j >= n {
            return Err(GraphError::UnknownVertex(format!("#{}", i.max(j))));
        }
        if i == j {
            return Err(GraphError::SelfLoop(self.vertices[i].clone()));
        }
        let key = (i.min(j), i.max(j));
        if self.edges.insert(key, edge).is_some() {
            return Err(GraphError::DuplicateEdge(
                self.vertices[key.0].clone(),
                self.vertices[key.1].clone(),
            ));
        }
        Ok(())
    }

    pub fn add_edge_by_label(&mut self, a: &str, b: &str, edge: Edge) -> Result<()> {
        let i = self.index_of(a).ok_or_else(|| GraphError::UnknownVertex(a.to_string()))?;
        let j = self.index_of(b).ok_or_else(|| GraphError::UnknownVertex(b.to_string()))?;
        self.add_edge(i, j, edge)
    }

    /// Attach a group to every vertex (used as the DOT cluster).
    pub fn with_groups(mut self, grouping: &Grouping) -> Result<Self> {
        self.groups = Some(group_labels(&self, grouping)?);
        Ok(self)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &(i, j) in self.edges.keys() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Edge endpoints as label pairs.
    pub fn edge_labels(&self) -> BTreeSet<(String, String)> {
        self.edges
            .keys()
            .map(|&(i, j)| label_pair(&self.vertices[i], &self.vertices[j]))
            .collect()
    }

    fn empty_like(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            groups: self.groups.clone(),
            edges: BTreeMap::new(),
            index: self.index.clone(),
        }
    }
}

fn label_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn group_labels(g: &LabeledGraph, grouping: &Grouping) -> Result<Vec<String>> {
    g.vertices
        .iter()
        .map(|v| {
            grouping
                .get(v)
                .cloned()
                .ok_or_else(|| GraphError::UnassignedVertex(v.clone()))
        })
        .collect()
}

/// Grouping of `vertices` by a metadata attribute.
pub fn grouping_from_metadata(vertices: &[String], meta: &WordMetadata, attribute: Attribute) -> Result<Grouping> {
    vertices
        .iter()
        .map(|v| {
            meta.get(v)
                .map(|r| (v.clone(), r.attribute(attribute).to_string()))
                .ok_or_else(|| GraphError::MissingAttribute(v.clone()))
        })
        .collect()
}

/// Edge `(i, j)` for every `|θ_ij| ≥ max(τ, 1e-10)`, weighted by `θ_ij`
/// with the matching entry of `gamma` as its Pearson value.
pub fn graph_from_precision(theta: &SymMatrix, gamma: &SymMatrix, tau: f64) -> Result<LabeledGraph> {
    if theta.dim() != gamma.dim() {
        return Err(GraphError::DimensionMismatch(format!(
            "precision is {0}×{0}, correlation is {1}×{1}",
            theta.dim(),
            gamma.dim()
        )));
    }
    if theta.labels() != gamma.labels() {
        return Err(GraphError::DimensionMismatch(
            "precision and correlation labels differ".into(),
        ));
    }
    let cutoff = tau.max(ZERO_TOL);
    let mut g = LabeledGraph::new(theta.labels().to_vec())?;
    let n = theta.dim();
    for j in 0..n {
        for i in 0..j {
            let w = theta.get(i, j);
            if w.abs() >= cutoff {
                g.add_edge(
                    i,
                    j,
                    Edge {
                        weight: w,
                        pearson: Some(gamma.get(i, j)),
                    },
                )?;
            }
        }
    }
    Ok(g)
}

/// Like [`graph_from_precision`] without Pearson values.
pub fn graph_from_matrix(theta: &SymMatrix, tau: f64) -> Result<LabeledGraph> {
    let cutoff = tau.max(ZERO_TOL);
    let mut g = LabeledGraph::new(theta.labels().to_vec())?;
    for j in 0..theta.dim() {
        for i in 0..j {
            let w = theta.get(i, j);
            if w.abs() >= cutoff {
                g.add_edge(i, j, Edge { weight: w, pearson: None })?;
            }
        }
    }
    Ok(g)
}

/// Edge count and possible pair count for one cell of an attribute table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FractionCell {
    pub edges: usize,
    pub possible: usize,
}

impl FractionCell {
    /// `None` when the cell has no possible pairs.
    pub fn fraction(&self) -> Option<f64> {
        (self.possible > 0).then(|| self.edges as f64 / self.possible as f64)
    }
}

/// Symmetric table over pairs of sorted group values. Cells are stored for
/// `a ≤ b`; missing cells are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable<T> {
    values: Vec<String>,
    cells: BTreeMap<(usize, usize), T>,
}

impl<T> PairTable<T> {
    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&T> {
        let i = self.values.binary_search_by(|v| v.as_str().cmp(a)).ok()?;
        let j = self.values.binary_search_by(|v| v.as_str().cmp(b)).ok()?;
        self.cells.get(&(i.min(j), i.max(j)))
    }

    pub fn cells(&self) -> impl Iterator<Item = ((&str, &str), &T)> {
        self.cells
            .iter()
            .map(|(&(i, j), c)| ((self.values[i].as_str(), self.values[j].as_str()), c))
    }

    /// CSV with value labels on both axes; absent cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W, cell: impl Fn(&T) -> Option<String>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.values.iter().cloned());
        w.write_record(&header)?;
        for (i, a) in self.values.iter().enumerate() {
            let mut row = vec![a.clone()];
            for j in 0..self.values.len() {
                let text = self.cells.get(&(i.min(j), i.max(j))).and_then(&cell);
                row.push(text.unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn group_indices(g: &LabeledGraph, grouping: &Grouping) -> Result<(Vec<String>, Vec<usize>)> {
    let labels = group_labels(g, grouping)?;
    let values: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let of = labels
        .iter()
        .map(|l| values.binary_search(l).expect("value present"))
        .collect();
    Ok((values, of))
}

/// Fraction of possible edges present between each pair of groups.
pub fn edge_fraction_by_group(g: &LabeledGraph, grouping: &Grouping) -> Result<PairTable<FractionCell>> {
    let (values, of) = group_indices(g, grouping)?;
    let mut size = vec![0usize; values.len()];
    for &k in &of {
        size[k] += 1;
    }
    let mut cells = BTreeMap::new();
    for a in 0..values.len() {
        for b in a..values.len() {
            let possible = if a == b {
                size[a] * size[a].saturating_sub(1) / 2
            } else {
                size[a] * size[b]
            };
            cells.insert((a, b), FractionCell { edges: 0, possible });
        }
    }
    for &(i, j) in g.edges.keys() {
        let (a, b) = (of[i].min(of[j]), of[i].max(of[j]));
        cells.get_mut(&(a, b)).expect("cell exists").edges += 1;
    }
    Ok(PairTable { values, cells })
}

pub fn edge_fraction_by_attribute(
    g: &LabeledGraph,
    meta: &WordMetadata,
    attribute: Attribute,
) -> Result<PairTable<FractionCell>> {
    edge_fraction_by_group(g, &grouping_from_metadata(g.vertices(), meta, attribute)?)
}

/// Mean `|pearson|` over the edges in each group pair. Cells without edges
/// (or without Pearson values) are absent.
pub fn mean_abs_pearson_by_group(g: &LabeledGraph, grouping: &Grouping) -> Result<PairTable<f64>> {
    let (values, of) = group_indices(g, grouping)?;
    let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for (&(i, j), e) in &g.edges {
        if let Some(p) = e.pearson {
            let cell = acc.entry((of[i].min(of[j]), of[i].max(of[j]))).or_insert((0.0, 0));
            cell.0 += p.abs();
            cell.1 += 1;
        }
    }
    let cells = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    Ok(PairTable { values, cells })
}

pub fn mean_abs_pearson_among_edges(g: &LabeledGraph, meta: &WordMetadata, attribute: Attribute) -> Result<PairTable<f64>> {
    mean_abs_pearson_by_group(g, &grouping_from_metadata(g.vertices(), meta, attribute)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutWeights {
    pub within: f64,
    pub between: f64,
}

/// Total `|weight|` of edges inside clusters and across them.
pub fn cluster_cut_weights(g: &LabeledGraph, partition: &Grouping) -> Result<CutWeights> {
    let labels = group_labels(g, partition)?;
    let mut cut = CutWeights {
        within: 0.0,
        between: 0.0,
    };
    for (&(i, j), e) in &g.edges {
        if labels[i] == labels[j] {
            cut.within += e.weight.abs();
        } else {
            cut.between += e.weight.abs();
        }
    }
    Ok(cut)
}

/// Collapse each group to one vertex. Groups are joined when any member
/// edge joins them; the weight is the number of such edges.
pub fn supernode_graph(g: &LabeledGraph, grouping: &Grouping) -> Result<LabeledGraph> {
    let (values, of) = group_indices(g, grouping)?;
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(i, j) in g.edges.keys() {
        if of[i] != of[j] {
            *counts.entry((of[i].min(of[j]), of[i].max(of[j]))).or_default() += 1;
        }
    }
    let mut s = LabeledGraph::new(values)?;
    for ((a, b), n) in counts {
        s.add_edge(
            a,
            b,
            Edge {
                weight: n as f64,
                pearson: None,
            },
        )?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetOps {
    pub intersection: LabeledGraph,
    pub only_first: LabeledGraph,
    pub only_second: LabeledGraph,
}

/// Edge-set intersection and differences of two graphs on the same
/// vertices. Results use the first graph's vertex order; shared edges keep
/// the first graph's weights.
pub fn graph_set_ops(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<SetOps> {
    let same = g1.n_vertices() == g2.n_vertices() && g1.vertices.iter().all(|v| g2.index.contains_key(v));
    if !same {
        return Err(GraphError::VertexSetMismatch);
    }
    let to_first: Vec<usize> = g2.vertices.iter().map(|v| g1.index[v]).collect();
    let second: BTreeMap<(usize, usize), Edge> = g2
        .edges
        .iter()
        .map(|(&(i, j), &e)| {
            let (a, b) = (to_first[i], to_first[j]);
            ((a.min(b), a.max(b)), e)
        })
        .collect();
    let mut out = SetOps {
        intersection: g1.empty_like(),
        only_first: g1.empty_like(),
        only_second: g1.empty_like(),
    };
    for (&k, &e) in &g1.edges {
        if second.contains_key(&k) {
            out.intersection.edges.insert(k, e);
        } else {
            out.only_first.edges.insert(k, e);
        }
    }
    for (k, e) in second {
        if !g1.edges.contains_key(&k) {
            out.only_second.edges.insert(k, e);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopEdges {
    pub graph: LabeledGraph,
    /// Set when fewer than the requested number of nonzero entries exist.
    pub not_enough_edges: bool,
}

/// The `k` off-diagonal entries of largest `|θ_ij|` (nonzeros only). Ties
/// are broken in favor of the lexicographically smaller label pair.
pub fn top_k_edges(theta: &SymMatrix, gamma: Option<&SymMatrix>, k: usize) -> Result<TopEdges> {
    if let Some(gm) = gamma {
        if gm.labels() != theta.labels() {
            return Err(GraphError::DimensionMismatch(
                "precision and correlation labels differ".into(),
            ));
        }
    }
    let labels = theta.labels();
    let n = theta.dim();
    let mut candidates: Vec<(f64, (String, String), usize, usize)> = Vec::new();
    for j in 0..n {
        for i in 0..j {
            let w = theta.get(i, j).abs();
            if w >= ZERO_TOL {
                candidates.push((w, label_pair(&labels[i], &labels[j]), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let not_enough_edges = candidates.len() < k;
    let mut g = LabeledGraph::new(labels.to_vec())?;
    for (_, _, i, j) in candidates.into_iter().take(k) {
        g.add_edge(
            i,
            j,
            Edge {
                weight: theta.get(i, j),
                pearson: gamma.map(|gm| gm.get(i, j)),
            },
        )?;
    }
    Ok(TopEdges { graph: g, not_enough_edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub avg_degree: f64,
    pub n_edges: usize,
    pub trace_over_frobenius: f64,
    pub spectral_norm: f64,
}

/// Degree summary of `g` with `tr(M)/‖M‖_F` and `‖M‖₂` of `matrix`.
pub fn graph_metrics(matrix: &SymMatrix, g: &LabeledGraph) -> Result<GraphMetrics> {
    if matrix.dim() != g.n_vertices() {
        return Err(GraphError::DimensionMismatch(format!(
            "matrix has dimension {}, graph has {} vertices",
            matrix.dim(),
            g.n_vertices()
        )));
    }
    let m = matrix.entries();
    let tr = matrix.trace();
    let fro_sq = m.iter().map(|v| v * v).sum::<f64>();
    // sqrt(tr²/‖M‖²_F) is exact for the identity, where tr/sqrt(dim) is not.
    let trace_over_frobenius = if fro_sq > 0.0 {
        tr.signum() * (tr * tr / fro_sq).sqrt()
    } else {
        0.0
    };
    let spectral_norm = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let avg_degree = if g.n_vertices() == 0 {
        0.0
    } else {
        2.0 * g.n_edges() as f64 / g.n_vertices() as f64
    };
    Ok(GraphMetrics {
        avg_degree,
        n_edges: g.n_edges(),
        trace_over_frobenius,
        spectral_norm,
    })
}

#[derive(Serialize, Deserialize)]
struct VertexJson {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    a: String,
    b: String,
    weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pearson: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<VertexJson>,
    edges: Vec<EdgeJson>,
}

impl LabeledGraph {
    pub fn to_json(&self) -> Result<String> {
        let doc = GraphJson {
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(i, v)| VertexJson {
                    label: v.clone(),
                    group: self.groups.as_ref().map(|g| g[i].clone()),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(&(i, j), e)| EdgeJson {
                    a: self.vertices[i].clone(),
                    b: self.vertices[j].clone(),
                    weight: e.weight,
                    pearson: e.pearson,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphJson = serde_json::from_str(text)?;
        let mut g = LabeledGraph::new(doc.vertices.iter().map(|v| v.label.clone()).collect())?;
        if doc.vertices.iter().any(|v| v.group.is_some()) {
            let groups: Grouping = doc
                .vertices
                .iter()
                .filter_map(|v| v.group.clone().map(|gr| (v.label.clone(), gr)))
                .collect();
            g = g.with_groups(&groups)?;
        }
        for e in doc.edges {
            g.add_edge_by_label(
                &e.a,
                &e.b,
                Edge {
                    weight: e.weight,
                    pearson: e.pearson,
                },
            )?;
        }
        Ok(g)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// `label_a,label_b,weight,pearson`, one row per edge.
    pub fn write_edge_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["label_a", "label_b", "weight", "pearson"])?;
        for (&(i, j), e) in &self.edges {
            w.write_record([
                self.vertices[i].clone(),
                self.vertices[j].clone(),
                fmt_f64(e.weight),
                e.pearson.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Graphviz source. Grouped vertices are placed in one cluster per group.
    pub fn to_dot(&self, name: &str) -> String {
        let quote = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut out = String::new();
        let _ = writeln!(out, "graph {} {{", quote(name));
        match &self.groups {
            Some(groups) => {
                let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (i, gr) in groups.iter().enumerate() {
                    by_group.entry(gr).or_default().push(i);
                }
                for (k, (gr, members)) in by_group.iter().enumerate() {
                    let _ = writeln!(out, "  subgraph cluster_{k} {{");
                    let _ = writeln!(out, "    label={};", quote(gr));
                    for &i in members {
                        let _ = writeln!(out, "    {} [group={}];", quote(&self.vertices[i]), quote(gr));
                    }
                    out.push_str("  }\n");
                }
            }
            None => {
                for v in &self.vertices {
                    let _ = writeln!(out, "  {};", quote(v));
                }
            }
        }
        for (&(i, j), e) in &self.edges {
            let _ = writeln!(
                out,
                "  {} -- {} [label=\"{:.3}\", weight={}];",
                quote(&self.vertices[i]),
                quote(&self.vertices[j]),
                e.weight,
                fmt_f64(e.weight.abs())
            );
        }
        out.push_str("}\n");
        out
    }
}
