//! Switch instances, matchings and fractional edge vectors.
//!
//! A [`SwitchInstance`] is only ever built through [`validate_instance`], so every
//! other module can rely on its invariants: simple undirected graph, parameters in
//! range, vertices sorted by id and edges sorted by their canonical `(min, max)`
//! vertex pair. Edge indices used throughout the crate refer to that sorted order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Request arrival law on an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalKind {
    /// At most one request per slot, with probability `nu`.
    #[default]
    Bernoulli,
    /// Poisson number of requests per slot with mean `nu`.
    Poisson,
}

impl ArrivalKind {
    pub fn variance(self, nu: f64) -> f64 {
        match self {
            ArrivalKind::Bernoulli => nu * (1.0 - nu),
            ArrivalKind::Poisson => nu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Entanglement arrival probability per slot.
    pub lambda: f64,
    /// Per-entanglement decoherence probability per slot.
    pub mu: f64,
    /// Memory size.
    pub buffer: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDemand {
    pub nu: f64,
    pub sigma2: f64,
    pub arrival_kind: ArrivalKind,
}

/// Unvalidated instance description, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub vertices: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub node_params: BTreeMap<String, NodeParams>,
    pub edge_demand: Vec<RawEdgeDemand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEdgeDemand {
    pub edge: [String; 2],
    pub nu: f64,
    /// Defaults to the variance of the arrival law when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub arrival_kind: ArrivalKind,
}

/// One violated instance invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVertex(String),
    SelfLoop(String),
    DuplicateEdge(String, String),
    DanglingEndpoint {
        edge: (String, String),
        vertex: String,
    },
    MissingNodeParams(String),
    UnknownNodeParams(String),
    LambdaOutOfRange {
        vertex: String,
        value: f64,
    },
    MuOutOfRange {
        vertex: String,
        value: f64,
    },
    BufferTooSmall {
        vertex: String,
    },
    MissingEdgeDemand(String, String),
    DuplicateEdgeDemand(String, String),
    UnknownEdgeDemand(String, String),
    NuOutOfRange {
        edge: (String, String),
        value: f64,
    },
    Sigma2OutOfRange {
        edge: (String, String),
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVertex(v) => write!(f, "duplicate vertex {v:?}"),
            Violation::SelfLoop(v) => write!(f, "self-loop at vertex {v:?}"),
            Violation::DuplicateEdge(u, v) => write!(f, "duplicate edge ({u}, {v})"),
            Violation::DanglingEndpoint { edge, vertex } => write!(
                f,
                "dangling endpoint: edge ({}, {}) uses undeclared vertex {vertex:?}",
                edge.0, edge.1
            ),
            Violation::MissingNodeParams(v) => write!(f, "missing node_params for vertex {v:?}"),
            Violation::UnknownNodeParams(v) => {
                write!(f, "node_params given for unknown vertex {v:?}")
            }
            Violation::LambdaOutOfRange { vertex, value } => {
                write!(f, "lambda out of range at vertex {vertex:?}: {value}")
            }
            Violation::MuOutOfRange { vertex, value } => {
                write!(f, "mu out of range at vertex {vertex:?}: {value}")
            }
            Violation::BufferTooSmall { vertex } => write!(f, "buffer < 1 at vertex {vertex:?}"),
            Violation::MissingEdgeDemand(u, v) => {
                write!(f, "missing edge_demand for edge ({u}, {v})")
            }
            Violation::DuplicateEdgeDemand(u, v) => {
                write!(f, "duplicate edge_demand for edge ({u}, {v})")
            }
            Violation::UnknownEdgeDemand(u, v) => {
                write!(f, "edge_demand given for unknown edge ({u}, {v})")
            }
            Violation::NuOutOfRange { edge, value } => {
                write!(
                    f,
                    "nu out of range at edge ({}, {}): {value}",
                    edge.0, edge.1
                )
            }
            Violation::Sigma2OutOfRange { edge, value } => {
                write!(
                    f,
                    "sigma2 out of range at edge ({}, {}): {value}",
                    edge.0, edge.1
                )
            }
        }
    }
}

/// Every invariant violated by a raw instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct InstanceError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid instance: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown edge index {0}")]
    UnknownEdge(usize),
    #[error("unknown edge ({0}, {1})")]
    UnknownEdgeName(String, String),
    #[error("edge vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("edge vector entry {index} is {value}, expected a finite nonnegative value")]
    BadEntry { index: usize, value: f64 },
    #[error("edges share a vertex")]
    NotAMatching,
    #[error("edge {0} appears twice")]
    RepeatedEdge(usize),
}

/// Validated switch instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchInstance {
    vertices: Vec<String>,
    edges: Vec<(usize, usize)>,
    nodes: Vec<NodeParams>,
    demand: Vec<EdgeDemand>,
    incident: Vec<Vec<usize>>,
}

fn canonical(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Checks every invariant of a raw description and builds the canonical instance.
pub fn validate_instance(raw: &RawInstance) -> Result<SwitchInstance, InstanceError> {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for v in &raw.vertices {
        if !seen.insert(v.clone()) {
            violations.push(Violation::DuplicateVertex(v.clone()));
        }
    }
    let vertices: Vec<String> = seen.into_iter().collect();
    let index: BTreeMap<&str, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();

    let mut edge_set = BTreeSet::new();
    for [a, b] in &raw.edges {
        if a == b {
            violations.push(Violation::SelfLoop(a.clone()));
            continue;
        }
        let key = canonical(a, b);
        let mut dangling = false;
        for end in [a, b] {
            if !index.contains_key(end.as_str()) {
                violations.push(Violation::DanglingEndpoint {
                    edge: key.clone(),
                    vertex: end.clone(),
                });
                dangling = true;
            }
        }
        if dangling {
            continue;
        }
        if !edge_set.insert(key.clone()) {
            violations.push(Violation::DuplicateEdge(key.0, key.1));
        }
    }

    let mut nodes = Vec::with_capacity(vertices.len());
    for v in &vertices {
        match raw.node_params.get(v) {
            None => violations.push(Violation::MissingNodeParams(v.clone())),
            Some(p) => {
                if !in_unit(p.lambda) {
                    violations.push(Violation::LambdaOutOfRange {
                        vertex: v.clone(),
                        value: p.lambda,
                    });
                }
                if !in_unit(p.mu) {
                    violations.push(Violation::MuOutOfRange {
                        vertex: v.clone(),
                        value: p.mu,
                    });
                }
                if p.buffer < 1 {
                    violations.push(Violation::BufferTooSmall { vertex: v.clone() });
                }
                nodes.push(*p);
            }
        }
    }
    for v in raw.node_params.keys() {
        if !index.contains_key(v.as_str()) {
            violations.push(Violation::UnknownNodeParams(v.clone()));
        }
    }

    let mut demand_by_edge: BTreeMap<(String, String), EdgeDemand> = BTreeMap::new();
    for d in &raw.edge_demand {
        let key = canonical(&d.edge[0], &d.edge[1]);
        if !edge_set.contains(&key) {
            violations.push(Violation::UnknownEdgeDemand(key.0, key.1));
            continue;
        }
        let nu_ok = d.nu.is_finite()
            && d.nu >= 0.0
            && (d.arrival_kind != ArrivalKind::Bernoulli || d.nu <= 1.0);
        if !nu_ok {
            violations.push(Violation::NuOutOfRange {
                edge: key.clone(),
                value: d.nu,
            });
        }
        let sigma2 = d.sigma2.unwrap_or_else(|| d.arrival_kind.variance(d.nu));
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            violations.push(Violation::Sigma2OutOfRange {
                edge: key.clone(),
                value: sigma2,
            });
        }
        let entry = EdgeDemand {
            nu: d.nu,
            sigma2,
            arrival_kind: d.arrival_kind,
        };
        if demand_by_edge.insert(key.clone(), entry).is_some() {
            violations.push(Violation::DuplicateEdgeDemand(key.0, key.1));
        }
    }
    for key in &edge_set {
        if !demand_by_edge.contains_key(key) {
            violations.push(Violation::MissingEdgeDemand(key.0.clone(), key.1.clone()));
        }
    }

    if !violations.is_empty() {
        return Err(InstanceError { violations });
    }

    let edges: Vec<(usize, usize)> = edge_set
        .iter()
        .map(|(a, b)| (index[a.as_str()], index[b.as_str()]))
        .collect();
    let demand = edge_set.iter().map(|k| demand_by_edge[k]).collect();
    let mut incident = vec![Vec::new(); vertices.len()];
    for (e, &(u, v)) in edges.iter().enumerate() {
        incident[u].push(e);
        incident[v].push(e);
    }
    Ok(SwitchInstance {
        vertices,
        edges,
        nodes,
        demand,
        incident,
    })
}

impl SwitchInstance {
    pub fn from_json_str(s: &str) -> Result<Self, crate::Error> {
        let raw: RawInstance = serde_json::from_str(s)?;
        Ok(validate_instance(&raw)?)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.binary_search_by(|v| v.as_str().cmp(id)).ok()
    }

    /// Endpoints `(u, v)` of edge `e`, with `u < v`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_ids(&self, e: usize) -> (&str, &str) {
        let (u, v) = self.edges[e];
        (&self.vertices[u], &self.vertices[v])
    }

    /// `u-v` label used in CSV headers and logs.
    pub fn edge_label(&self, e: usize) -> String {
        let (u, v) = self.edge_ids(e);
        format!("{u}-{v}")
    }

    pub fn edge_index(&self, a: &str, b: &str) -> Option<usize> {
        let (u, v) = (self.vertex_index(a)?, self.vertex_index(b)?);
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }

    pub fn node(&self, v: usize) -> &NodeParams {
        &self.nodes[v]
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    pub fn demand(&self, e: usize) -> &EdgeDemand {
        &self.demand[e]
    }

    /// Edges incident to `v`, in canonical order.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Copy of this instance with every edge's demand replaced.
    pub fn with_demand(&self, demand: Vec<EdgeDemand>) -> Result<Self, InstanceError> {
        let mut raw = self.to_raw();
        for (d, nd) in raw.edge_demand.iter_mut().zip(demand) {
            d.nu = nd.nu;
            d.sigma2 = Some(nd.sigma2);
            d.arrival_kind = nd.arrival_kind;
        }
        validate_instance(&raw)
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            vertices: self.vertices.clone(),
            edges: (0..self.num_edges())
                .map(|e| {
                    let (u, v) = self.edge_ids(e);
                    [u.to_owned(), v.to_owned()]
                })
                .collect(),
            node_params: self
                .vertices
                .iter()
                .cloned()
                .zip(self.nodes.iter().copied())
                .collect(),
            edge_demand: (0..self.num_edges())
                .map(|e| {
                    let (u, v) = self.edge_ids(e);
                    let d = self.demand[e];
                    RawEdgeDemand {
                        edge: [u.to_owned(), v.to_owned()],
                        nu: d.nu,
                        sigma2: Some(d.sigma2),
                        arrival_kind: d.arrival_kind,
                    }
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes")
    }

    /// `true` iff the edge set `s` is a matching. Repeated ids count as sharing a vertex.
    pub fn is_matching(&self, s: &[usize]) -> Result<bool, ModelError> {
        let mut used = vec![false; self.num_vertices()];
        for &e in s {
            if e >= self.num_edges() {
                return Err(ModelError::UnknownEdge(e));
            }
        }
        for &e in s {
            let (u, v) = self.edges[e];
            if used[u] || used[v] {
                return Ok(false);
            }
            used[u] = true;
            used[v] = true;
        }
        Ok(true)
    }

    /// Builds a uniform instance, mainly for tests and examples.
    pub fn uniform(
        vertices: &[&str],
        edges: &[(&str, &str)],
        node: NodeParams,
        nu: f64,
    ) -> Result<Self, InstanceError> {
        let raw = RawInstance {
            vertices: vertices.iter().map(|v| v.to_string()).collect(),
            edges: edges
                .iter()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect(),
            node_params: vertices.iter().map(|v| (v.to_string(), node)).collect(),
            edge_demand: edges
                .iter()
                .map(|(a, b)| RawEdgeDemand {
                    edge: [a.to_string(), b.to_string()],
                    nu,
                    sigma2: None,
                    arrival_kind: ArrivalKind::Bernoulli,
                })
                .collect(),
        };
        validate_instance(&raw)
    }
}

/// Set of pairwise vertex-disjoint edges, stored as sorted edge indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Matching(Vec<usize>);

impl Matching {
    pub fn empty() -> Self {
        Matching(Vec::new())
    }

    /// Validates `edges` against `g` and sorts them.
    pub fn new(g: &SwitchInstance, mut edges: Vec<usize>) -> Result<Self, ModelError> {
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::RepeatedEdge(w[0]));
        }
        if !g.is_matching(&edges)? {
            return Err(ModelError::NotAMatching);
        }
        Ok(Matching(edges))
    }

    /// Caller guarantees `edges` is sorted and a matching.
    pub(crate) fn from_sorted_unchecked(edges: Vec<usize>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        Matching(edges)
    }

    pub fn edges(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn weight(&self, weights: &[f64]) -> f64 {
        self.0.iter().map(|&e| weights[e]).sum()
    }

    pub fn indicator(&self, num_edges: usize) -> Vec<f64> {
        let mut v = vec![0.0; num_edges];
        for &e in &self.0 {
            v[e] = 1.0;
        }
        v
    }
}

/// Point `x ∈ R_{≥0}^E`, indexed by canonical edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector(Vec<f64>);

impl EdgeVector {
    pub fn new(g: &SwitchInstance, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != g.num_edges() {
            return Err(ModelError::LengthMismatch {
                expected: g.num_edges(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ModelError::BadEntry { index, value });
        }
        Ok(EdgeVector(values))
    }

    pub fn zeros(num_edges: usize) -> Self {
        EdgeVector(vec![0.0; num_edges])
    }

    /// Clamps round-off negatives to zero.
    pub(crate) fn from_solver(mut values: Vec<f64>) -> Self {
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        EdgeVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EdgeVector(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.0.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    /// `Σ_{e ∈ δ(v)} x_e`.
    pub fn load(&self, g: &SwitchInstance, v: usize) -> f64 {
        g.incident(v).iter().map(|&e| self.0[e]).sum()
    }
}

/// JSON form of an edge-indexed value, `{"edge": ["a", "b"], "value": 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeValue {
    pub edge: [String; 2],
    pub value: f64,
}

/// Converts named edge values into a dense vector. Edges not listed get `default`.
pub fn edge_values_to_vec(
    g: &SwitchInstance,
    values: &[EdgeValue],
    default: f64,
) -> Result<Vec<f64>, ModelError> {
    let mut out = vec![default; g.num_edges()];
    let mut seen = vec![false; g.num_edges()];
    for ev in values {
        let e = g
            .edge_index(&ev.edge[0], &ev.edge[1])
            .ok_or_else(|| ModelError::UnknownEdgeName(ev.edge[0].clone(), ev.edge[1].clone()))?;
        if seen[e] {
            return Err(ModelError::RepeatedEdge(e));
        }
        seen[e] = true;
        out[e] = ev.value;
    }
    Ok(out)
}

pub fn vec_to_edge_values(g: &SwitchInstance, values: &[f64]) -> Vec<EdgeValue> {
    values
        .iter()
        .enumerate()
        .map(|(e, &value)| {
            let (u, v) = g.edge_ids(e);
            EdgeValue {
                edge: [u.to_owned(), v.to_owned()],
                value,
            }
        })
        .collect()
}

pub fn matching_to_names(g: &SwitchInstance, m: &Matching) -> Vec<[String; 2]> {
    m.edges()
        .iter()
        .map(|&e| {
            let (u, v) = g.edge_ids(e);
            [u.to_owned(), v.to_owned()]
        })
        .collect()
}

pub fn matching_from_names(
    g: &SwitchInstance,
    names: &[[String; 2]],
) -> Result<Matching, ModelError> {
    let edges = names
        .iter()
        .map(|[a, b]| {
            g.edge_index(a, b)
                .ok_or_else(|| ModelError::UnknownEdgeName(a.clone(), b.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Matching::new(g, edges)
}
