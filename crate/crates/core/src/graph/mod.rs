//! Type dependency graphs: one node per type variable, labeled hyperedges for
//! logical constraints and contextual hints.

mod extract;
mod library;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::Span;

pub use extract::{add_name_similar_edges, add_usage_edges, build_graph, extract_graph};
pub use library::LibraryManifest;
pub use tokenize::tokenize_identifier;

pub type NodeId = usize;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// Constant kinds with a fixed trainable embedding. The literal kinds come
/// first, followed by one kind per operator.
pub const CONSTANT_KINDS: &[&str] = &[
    "number", "string", "boolean", "op+", "op-", "op*", "op/", "op<", "op<=", "op>", "op>=",
    "op==", "op&&", "op||", "op!", "opneg",
];

pub fn constant_kind_index(name: &str) -> Option<usize> {
    CONSTANT_KINDS.iter().position(|k| *k == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Variable,
    Constant(String),
}

/// Where a variable node comes from; used for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrigin {
    Field,
    Param,
    Return,
    Local,
    Intermediate,
    Class,
    Function,
    Method,
    Global,
    Literal,
    Operator,
    LibraryClass,
    LibraryMember,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub origin: NodeOrigin,
    /// Printable name (source name, fresh name or literal text).
    pub name: String,
    /// Lowercase word tokens of the source name; empty for unnamed nodes.
    pub name_tokens: Vec<String>,
    pub span: Option<Span>,
}

impl TypeNode {
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, NodeKind::Constant(_))
    }

    pub fn constant_type(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Constant(t) => Some(t),
            NodeKind::Variable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Bool,
    Subtype,
    Assign,
    Function,
    Call,
    Object,
    Access,
    Name,
    NameSimilar,
    Usage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeCategory {
    Fixed,
    NAry,
    NPairs,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 10] = [
        EdgeKind::Bool,
        EdgeKind::Subtype,
        EdgeKind::Assign,
        EdgeKind::Function,
        EdgeKind::Call,
        EdgeKind::Object,
        EdgeKind::Access,
        EdgeKind::Name,
        EdgeKind::NameSimilar,
        EdgeKind::Usage,
    ];

    pub fn category(self) -> EdgeCategory {
        match self {
            EdgeKind::Function | EdgeKind::Call | EdgeKind::Object => EdgeCategory::NAry,
            EdgeKind::Usage => EdgeCategory::NPairs,
            _ => EdgeCategory::Fixed,
        }
    }

    /// Contextual edges carry naming hints; the rest are logical constraints.
    pub fn is_contextual(self) -> bool {
        matches!(
            self,
            EdgeKind::Name | EdgeKind::NameSimilar | EdgeKind::Usage
        )
    }

    /// Argument count of a `Fixed` kind.
    pub fn fixed_arity(self) -> Option<usize> {
        match self {
            EdgeKind::Bool | EdgeKind::Name => Some(1),
            EdgeKind::Subtype | EdgeKind::Assign | EdgeKind::Access | EdgeKind::NameSimilar => {
                Some(2)
            }
            _ => None,
        }
    }

    /// `Fixed` kinds that embed their identifier label as an extra argument.
    pub fn has_identifier_label(self) -> bool {
        matches!(self, EdgeKind::Access | EdgeKind::Name)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Bool => "Bool",
            EdgeKind::Subtype => "Subtype",
            EdgeKind::Assign => "Assign",
            EdgeKind::Function => "Function",
            EdgeKind::Call => "Call",
            EdgeKind::Object => "Object",
            EdgeKind::Access => "Access",
            EdgeKind::Name => "Name",
            EdgeKind::NameSimilar => "NameSimilar",
            EdgeKind::Usage => "Usage",
        }
    }
}

impl std::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeLabel {
    Position(usize),
    Ident(String),
}

/// One predicate instance.
///
/// Argument layout per kind:
/// - `Function`: `[f, p1..pk, ret]`, labels positions `[1..k, 0]`
/// - `Call`: `[result, callee, a1..ak]`, labels positions `[0, 1..k]`
/// - `Object`: `[obj, m1..mk]`, labels member names
/// - `Access`: `[result, obj]`, label member name
/// - `Name`: `[node]`, label the identifier
/// - `Usage`: `[head_obj, head_result, c1, m1, .., ck, mk]`, label member name
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hyperedge {
    pub kind: EdgeKind,
    pub args: Vec<NodeId>,
    pub labels: Vec<EdgeLabel>,
}

impl Hyperedge {
    pub fn category(&self) -> EdgeCategory {
        self.kind.category()
    }

    /// `(class, member)` pairs of a `Usage` edge, head pair excluded.
    pub fn usage_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.args[2..].chunks(2).map(|c| (c[0], c[1]))
    }

    pub fn ident_label(&self) -> Option<&str> {
        self.labels.iter().find_map(|l| match l {
            EdgeLabel::Ident(s) => Some(s.as_str()),
            EdgeLabel::Position(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge {index} ({kind}) references node {node} but the graph has {len} nodes")]
    DanglingArg {
        index: usize,
        kind: EdgeKind,
        node: NodeId,
        len: usize,
    },
    #[error("edge {index} ({kind}) has arity {got}, expected {expected}")]
    Arity {
        index: usize,
        kind: EdgeKind,
        got: usize,
        expected: String,
    },
    #[error("unsupported graph format version {0}")]
    Version(u32),
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeDependencyGraph {
    pub nodes: Vec<TypeNode>,
    pub edges: Vec<Hyperedge>,
    /// Declared class name to the node holding the class type.
    pub user_type_nodes: BTreeMap<String, NodeId>,
    /// Ground-truth type name per annotated variable node.
    pub annotations: BTreeMap<NodeId, String>,
    /// Source occurrence count per declared variable node.
    pub occurrences: BTreeMap<NodeId, u32>,
}

impl TypeDependencyGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn push_node(
        &mut self,
        kind: NodeKind,
        origin: NodeOrigin,
        name: String,
        tokens: Vec<String>,
        span: Option<Span>,
    ) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(TypeNode {
            id,
            kind,
            origin,
            name,
            name_tokens: tokens,
            span,
        });
        id
    }

    pub fn edge_counts(&self) -> BTreeMap<EdgeKind, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.edges {
            *counts.entry(e.kind).or_insert(0) += 1;
        }
        counts
    }

    /// Checks argument ranges and arities against the edge signatures.
    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.nodes.len();
        for (index, e) in self.edges.iter().enumerate() {
            if let Some(&node) = e.args.iter().find(|&&a| a >= n) {
                return Err(GraphError::DanglingArg {
                    index,
                    kind: e.kind,
                    node,
                    len: n,
                });
            }
            let arity_err = |expected: &str| GraphError::Arity {
                index,
                kind: e.kind,
                got: e.args.len(),
                expected: expected.to_string(),
            };
            let ok = match e.kind.category() {
                EdgeCategory::Fixed => Some(e.args.len()) == e.kind.fixed_arity(),
                EdgeCategory::NAry => match e.kind {
                    EdgeKind::Object => !e.args.is_empty() && e.labels.len() == e.args.len() - 1,
                    _ => e.args.len() >= 2 && e.labels.len() == e.args.len() - 1,
                },
                EdgeCategory::NPairs => e.args.len() >= 4 && e.args.len() % 2 == 0,
            };
            if !ok {
                return Err(arity_err(match e.kind.category() {
                    EdgeCategory::Fixed => "the fixed signature",
                    EdgeCategory::NAry => "a head plus one label per argument",
                    EdgeCategory::NPairs => "a head pair plus at least one pair",
                }));
            }
        }
        Ok(())
    }

    /// Drops every edge of the given kinds.
    pub fn without_kinds(&self, drop: impl Fn(EdgeKind) -> bool) -> TypeDependencyGraph {
        let mut g = self.clone();
        g.edges.retain(|e| !drop(e.kind));
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: GraphJson =
            serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        if raw.version != GRAPH_FORMAT_VERSION {
            return Err(GraphError::Version(raw.version));
        }
        let g = TypeDependencyGraph::try_from(raw)?;
        g.validate()?;
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    version: u32,
    nodes: Vec<NodeJson>,
    edges: Vec<EdgeJson>,
    user_types: BTreeMap<String, NodeId>,
    annotations: BTreeMap<NodeId, String>,
    #[serde(default)]
    occurrences: BTreeMap<NodeId, u32>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: NodeId,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    const_type: Option<String>,
    tokens: Vec<String>,
    name: String,
    origin: NodeOrigin,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    span: Option<Span>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    kind: EdgeKind,
    category: EdgeCategory,
    args: Vec<NodeId>,
    labels: Vec<EdgeLabel>,
}

impl From<&TypeDependencyGraph> for GraphJson {
    fn from(g: &TypeDependencyGraph) -> Self {
        GraphJson {
            version: GRAPH_FORMAT_VERSION,
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id,
                    kind: match n.kind {
                        NodeKind::Variable => "variable".into(),
                        NodeKind::Constant(_) => "constant".into(),
                    },
                    const_type: n.constant_type().map(str::to_string),
                    tokens: n.name_tokens.clone(),
                    name: n.name.clone(),
                    origin: n.origin,
                    span: n.span,
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeJson {
                    kind: e.kind,
                    category: e.category(),
                    args: e.args.clone(),
                    labels: e.labels.clone(),
                })
                .collect(),
            user_types: g.user_type_nodes.clone(),
            annotations: g.annotations.clone(),
            occurrences: g.occurrences.clone(),
        }
    }
}

impl TryFrom<GraphJson> for TypeDependencyGraph {
    type Error = GraphError;

    fn try_from(raw: GraphJson) -> Result<Self, GraphError> {
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for (i, n) in raw.nodes.into_iter().enumerate() {
            if n.id != i {
                return Err(GraphError::Json(format!(
                    "node ids must be dense, found {} at {}",
                    n.id, i
                )));
            }
            let kind = match (n.kind.as_str(), n.const_type) {
                ("variable", None) => NodeKind::Variable,
                ("constant", Some(t)) => NodeKind::Constant(t),
                (k, _) => {
                    return Err(GraphError::Json(format!(
                        "bad node kind `{k}` for node {i}"
                    )))
                }
            };
            nodes.push(TypeNode {
                id: i,
                kind,
                origin: n.origin,
                name: n.name,
                name_tokens: n.tokens,
                span: n.span,
            });
        }
        let mut edges = Vec::with_capacity(raw.edges.len());
        for e in raw.edges {
            if e.category != e.kind.category() {
                return Err(GraphError::Json(format!(
                    "{} edge with category {:?}",
                    e.kind, e.category
                )));
            }
            edges.push(Hyperedge {
                kind: e.kind,
                args: e.args,
                labels: e.labels,
            });
        }
        Ok(TypeDependencyGraph {
            nodes,
            edges,
            user_type_nodes: raw.user_types,
            annotations: raw.annotations,
            occurrences: raw.occurrences,
        })
    }
}
