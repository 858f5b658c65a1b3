use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::frontend::ast::{BinOp, UnOp};
use crate::frontend::ir::{Atom, FlatExpr, IrDecl, IrFunction, IrModule, IrStmt, VarKind};

/// Full pipeline: logical edges, `Name` edges, `Usage` edges and finally
/// `NameSimilar` edges (so library nodes added for usages take part).
pub fn build_graph(ir: &IrModule, manifest: &LibraryManifest) -> TypeDependencyGraph {
    let g = extract_graph(ir);
    let g = add_usage_edges(g, ir, manifest);
    add_name_similar_edges(g)
}

/// Builds nodes for every IR variable (same ids), constant nodes for each
/// literal and operator occurrence, the logical edges and one `Name` edge per
/// named node.
pub fn extract_graph(ir: &IrModule) -> TypeDependencyGraph {
    let mut g = TypeDependencyGraph::default();
    for v in &ir.vars {
        let origin = match v.kind {
            VarKind::Field => NodeOrigin::Field,
            VarKind::Param => NodeOrigin::Param,
            VarKind::Return => NodeOrigin::Return,
            VarKind::Local => NodeOrigin::Local,
            VarKind::Fresh => NodeOrigin::Intermediate,
            VarKind::Class => NodeOrigin::Class,
            VarKind::Function => NodeOrigin::Function,
            VarKind::Method => NodeOrigin::Method,
            VarKind::Global => NodeOrigin::Global,
        };
        let tokens = v
            .source_name
            .as_deref()
            .map(tokenize_identifier)
            .unwrap_or_default();
        let id = g.push_node(
            NodeKind::Variable,
            origin,
            v.name.clone(),
            tokens,
            Some(v.span),
        );
        debug_assert_eq!(id, v.id);
    }

    let mut ex = Extractor { g: &mut g };
    for decl in &ir.decls {
        match decl {
            IrDecl::Class(c) => {
                let (labels, members): (Vec<_>, Vec<_>) = c
                    .members()
                    .map(|(name, v)| (EdgeLabel::Ident(name.to_string()), v))
                    .unzip();
                let mut args = vec![c.var];
                args.extend(members);
                ex.edge(EdgeKind::Object, args, labels);
                if let Some(sup) = &c.superclass {
                    if let Some(parent) = ir.classes().find(|p| &p.name == sup) {
                        ex.edge(EdgeKind::Subtype, vec![c.var, parent.var], vec![]);
                    }
                }
                ex.stmts(&c.init, None);
                for m in &c.methods {
                    ex.function(m);
                }
            }
            IrDecl::Function(f) => ex.function(f),
            IrDecl::Stmts(stmts) => ex.stmts(stmts, None),
        }
    }

    for id in 0..g.nodes.len() {
        let node = &g.nodes[id];
        if !node.is_constant() && !node.name_tokens.is_empty() {
            let label = EdgeLabel::Ident(node.name.clone());
            g.edges.push(Hyperedge {
                kind: EdgeKind::Name,
                args: vec![id],
                labels: vec![label],
            });
        }
    }

    g.user_type_nodes = ir.classes().map(|c| (c.name.clone(), c.var)).collect();
    g.annotations = ir.annotations.clone();
    g.occurrences = ir.occurrences.clone();
    g
}

struct Extractor<'g> {
    g: &'g mut TypeDependencyGraph,
}

impl Extractor<'_> {
    fn edge(&mut self, kind: EdgeKind, args: Vec<NodeId>, labels: Vec<EdgeLabel>) {
        self.g.edges.push(Hyperedge { kind, args, labels });
    }

    fn constant(&mut self, kind: &str, name: String, span: Option<Span>) -> NodeId {
        let origin = if kind.starts_with("op") {
            NodeOrigin::Operator
        } else {
            NodeOrigin::Literal
        };
        self.g.push_node(
            NodeKind::Constant(kind.to_string()),
            origin,
            name,
            Vec::new(),
            span,
        )
    }

    fn atom(&mut self, a: &Atom) -> NodeId {
        match a {
            Atom::Var(v) => *v,
            Atom::Lit(kind, text, span) => {
                self.constant(kind.type_name(), text.clone(), Some(*span))
            }
        }
    }

    fn function(&mut self, f: &IrFunction) {
        let mut args = vec![f.var];
        args.extend(&f.params);
        args.push(f.ret);
        let mut labels: Vec<EdgeLabel> = (1..=f.params.len()).map(EdgeLabel::Position).collect();
        labels.push(EdgeLabel::Position(0));
        self.edge(EdgeKind::Function, args, labels);
        self.stmts(&f.body, Some(f.ret));
    }

    fn stmts(&mut self, stmts: &[IrStmt], ret: Option<NodeId>) {
        for s in stmts {
            match s {
                IrStmt::Bind { var, expr } => self.bind(*var, expr),
                IrStmt::Assign { target, value } => {
                    let v = self.atom(value);
                    self.edge(EdgeKind::Assign, vec![*target, v], vec![]);
                }
                IrStmt::Return { value } => {
                    if let (Some(value), Some(ret)) = (value, ret) {
                        let v = self.atom(value);
                        self.edge(EdgeKind::Subtype, vec![v, ret], vec![]);
                    }
                }
                IrStmt::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    let c = self.atom(cond);
                    self.edge(EdgeKind::Bool, vec![c], vec![]);
                    self.stmts(then_body, ret);
                    self.stmts(else_body, ret);
                }
                IrStmt::While {
                    cond_prelude,
                    cond,
                    body,
                } => {
                    self.stmts(cond_prelude, ret);
                    let c = self.atom(cond);
                    self.edge(EdgeKind::Bool, vec![c], vec![]);
                    self.stmts(body, ret);
                }
            }
        }
    }

    fn bind(&mut self, var: NodeId, expr: &FlatExpr) {
        match expr {
            FlatExpr::Atom(a) => {
                let v = self.atom(a);
                self.edge(EdgeKind::Assign, vec![var, v], vec![]);
            }
            FlatExpr::Access(obj, label) => {
                let o = self.atom(obj);
                self.edge(
                    EdgeKind::Access,
                    vec![var, o],
                    vec![EdgeLabel::Ident(label.clone())],
                );
            }
            FlatExpr::Call(f, args) => {
                let callee = self.atom(f);
                let mut all = vec![var, callee];
                all.extend(args.iter().map(|a| self.atom(a)));
                let labels = (0..=args.len()).map(EdgeLabel::Position).collect();
                self.edge(EdgeKind::Call, all, labels);
            }
            FlatExpr::Object(fields) => {
                let mut all = vec![var];
                let mut labels = Vec::with_capacity(fields.len());
                for (l, a) in fields {
                    all.push(self.atom(a));
                    labels.push(EdgeLabel::Ident(l.clone()));
                }
                self.edge(EdgeKind::Object, all, labels);
            }
            FlatExpr::Binary(op, a, b) => {
                let a = self.atom(a);
                let b = self.atom(b);
                if op.is_logical() {
                    self.edge(EdgeKind::Bool, vec![a], vec![]);
                    self.edge(EdgeKind::Bool, vec![b], vec![]);
                }
                let opnode = self.constant(operator_kind(*op), op.symbol().to_string(), None);
                self.edge(
                    EdgeKind::Call,
                    vec![var, opnode, a, b],
                    (0..=2).map(EdgeLabel::Position).collect(),
                );
            }
            FlatExpr::Unary(op, a) => {
                let a = self.atom(a);
                let kind = match op {
                    UnOp::Not => {
                        self.edge(EdgeKind::Bool, vec![a], vec![]);
                        "op!"
                    }
                    UnOp::Neg => "opneg",
                };
                let opnode = self.constant(kind, op.symbol().to_string(), None);
                self.edge(
                    EdgeKind::Call,
                    vec![var, opnode, a],
                    (0..=1).map(EdgeLabel::Position).collect(),
                );
            }
        }
    }
}

fn operator_kind(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "op+",
        BinOp::Sub => "op-",
        BinOp::Mul => "op*",
        BinOp::Div => "op/",
        BinOp::Lt => "op<",
        BinOp::Le => "op<=",
        BinOp::Gt => "op>",
        BinOp::Ge => "op>=",
        BinOp::Eq => "op==",
        BinOp::And => "op&&",
        BinOp::Or => "op||",
    }
}

/// Adds `NameSimilar(a, b)` for every unordered pair of distinct named
/// variable nodes whose token sets intersect.
pub fn add_name_similar_edges(mut g: TypeDependencyGraph) -> TypeDependencyGraph {
    let named: Vec<(NodeId, BTreeSet<&str>)> = g
        .nodes
        .iter()
        .filter(|n| !n.is_constant() && !n.name_tokens.is_empty())
        .map(|n| (n.id, n.name_tokens.iter().map(String::as_str).collect()))
        .collect();
    let mut new_edges = Vec::new();
    for (i, (a, ta)) in named.iter().enumerate() {
        for (b, tb) in &named[i + 1..] {
            if !ta.is_disjoint(tb) {
                new_edges.push(Hyperedge {
                    kind: EdgeKind::NameSimilar,
                    args: vec![*a, *b],
                    labels: vec![],
                });
            }
        }
    }
    g.edges.extend(new_edges);
    g
}

/// For every access `y = x.l` adds `Usage_l((x, y), (C1, C1.l), ...)` over
/// all project classes and library classes that define a member `l`.
/// Library classes get nodes the first time one of their members is used:
/// one node for the class and one per used member, tied by an `Object` edge
/// and named by `Name` edges.
pub fn add_usage_edges(
    mut g: TypeDependencyGraph,
    ir: &IrModule,
    manifest: &LibraryManifest,
) -> TypeDependencyGraph {
    let accesses: Vec<(NodeId, NodeId, String)> = g
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Access)
        .map(|e| {
            (
                e.args[1],
                e.args[0],
                e.ident_label().unwrap_or_default().to_string(),
            )
        })
        .collect();

    let mut lib_nodes: BTreeMap<String, (NodeId, BTreeMap<String, NodeId>)> = BTreeMap::new();
    let mut new_edges = Vec::new();
    for (obj, result, label) in accesses {
        let mut args = vec![obj, result];
        for class in ir.classes() {
            if let Some((_, member)) = class.members().find(|(n, _)| *n == label) {
                args.push(class.var);
                args.push(member);
            }
        }
        for lib in manifest.classes_with(&label) {
            let (class_node, members) = lib_nodes.entry(lib.to_string()).or_insert_with(|| {
                (
                    named_node(&mut g, NodeOrigin::LibraryClass, lib),
                    BTreeMap::new(),
                )
            });
            let class_node = *class_node;
            let member = *members
                .entry(label.clone())
                .or_insert_with(|| named_node(&mut g, NodeOrigin::LibraryMember, &label));
            args.push(class_node);
            args.push(member);
        }
        if args.len() > 2 {
            new_edges.push(Hyperedge {
                kind: EdgeKind::Usage,
                args,
                labels: vec![EdgeLabel::Ident(label)],
            });
        }
    }

    for (class_node, members) in lib_nodes.values() {
        let mut args = vec![*class_node];
        let mut labels = Vec::new();
        for (name, id) in members {
            args.push(*id);
            labels.push(EdgeLabel::Ident(name.clone()));
        }
        g.edges.push(Hyperedge {
            kind: EdgeKind::Object,
            args: args.clone(),
            labels,
        });
        for id in args {
            let name = g.nodes[id].name.clone();
            g.edges.push(Hyperedge {
                kind: EdgeKind::Name,
                args: vec![id],
                labels: vec![EdgeLabel::Ident(name)],
            });
        }
    }
    g.edges.extend(new_edges);
    g
}

fn named_node(g: &mut TypeDependencyGraph, origin: NodeOrigin, name: &str) -> NodeId {
    g.push_node(
        NodeKind::Variable,
        origin,
        name.to_string(),
        tokenize_identifier(name),
        None,
    )
}
