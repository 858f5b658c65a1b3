//! Flat intermediate representation: every compound expression result is
//! bound to its own variable, so each subexpression owns one type variable.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::ast::{BinOp, LitKind, Span, UnOp};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Field,
    Param,
    /// Return slot of a function or method.
    Return,
    Local,
    /// Introduced by lowering for an intermediate expression.
    Fresh,
    Class,
    Function,
    Method,
    /// Free identifier, e.g. a library function such as `readNumber`.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrVar {
    pub id: VarId,
    /// Printable name: the source name, `v<n>` for fresh variables, or
    /// `<name>.return` for return slots.
    pub name: String,
    /// Identifier the variable carries in the source, if any.
    pub source_name: Option<String>,
    pub kind: VarKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Var(VarId),
    Lit(LitKind, String, Span),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlatExpr {
    Atom(Atom),
    Access(Atom, String),
    Call(Atom, Vec<Atom>),
    Object(Vec<(String, Atom)>),
    Binary(BinOp, Atom, Atom),
    Unary(UnOp, Atom),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrStmt {
    /// `let var = expr`
    Bind {
        var: VarId,
        expr: FlatExpr,
    },
    /// `target = value`
    Assign {
        target: VarId,
        value: Atom,
    },
    Return {
        value: Option<Atom>,
    },
    If {
        cond: Atom,
        then_body: Vec<IrStmt>,
        else_body: Vec<IrStmt>,
    },
    While {
        /// Bindings that compute the condition, re-run on every iteration.
        cond_prelude: Vec<IrStmt>,
        cond: Atom,
        body: Vec<IrStmt>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrFunction {
    pub var: VarId,
    pub name: String,
    pub params: Vec<VarId>,
    pub ret: VarId,
    pub body: Vec<IrStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrClass {
    pub var: VarId,
    pub name: String,
    pub superclass: Option<String>,
    pub fields: Vec<(String, VarId)>,
    /// Field initializers.
    pub init: Vec<IrStmt>,
    pub methods: Vec<IrFunction>,
}

impl IrClass {
    /// Fields followed by methods, in declaration order.
    pub fn members(&self) -> impl Iterator<Item = (&str, VarId)> {
        self.fields
            .iter()
            .map(|(n, v)| (n.as_str(), *v))
            .chain(self.methods.iter().map(|m| (m.name.as_str(), m.var)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrDecl {
    Class(IrClass),
    Function(IrFunction),
    /// Top-level statements, kept in source order between declarations.
    Stmts(Vec<IrStmt>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrModule {
    pub files: Vec<String>,
    pub vars: Vec<IrVar>,
    pub decls: Vec<IrDecl>,
    /// Ground-truth annotations (collapsed type names, `any` excluded).
    pub annotations: BTreeMap<VarId, String>,
    /// Source occurrence count for every declared variable.
    pub occurrences: BTreeMap<VarId, u32>,
}

impl IrModule {
    pub fn var(&self, id: VarId) -> &IrVar {
        &self.vars[id]
    }

    pub fn classes(&self) -> impl Iterator<Item = &IrClass> {
        self.decls.iter().filter_map(|d| match d {
            IrDecl::Class(c) => Some(c),
            _ => None,
        })
    }

    pub fn fresh_count(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Fresh)
            .count()
    }

    /// Line-oriented dump, one binding per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for decl in &self.decls {
            match decl {
                IrDecl::Class(c) => {
                    let sup = c
                        .superclass
                        .as_ref()
                        .map(|s| format!(" extends {s}"))
                        .unwrap_or_default();
                    let _ = writeln!(out, "class {} %{}{}", c.name, c.var, sup);
                    for (name, v) in &c.fields {
                        let _ = writeln!(out, "  field {} %{}{}", name, v, self.ann_suffix(*v));
                    }
                    self.dump_stmts(&mut out, &c.init, 2);
                    for m in &c.methods {
                        self.dump_function(&mut out, "method", m, 2);
                    }
                }
                IrDecl::Function(f) => self.dump_function(&mut out, "function", f, 0),
                IrDecl::Stmts(stmts) => self.dump_stmts(&mut out, stmts, 0),
            }
        }
        out
    }

    fn ann_suffix(&self, v: VarId) -> String {
        self.annotations
            .get(&v)
            .map(|t| format!(" : {t}"))
            .unwrap_or_default()
    }

    fn dump_function(&self, out: &mut String, keyword: &str, f: &IrFunction, indent: usize) {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{} %{}{}", self.vars[*p].name, p, self.ann_suffix(*p)))
            .collect();
        let _ = writeln!(
            out,
            "{:indent$}{} {} %{} ({}) -> %{}{}",
            "",
            keyword,
            f.name,
            f.var,
            params.join(", "),
            f.ret,
            self.ann_suffix(f.ret),
        );
        self.dump_stmts(out, &f.body, indent + 2);
    }

    fn dump_stmts(&self, out: &mut String, stmts: &[IrStmt], indent: usize) {
        for s in stmts {
            match s {
                IrStmt::Bind { var, expr } => {
                    let _ = writeln!(
                        out,
                        "{:indent$}let {} %{}{} = {}",
                        "",
                        self.vars[*var].name,
                        var,
                        self.ann_suffix(*var),
                        self.show_expr(expr)
                    );
                }
                IrStmt::Assign { target, value } => {
                    let _ = writeln!(
                        out,
                        "{:indent$}{} = {}",
                        "",
                        self.vars[*target].name,
                        self.show_atom(value)
                    );
                }
                IrStmt::Return { value } => {
                    let v = value.as_ref().map(|a| format!(" {}", self.show_atom(a)));
                    let _ = writeln!(out, "{:indent$}return{}", "", v.unwrap_or_default());
                }
                IrStmt::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    let _ = writeln!(out, "{:indent$}if {}", "", self.show_atom(cond));
                    self.dump_stmts(out, then_body, indent + 2);
                    if !else_body.is_empty() {
                        let _ = writeln!(out, "{:indent$}else", "");
                        self.dump_stmts(out, else_body, indent + 2);
                    }
                }
                IrStmt::While {
                    cond_prelude,
                    cond,
                    body,
                } => {
                    let _ = writeln!(out, "{:indent$}loop", "");
                    self.dump_stmts(out, cond_prelude, indent + 2);
                    let _ = writeln!(out, "{:indent$}while {}", "", self.show_atom(cond));
                    self.dump_stmts(out, body, indent + 2);
                }
            }
        }
    }

    fn show_atom(&self, a: &Atom) -> String {
        match a {
            Atom::Var(v) => self.vars[*v].name.clone(),
            Atom::Lit(LitKind::String, s, _) => format!("{s:?}"),
            Atom::Lit(_, s, _) => s.clone(),
        }
    }

    fn show_expr(&self, e: &FlatExpr) -> String {
        match e {
            FlatExpr::Atom(a) => self.show_atom(a),
            FlatExpr::Access(o, l) => format!("{}.{}", self.show_atom(o), l),
            FlatExpr::Call(f, args) => {
                let args: Vec<String> = args.iter().map(|a| self.show_atom(a)).collect();
                format!("{}({})", self.show_atom(f), args.join(", "))
            }
            FlatExpr::Object(fields) => {
                let fs: Vec<String> = fields
                    .iter()
                    .map(|(l, a)| format!("{}: {}", l, self.show_atom(a)))
                    .collect();
                format!("{{{}}}", fs.join(", "))
            }
            FlatExpr::Binary(op, a, b) => {
                format!(
                    "{} {} {}",
                    self.show_atom(a),
                    op.symbol(),
                    self.show_atom(b)
                )
            }
            FlatExpr::Unary(op, a) => format!("{}{}", op.symbol(), self.show_atom(a)),
        }
    }
}

impl fmt::Display for IrModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}
