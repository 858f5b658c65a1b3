use std::collections::{BTreeMap, HashMap};

use super::ast::*;

/// A declared source variable, identified by its name and declaration site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceVar {
    pub name: String,
    pub span: Span,
}

/// Counts source occurrences of every declared variable. The declaration
/// itself counts once; `this.m` inside a class counts toward member `m`.
/// Free identifiers (library globals) are not declared and are not counted.
pub fn count_occurrences(ast: &SubsetAst) -> BTreeMap<SourceVar, u32> {
    let mut c = Counter {
        counts: BTreeMap::new(),
        scopes: Vec::new(),
        top_lets: HashMap::new(),
        top_decls: HashMap::new(),
        members: HashMap::new(),
    };
    for item in &ast.items {
        match item {
            Item::Class(cl) => {
                let sv = c.declare(&cl.name);
                c.top_decls.insert(cl.name.name.clone(), sv);
            }
            Item::Function(f) => {
                let sv = c.declare(&f.name);
                c.top_decls.insert(f.name.name.clone(), sv);
            }
            Item::Stmt(_) => {}
        }
    }
    for item in &ast.items {
        match item {
            Item::Class(cl) => {
                c.members.clear();
                for f in &cl.fields {
                    let sv = c.declare(&f.name);
                    c.members.insert(f.name.name.clone(), sv);
                }
                for m in &cl.methods {
                    let sv = c.declare(&m.name);
                    c.members.insert(m.name.name.clone(), sv);
                }
                for f in &cl.fields {
                    if let Some(e) = &f.init {
                        c.expr(e);
                    }
                }
                for m in &cl.methods {
                    c.function(m);
                }
                c.members.clear();
            }
            Item::Function(f) => c.function(f),
            Item::Stmt(s) => c.stmt(s, true),
        }
    }
    c.counts
}

struct Counter {
    counts: BTreeMap<SourceVar, u32>,
    scopes: Vec<HashMap<String, SourceVar>>,
    top_lets: HashMap<String, SourceVar>,
    top_decls: HashMap<String, SourceVar>,
    members: HashMap<String, SourceVar>,
}

impl Counter {
    fn declare(&mut self, id: &Ident) -> SourceVar {
        let sv = SourceVar {
            name: id.name.clone(),
            span: id.span,
        };
        *self.counts.entry(sv.clone()).or_insert(0) += 1;
        sv
    }

    fn hit(&mut self, sv: Option<SourceVar>) {
        if let Some(sv) = sv {
            *self.counts.entry(sv).or_insert(0) += 1;
        }
    }

    fn lookup(&self, name: &str) -> Option<SourceVar> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .or_else(|| self.top_lets.get(name))
            .or_else(|| self.top_decls.get(name))
            .cloned()
    }

    fn function(&mut self, f: &FunctionDecl) {
        let saved = std::mem::take(&mut self.scopes);
        let mut scope = HashMap::new();
        for p in &f.params {
            let sv = self.declare(&p.name);
            scope.insert(p.name.name.clone(), sv);
        }
        self.scopes.push(scope);
        self.block(&f.body);
        self.scopes = saved;
    }

    fn block(&mut self, stmts: &[Stmt]) {
        self.scopes.push(HashMap::new());
        for s in stmts {
            self.stmt(s, false);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt, top_level: bool) {
        match s {
            Stmt::Let { name, init, .. } => {
                self.expr(init);
                let sv = self.declare(name);
                if top_level {
                    self.top_lets.insert(name.name.clone(), sv);
                } else if let Some(scope) = self.scopes.last_mut() {
                    scope.insert(name.name.clone(), sv);
                }
            }
            Stmt::Assign { target, value, .. } => {
                self.expr(target);
                self.expr(value);
            }
            Stmt::Return { value, .. } => {
                if let Some(v) = value {
                    self.expr(v);
                }
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                self.expr(cond);
                self.block(then_branch);
                self.block(else_branch);
            }
            Stmt::While { cond, body, .. } => {
                self.expr(cond);
                self.block(body);
            }
            Stmt::Expr(e) => self.expr(e),
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(n) => {
                let sv = self.lookup(n);
                self.hit(sv);
            }
            ExprKind::This | ExprKind::Lit(..) => {}
            ExprKind::Member(obj, label) => {
                if obj.kind == ExprKind::This {
                    let sv = self.members.get(&label.name).cloned();
                    self.hit(sv);
                } else {
                    self.expr(obj);
                }
            }
            ExprKind::Call(f, args) => {
                self.expr(f);
                args.iter().for_each(|a| self.expr(a));
            }
            ExprKind::Object(fields) => fields.iter().for_each(|(_, v)| self.expr(v)),
            ExprKind::Binary(_, a, b) => {
                self.expr(a);
                self.expr(b);
            }
            ExprKind::Unary(_, a) => self.expr(a),
        }
    }
}
