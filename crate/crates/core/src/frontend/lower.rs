//! Lowering from the subset AST to the flat IR.
//!
//! Variables are numbered in two passes so that signatures come first:
//! pass one allocates every field, parameter and return slot in source
//! order; pass two walks declarations again, allocating the class, function
//! or method variable followed by the locals and intermediates of its body.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::ir::*;
use super::occurrences::{count_occurrences, SourceVar};

pub fn lower_to_ir(ast: &SubsetAst) -> IrModule {
    let mut used_names = HashSet::new();
    collect_names(ast, &mut used_names);
    let mut lw = Lowerer {
        vars: Vec::new(),
        annotations: BTreeMap::new(),
        used_names,
        fresh_counter: 0,
        scopes: Vec::new(),
        top_lets: HashMap::new(),
        top_decls: HashMap::new(),
        top_decl_spans: HashMap::new(),
        globals: HashMap::new(),
        current_class: None,
    };

    for item in &ast.items {
        match item {
            Item::Class(c) => {
                lw.top_decl_spans
                    .insert(c.name.name.clone(), (c.name.span, VarKind::Class));
            }
            Item::Function(f) => {
                lw.top_decl_spans
                    .insert(f.name.name.clone(), (f.name.span, VarKind::Function));
            }
            Item::Stmt(_) => {}
        }
    }

    // Pass one: signatures.
    struct Sig {
        fields: Vec<VarId>,
        methods: Vec<(Vec<VarId>, VarId)>,
    }
    let mut sigs = Vec::new();
    for item in &ast.items {
        match item {
            Item::Class(c) => {
                let fields = c
                    .fields
                    .iter()
                    .map(|f| lw.declare(VarKind::Field, &f.name, f.ann.as_ref()))
                    .collect();
                let methods = c.methods.iter().map(|m| lw.signature(m)).collect();
                sigs.push(Some(Sig { fields, methods }));
            }
            Item::Function(f) => {
                let sig = lw.signature(f);
                sigs.push(Some(Sig {
                    fields: Vec::new(),
                    methods: vec![sig],
                }));
            }
            Item::Stmt(_) => sigs.push(None),
        }
    }

    // Pass two: declarations and bodies.
    let mut decls = Vec::new();
    let mut pending_stmts: Vec<IrStmt> = Vec::new();
    for (item, sig) in ast.items.iter().zip(sigs) {
        match item {
            Item::Class(c) => {
                flush(&mut decls, &mut pending_stmts);
                let sig = sig.expect("class signature");
                let var = lw.top_level_var(&c.name.name);
                lw.current_class = Some((var, c));
                let mut init = Vec::new();
                lw.scopes.push(HashMap::new());
                for (fd, fv) in c.fields.iter().zip(&sig.fields) {
                    if let Some(e) = &fd.init {
                        let a = lw.atom(e, &mut init);
                        init.push(IrStmt::Assign {
                            target: *fv,
                            value: a,
                        });
                    }
                }
                lw.scopes.pop();
                let methods = c
                    .methods
                    .iter()
                    .zip(sig.methods)
                    .map(|(m, (params, ret))| {
                        let mvar = lw.declare(VarKind::Method, &m.name, None);
                        lw.function_body(m, mvar, params, ret)
                    })
                    .collect();
                lw.current_class = None;
                decls.push(IrDecl::Class(IrClass {
                    var,
                    name: c.name.name.clone(),
                    superclass: c.superclass.as_ref().map(|s| s.name.clone()),
                    fields: c
                        .fields
                        .iter()
                        .map(|f| f.name.name.clone())
                        .zip(sig.fields)
                        .collect(),
                    init,
                    methods,
                }));
            }
            Item::Function(f) => {
                flush(&mut decls, &mut pending_stmts);
                let (params, ret) = sig.expect("function signature").methods.remove(0);
                let var = lw.top_level_var(&f.name.name);
                let func = lw.function_body(f, var, params, ret);
                decls.push(IrDecl::Function(func));
            }
            Item::Stmt(s) => {
                let mut out = Vec::new();
                lw.stmt(s, &mut out, true);
                pending_stmts.extend(out);
            }
        }
    }
    flush(&mut decls, &mut pending_stmts);

    let counts = count_occurrences(ast);
    let mut occurrences = BTreeMap::new();
    for v in &lw.vars {
        if let Some(name) = &v.source_name {
            if let Some(c) = counts.get(&SourceVar {
                name: name.clone(),
                span: v.span,
            }) {
                occurrences.insert(v.id, *c);
            }
        }
    }

    let module = IrModule {
        files: ast.files.clone(),
        vars: lw.vars,
        decls,
        annotations: lw.annotations,
        occurrences,
    };
    globals_last(module)
}

/// Renumbers variables so free globals come after every declared and fresh
/// variable; they are allocated on first use, which would otherwise
/// interleave them with body intermediates.
fn globals_last(mut m: IrModule) -> IrModule {
    let mut order: Vec<VarId> = (0..m.vars.len())
        .filter(|&v| m.vars[v].kind != VarKind::Global)
        .collect();
    order.extend((0..m.vars.len()).filter(|&v| m.vars[v].kind == VarKind::Global));
    let mut remap = vec![0; m.vars.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let mut vars: Vec<IrVar> = order.iter().map(|&old| m.vars[old].clone()).collect();
    for (i, v) in vars.iter_mut().enumerate() {
        v.id = i;
    }
    m.vars = vars;
    m.annotations = m
        .annotations
        .into_iter()
        .map(|(k, v)| (remap[k], v))
        .collect();
    m.occurrences = m
        .occurrences
        .into_iter()
        .map(|(k, v)| (remap[k], v))
        .collect();
    for d in &mut m.decls {
        match d {
            IrDecl::Class(c) => {
                c.var = remap[c.var];
                c.fields.iter_mut().for_each(|(_, v)| *v = remap[*v]);
                remap_stmts(&mut c.init, &remap);
                c.methods.iter_mut().for_each(|f| remap_function(f, &remap));
            }
            IrDecl::Function(f) => remap_function(f, &remap),
            IrDecl::Stmts(s) => remap_stmts(s, &remap),
        }
    }
    m
}

fn remap_function(f: &mut IrFunction, remap: &[VarId]) {
    f.var = remap[f.var];
    f.ret = remap[f.ret];
    f.params.iter_mut().for_each(|p| *p = remap[*p]);
    remap_stmts(&mut f.body, remap);
}

fn remap_atom(a: &mut Atom, remap: &[VarId]) {
    if let Atom::Var(v) = a {
        *v = remap[*v];
    }
}

fn remap_stmts(stmts: &mut [IrStmt], remap: &[VarId]) {
    for s in stmts {
        match s {
            IrStmt::Bind { var, expr } => {
                *var = remap[*var];
                match expr {
                    FlatExpr::Atom(a) | FlatExpr::Access(a, _) | FlatExpr::Unary(_, a) => {
                        remap_atom(a, remap)
                    }
                    FlatExpr::Call(f, args) => {
                        remap_atom(f, remap);
                        args.iter_mut().for_each(|a| remap_atom(a, remap));
                    }
                    FlatExpr::Object(fs) => fs.iter_mut().for_each(|(_, a)| remap_atom(a, remap)),
                    FlatExpr::Binary(_, a, b) => {
                        remap_atom(a, remap);
                        remap_atom(b, remap);
                    }
                }
            }
            IrStmt::Assign { target, value } => {
                *target = remap[*target];
                remap_atom(value, remap);
            }
            IrStmt::Return { value } => {
                if let Some(a) = value {
                    remap_atom(a, remap);
                }
            }
            IrStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                remap_atom(cond, remap);
                remap_stmts(then_body, remap);
                remap_stmts(else_body, remap);
            }
            IrStmt::While {
                cond_prelude,
                cond,
                body,
            } => {
                remap_stmts(cond_prelude, remap);
                remap_atom(cond, remap);
                remap_stmts(body, remap);
            }
        }
    }
}

fn flush(decls: &mut Vec<IrDecl>, pending: &mut Vec<IrStmt>) {
    if !pending.is_empty() {
        decls.push(IrDecl::Stmts(std::mem::take(pending)));
    }
}

fn collect_names(ast: &SubsetAst, out: &mut HashSet<String>) {
    fn expr(e: &Expr, out: &mut HashSet<String>) {
        match &e.kind {
            ExprKind::Ident(n) => {
                out.insert(n.clone());
            }
            ExprKind::This | ExprKind::Lit(..) => {}
            ExprKind::Member(o, _) => expr(o, out),
            ExprKind::Call(f, args) => {
                expr(f, out);
                args.iter().for_each(|a| expr(a, out));
            }
            ExprKind::Object(fs) => fs.iter().for_each(|(_, v)| expr(v, out)),
            ExprKind::Binary(_, a, b) => {
                expr(a, out);
                expr(b, out);
            }
            ExprKind::Unary(_, a) => expr(a, out),
        }
    }
    fn stmts(ss: &[Stmt], out: &mut HashSet<String>) {
        for s in ss {
            match s {
                Stmt::Let { name, init, .. } => {
                    out.insert(name.name.clone());
                    expr(init, out);
                }
                Stmt::Assign { target, value, .. } => {
                    expr(target, out);
                    expr(value, out);
                }
                Stmt::Return { value, .. } => value.iter().for_each(|v| expr(v, out)),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    expr(cond, out);
                    stmts(then_branch, out);
                    stmts(else_branch, out);
                }
                Stmt::While { cond, body, .. } => {
                    expr(cond, out);
                    stmts(body, out);
                }
                Stmt::Expr(e) => expr(e, out),
            }
        }
    }
    fn func(f: &FunctionDecl, out: &mut HashSet<String>) {
        out.insert(f.name.name.clone());
        f.params.iter().for_each(|p| {
            out.insert(p.name.name.clone());
        });
        stmts(&f.body, out);
    }
    for item in &ast.items {
        match item {
            Item::Class(c) => {
                out.insert(c.name.name.clone());
                for f in &c.fields {
                    out.insert(f.name.name.clone());
                    if let Some(e) = &f.init {
                        expr(e, out);
                    }
                }
                c.methods.iter().for_each(|m| func(m, out));
            }
            Item::Function(f) => func(f, out),
            Item::Stmt(s) => stmts(std::slice::from_ref(s), out),
        }
    }
}

struct Lowerer<'a> {
    vars: Vec<IrVar>,
    annotations: BTreeMap<VarId, String>,
    used_names: HashSet<String>,
    fresh_counter: usize,
    /// Innermost last. The first entry inside a function holds its params.
    scopes: Vec<HashMap<String, VarId>>,
    top_lets: HashMap<String, VarId>,
    top_decls: HashMap<String, VarId>,
    top_decl_spans: HashMap<String, (Span, VarKind)>,
    globals: HashMap<String, VarId>,
    current_class: Option<(VarId, &'a ClassDecl)>,
}

impl<'a> Lowerer<'a> {
    fn push_var(
        &mut self,
        name: String,
        source_name: Option<String>,
        kind: VarKind,
        span: Span,
    ) -> VarId {
        let id = self.vars.len();
        self.vars.push(IrVar {
            id,
            name,
            source_name,
            kind,
            span,
        });
        id
    }

    fn declare(&mut self, kind: VarKind, name: &Ident, ann: Option<&TypeAnn>) -> VarId {
        let id = self.push_var(name.name.clone(), Some(name.name.clone()), kind, name.span);
        self.annotate(id, ann);
        id
    }

    fn annotate(&mut self, id: VarId, ann: Option<&TypeAnn>) {
        if let Some(a) = ann {
            if a.name != "any" {
                self.annotations.insert(id, a.name.clone());
            }
        }
    }

    fn signature(&mut self, f: &FunctionDecl) -> (Vec<VarId>, VarId) {
        let params = f
            .params
            .iter()
            .map(|p| self.declare(VarKind::Param, &p.name, p.ann.as_ref()))
            .collect();
        let ret = self.push_var(
            format!("{}.return", f.name.name),
            None,
            VarKind::Return,
            f.name.span,
        );
        self.annotate(ret, f.ret.as_ref());
        (params, ret)
    }

    /// Variable of a top-level class or function; allocated on first use so
    /// forward references resolve to the same variable.
    fn top_level_var(&mut self, name: &str) -> VarId {
        if let Some(v) = self.top_decls.get(name) {
            return *v;
        }
        let (span, kind) = self.top_decl_spans[name];
        let v = self.push_var(name.to_string(), Some(name.to_string()), kind, span);
        self.top_decls.insert(name.to_string(), v);
        v
    }

    fn fresh(&mut self, span: Span) -> VarId {
        let name = loop {
            self.fresh_counter += 1;
            let candidate = format!("v{}", self.fresh_counter);
            if !self.used_names.contains(&candidate) {
                break candidate;
            }
        };
        self.push_var(name, None, VarKind::Fresh, span)
    }

    fn resolve(&mut self, name: &str, span: Span) -> VarId {
        for scope in self.scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return *v;
            }
        }
        if let Some(v) = self.top_lets.get(name) {
            return *v;
        }
        if self.top_decl_spans.contains_key(name) {
            return self.top_level_var(name);
        }
        if let Some(v) = self.globals.get(name) {
            return *v;
        }
        let v = self.push_var(
            name.to_string(),
            Some(name.to_string()),
            VarKind::Global,
            span,
        );
        self.globals.insert(name.to_string(), v);
        v
    }

    fn function_body(
        &mut self,
        f: &FunctionDecl,
        var: VarId,
        params: Vec<VarId>,
        ret: VarId,
    ) -> IrFunction {
        let saved = std::mem::take(&mut self.scopes);
        let mut scope = HashMap::new();
        for (p, v) in f.params.iter().zip(&params) {
            scope.insert(p.name.name.clone(), *v);
        }
        self.scopes.push(scope);
        let mut body = Vec::new();
        self.block(&f.body, &mut body);
        self.scopes = saved;
        IrFunction {
            var,
            name: f.name.name.clone(),
            params,
            ret,
            body,
        }
    }

    fn block(&mut self, stmts: &[Stmt], out: &mut Vec<IrStmt>) {
        self.scopes.push(HashMap::new());
        for s in stmts {
            self.stmt(s, out, false);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<IrStmt>, top_level: bool) {
        match s {
            Stmt::Let { name, ann, init } => {
                let value = self.atom(init, out);
                let var = self.declare(VarKind::Local, name, ann.as_ref());
                if top_level {
                    self.top_lets.insert(name.name.clone(), var);
                } else {
                    self.scopes
                        .last_mut()
                        .expect("block scope")
                        .insert(name.name.clone(), var);
                }
                out.push(IrStmt::Bind {
                    var,
                    expr: FlatExpr::Atom(value),
                });
            }
            Stmt::Assign { target, value, .. } => {
                let target = match &target.kind {
                    ExprKind::Ident(n) => self.resolve(n, target.span),
                    _ => match self.atom(target, out) {
                        Atom::Var(v) => v,
                        Atom::Lit(..) => unreachable!("member access lowers to a variable"),
                    },
                };
                let value = self.atom(value, out);
                out.push(IrStmt::Assign { target, value });
            }
            Stmt::Return { value, .. } => {
                let value = value.as_ref().map(|v| self.atom(v, out));
                out.push(IrStmt::Return { value });
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let cond = self.atom(cond, out);
                let mut then_body = Vec::new();
                self.block(then_branch, &mut then_body);
                let mut else_body = Vec::new();
                self.block(else_branch, &mut else_body);
                out.push(IrStmt::If {
                    cond,
                    then_body,
                    else_body,
                });
            }
            Stmt::While { cond, body, .. } => {
                let mut cond_prelude = Vec::new();
                let cond = self.atom(cond, &mut cond_prelude);
                let mut body_out = Vec::new();
                self.block(body, &mut body_out);
                out.push(IrStmt::While {
                    cond_prelude,
                    cond,
                    body: body_out,
                });
            }
            Stmt::Expr(e) => {
                self.atom(e, out);
            }
        }
    }

    /// Lowers an expression, emitting bindings for every compound
    /// subexpression, and returns the atom holding its value.
    fn atom(&mut self, e: &Expr, out: &mut Vec<IrStmt>) -> Atom {
        let expr = match &e.kind {
            ExprKind::Ident(n) => return Atom::Var(self.resolve(n, e.span)),
            ExprKind::This => {
                return Atom::Var(match self.current_class {
                    Some((v, _)) => v,
                    None => self.resolve("this", e.span),
                })
            }
            ExprKind::Lit(k, s) => return Atom::Lit(*k, s.clone(), e.span),
            ExprKind::Member(obj, label) => {
                let o = self.atom(obj, out);
                FlatExpr::Access(o, label.name.clone())
            }
            ExprKind::Call(f, args) => {
                let fa = self.atom(f, out);
                let args = args.iter().map(|a| self.atom(a, out)).collect();
                FlatExpr::Call(fa, args)
            }
            ExprKind::Object(fields) => {
                let fs = fields
                    .iter()
                    .map(|(k, v)| (k.name.clone(), self.atom(v, out)))
                    .collect();
                FlatExpr::Object(fs)
            }
            ExprKind::Binary(op, a, b) => {
                let a = self.atom(a, out);
                let b = self.atom(b, out);
                FlatExpr::Binary(*op, a, b)
            }
            ExprKind::Unary(op, a) => {
                let a = self.atom(a, out);
                FlatExpr::Unary(*op, a)
            }
        };
        let var = self.fresh(e.span);
        out.push(IrStmt::Bind { var, expr });
        Atom::Var(var)
    }
}
