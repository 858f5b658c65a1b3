//! Synthetic TypeScript-subset projects with fully annotated declarations.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{compile_project, FrontendError, SourceFile, SourceProject};
use crate::graph::{build_graph, LibraryManifest};
use crate::trainer::{Corpus, Project};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Inclusive ranges.
    pub classes: (usize, usize),
    pub fields: (usize, usize),
    pub methods: (usize, usize),
    pub functions: (usize, usize),
    /// Chance that a variable is named after its type.
    pub name_correlation: f64,
    pub lib_types: Vec<String>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            train: 60,
            val: 10,
            test: 10,
            classes: (3, 5),
            fields: (2, 4),
            methods: (1, 2),
            functions: (3, 5),
            name_correlation: 0.7,
            lib_types: [
                "number", "string", "boolean", "Date", "Array", "Map", "Set", "RegExp",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProject {
    pub name: String,
    pub files: Vec<SourceFile>,
}

impl SyntheticProject {
    pub fn to_source(&self) -> SourceProject {
        SourceProject {
            project_id: self.name.clone(),
            files: self.files.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub train: Vec<SyntheticProject>,
    pub val: Vec<SyntheticProject>,
    pub test: Vec<SyntheticProject>,
}

impl GeneratedCorpus {
    pub fn splits(&self) -> [(&'static str, &[SyntheticProject]); 3] {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ]
    }

    /// Parses and extracts every project.
    pub fn compile(&self) -> Result<Corpus, FrontendError> {
        let manifest = LibraryManifest::default();
        let conv = |ps: &[SyntheticProject]| -> Result<Vec<Project>, FrontendError> {
            ps.iter()
                .map(|p| {
                    let ir = compile_project(&p.to_source())?;
                    Ok(Project {
                        name: p.name.clone(),
                        graph: build_graph(&ir, &manifest),
                    })
                })
                .collect()
        };
        Ok(Corpus {
            train: conv(&self.train)?,
            val: conv(&self.val)?,
            test: conv(&self.test)?,
        })
    }
}

pub fn generate_corpus(spec: &SyntheticSpec, seed: u64) -> GeneratedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = spec.train + spec.val + spec.test;
    let mut all: Vec<SyntheticProject> = (0..total)
        .map(|i| generate_project(spec, &format!("project{i:03}"), rng.gen()))
        .collect();
    let test = all.split_off(spec.train + spec.val);
    let val = all.split_off(spec.train);
    GeneratedCorpus {
        train: all,
        val,
        test,
    }
}

const PREFIXES: &[&str] = &[
    "Data", "User", "Order", "Network", "Image", "File", "Event", "Task", "Cache", "Stream",
    "Token", "Graph", "Queue", "Report", "Session", "Account", "Message", "Invoice", "Sensor",
    "Record", "Layer", "Player", "Vector", "Matrix", "Shape", "Route", "Buffer", "Channel",
    "Widget", "Camera",
];
const SUFFIXES: &[&str] = &[
    "Manager",
    "Store",
    "Builder",
    "Parser",
    "Node",
    "Item",
    "Handler",
    "Info",
    "Model",
    "Entry",
    "Service",
    "Controller",
    "View",
    "Loader",
    "Writer",
];
const GENERIC: &[&str] = &[
    "data", "value", "item", "info", "obj", "tmp", "current", "other", "thing", "elem", "arg",
    "res", "input", "output", "target", "source", "entity", "payload", "state", "ref",
];
const GENERIC_FNS: &[&str] = &[
    "process", "handle", "run", "doWork", "execute", "apply", "update", "step", "perform",
    "resolve",
];
const ADJECTIVES: &[&str] = &[
    "current", "next", "main", "other", "first", "last", "my", "new",
];

fn lib_names(ty: &str) -> &'static [&'static str] {
    match ty {
        "number" => &[
            "count", "size", "total", "width", "height", "age", "score", "amount", "level",
            "length",
        ],
        "string" => &[
            "name",
            "title",
            "label",
            "text",
            "path",
            "url",
            "key",
            "description",
            "message",
        ],
        "boolean" => &[
            "enabled", "visible", "done", "active", "valid", "ready", "flag", "dirty",
        ],
        "Date" => &[
            "date",
            "startDate",
            "createdDate",
            "deadline",
            "birthday",
            "updatedDate",
        ],
        "Array" => &["items", "list", "values", "entries", "children", "elements"],
        "Map" => &["lookup", "registry", "dict", "mapping", "table"],
        "Set" => &["seen", "visited", "tags", "members", "unique"],
        "RegExp" => &["pattern", "regex", "matcher", "rule"],
        _ => &["value"],
    }
}

fn lib_fn_names(ty: &str) -> &'static [&'static str] {
    match ty {
        "number" => &["computeTotal", "countItems", "getSize", "measureWidth"],
        "string" => &["formatName", "getLabel", "describe", "renderText"],
        "boolean" => &["isValid", "checkReady", "isDone", "hasAccess"],
        "Date" => &["getDeadline", "parseDate", "nextDate"],
        "Array" => &["listItems", "collectEntries", "getChildren"],
        "Map" => &["buildLookup", "makeRegistry"],
        "Set" => &["collectTags", "uniqueMembers"],
        "RegExp" => &["makePattern", "compileRule"],
        _ => &["compute"],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Lib(usize),
    User(usize),
}

struct Class {
    name: String,
    fields: Vec<(String, Ty)>,
    /// Getter name per field index.
    getters: Vec<(String, usize)>,
}

struct Gen<'a> {
    spec: &'a SyntheticSpec,
    rng: ChaCha8Rng,
    classes: Vec<Class>,
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn upper_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn unique(base: String, used: &mut BTreeSet<String>) -> String {
    let mut name = base.clone();
    let mut i = 2;
    while used.contains(&name) {
        name = format!("{base}V{i}");
        i += 1;
    }
    used.insert(name.clone());
    name
}

impl Gen<'_> {
    fn ty_name(&self, t: Ty) -> String {
        match t {
            Ty::Lib(i) => self.spec.lib_types[i].clone(),
            Ty::User(i) => self.classes[i].name.clone(),
        }
    }

    fn lib(&self, name: &str) -> Option<Ty> {
        self.spec
            .lib_types
            .iter()
            .position(|t| t == name)
            .map(Ty::Lib)
    }

    fn random_lib(&mut self) -> Ty {
        // Primitives dominate real code.
        let n = self.spec.lib_types.len();
        let i = if n > 3 && self.rng.gen_bool(0.6) {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..n)
        };
        Ty::Lib(i)
    }

    fn random_ty(&mut self, user_p: f64, exclude: Option<usize>) -> Ty {
        let choices: Vec<usize> = (0..self.classes.len())
            .filter(|&c| Some(c) != exclude)
            .collect();
        if !choices.is_empty() && self.rng.gen_bool(user_p) {
            Ty::User(*choices.choose(&mut self.rng).expect("nonempty"))
        } else {
            self.random_lib()
        }
    }

    fn var_name(&mut self, t: Ty, used: &mut BTreeSet<String>) -> String {
        let base = if self.rng.gen_bool(self.spec.name_correlation) {
            match t {
                Ty::User(c) => {
                    let n = self.classes[c].name.clone();
                    if self.rng.gen_bool(0.5) {
                        lower_first(&n)
                    } else {
                        format!("{}{n}", ADJECTIVES.choose(&mut self.rng).expect("nonempty"))
                    }
                }
                Ty::Lib(i) => {
                    let ty = self.spec.lib_types[i].clone();
                    lib_names(&ty)
                        .choose(&mut self.rng)
                        .expect("nonempty")
                        .to_string()
                }
            }
        } else {
            GENERIC.choose(&mut self.rng).expect("nonempty").to_string()
        };
        unique(base, used)
    }

    fn literal(&mut self, t: Ty) -> Option<String> {
        let name = self.ty_name(t);
        Some(match name.as_str() {
            "number" => format!("{}", self.rng.gen_range(0..100)),
            "string" => format!("\"{}\"", GENERIC.choose(&mut self.rng).expect("nonempty")),
            "boolean" => if self.rng.gen_bool(0.5) {
                "true"
            } else {
                "false"
            }
            .to_string(),
            _ => return None,
        })
    }

    fn classes(&mut self) {
        let n = self
            .rng
            .gen_range(self.spec.classes.0..=self.spec.classes.1);
        let mut used = BTreeSet::new();
        while self.classes.len() < n {
            let name = format!(
                "{}{}",
                PREFIXES.choose(&mut self.rng).expect("nonempty"),
                SUFFIXES.choose(&mut self.rng).expect("nonempty")
            );
            if used.insert(name.clone()) {
                self.classes.push(Class {
                    name,
                    fields: Vec::new(),
                    getters: Vec::new(),
                });
            }
        }
        for c in 0..n {
            let k = self.rng.gen_range(self.spec.fields.0..=self.spec.fields.1);
            let mut used = BTreeSet::new();
            for _ in 0..k {
                let t = self.random_ty(0.3, Some(c));
                let f = self.var_name(t, &mut used);
                self.classes[c].fields.push((f, t));
            }
            let m = self
                .rng
                .gen_range(self.spec.methods.0..=self.spec.methods.1)
                .min(k);
            let mut idx: Vec<usize> = (0..k).collect();
            idx.shuffle(&mut self.rng);
            for &fi in idx.iter().take(m) {
                let g = format!("get{}", upper_first(&self.classes[c].fields[fi].0));
                self.classes[c].getters.push((g, fi));
            }
        }
    }

    fn emit_classes(&mut self) -> String {
        let mut out = String::new();
        for c in 0..self.classes.len() {
            let _ = writeln!(out, "class {} {{", self.classes[c].name);
            for fi in 0..self.classes[c].fields.len() {
                let (f, t) = self.classes[c].fields[fi].clone();
                let tn = self.ty_name(t);
                match self.literal(t).filter(|_| self.rng.gen_bool(0.5)) {
                    Some(lit) => {
                        let _ = writeln!(out, "  {f}: {tn} = {lit};");
                    }
                    None => {
                        let _ = writeln!(out, "  {f}: {tn};");
                    }
                }
            }
            for gi in 0..self.classes[c].getters.len() {
                let (g, fi) = self.classes[c].getters[gi].clone();
                let (f, t) = self.classes[c].fields[fi].clone();
                let tn = self.ty_name(t);
                let _ = writeln!(out);
                let _ = writeln!(out, "  {g}(): {tn} {{");
                let _ = writeln!(out, "    return this.{f};");
                let _ = writeln!(out, "  }}");
            }
            let setter = self.rng.gen_bool(0.5) && !self.classes[c].fields.is_empty();
            if setter {
                let fi = self.rng.gen_range(0..self.classes[c].fields.len());
                let (f, t) = self.classes[c].fields[fi].clone();
                let tn = self.ty_name(t);
                let mut used = BTreeSet::new();
                let p = self.var_name(t, &mut used);
                let _ = writeln!(out);
                let _ = writeln!(out, "  set{}({p}: {tn}): boolean {{", upper_first(&f));
                let _ = writeln!(out, "    this.{f} = {p};");
                let _ = writeln!(out, "    return true;");
                let _ = writeln!(out, "  }}");
            }
            out.push_str("}\n\n");
        }
        out
    }

    /// Statements exercising a variable of type `t`; new locals are pushed
    /// onto `vars`.
    fn use_var(
        &mut self,
        v: &str,
        t: Ty,
        vars: &mut Vec<(String, Ty)>,
        used: &mut BTreeSet<String>,
        out: &mut String,
    ) {
        let ind = "  ";
        match t {
            Ty::User(c) => {
                let uses = self.rng.gen_range(1..=2);
                for _ in 0..uses {
                    let class = &self.classes[c];
                    let use_getter = !class.getters.is_empty() && self.rng.gen_bool(0.4);
                    let (expr, ft) = if use_getter {
                        let (g, fi) =
                            class.getters[self.rng.gen_range(0..class.getters.len())].clone();
                        (format!("{v}.{g}()"), class.fields[fi].1)
                    } else {
                        let (f, ft) =
                            class.fields[self.rng.gen_range(0..class.fields.len())].clone();
                        (format!("{v}.{f}"), ft)
                    };
                    let l = self.var_name(ft, used);
                    let _ = writeln!(out, "{ind}let {l}: {} = {expr};", self.ty_name(ft));
                    vars.push((l, ft));
                }
            }
            Ty::Lib(i) => {
                let tn = self.spec.lib_types[i].clone();
                let number = self.lib("number");
                let boolean = self.lib("boolean");
                let string = self.lib("string");
                let (expr, rt) = match tn.as_str() {
                    "number" => (format!("{v} * {} + 1", self.rng.gen_range(2..9)), number),
                    "string" => {
                        if self.rng.gen_bool(0.5) {
                            (format!("{v}.length"), number)
                        } else {
                            (format!("{v}.toUpperCase()"), string)
                        }
                    }
                    "boolean" => (format!("!{v}"), boolean),
                    "Date" => (format!("{v}.getTime()"), number),
                    "Array" => (format!("{v}.length"), number),
                    "Map" => (format!("{v}.has(\"key\")"), boolean),
                    "Set" => (format!("{v}.size"), number),
                    "RegExp" => (format!("{v}.test(\"abc\")"), boolean),
                    _ => return,
                };
                if let Some(rt) = rt {
                    let l = self.var_name(rt, used);
                    let ann = if self.rng.gen_bool(0.85) {
                        format!(": {}", self.ty_name(rt))
                    } else {
                        String::new()
                    };
                    let _ = writeln!(out, "{ind}let {l}{ann} = {expr};");
                    if tn == "boolean" && self.rng.gen_bool(0.5) {
                        let _ = writeln!(out, "{ind}if ({v}) {{");
                        let _ = writeln!(out, "{ind}  log({l});");
                        let _ = writeln!(out, "{ind}}}");
                    }
                    vars.push((l, rt));
                }
            }
        }
    }

    fn emit_functions(&mut self) -> String {
        let n = self
            .rng
            .gen_range(self.spec.functions.0..=self.spec.functions.1);
        let mut fn_names: BTreeSet<String> = self.classes.iter().map(|c| c.name.clone()).collect();
        for g in ["log", "readNumber", "parseDate"] {
            fn_names.insert(g.to_string());
        }
        let mut defined: Vec<(String, Vec<Ty>, Ty)> = Vec::new();
        let mut out = String::new();
        for _ in 0..n {
            let mut used = BTreeSet::new();
            let mut vars: Vec<(String, Ty)> = Vec::new();
            let np = self.rng.gen_range(1..=3);
            let mut params = Vec::new();
            for _ in 0..np {
                let t = self.random_ty(0.5, None);
                let p = self.var_name(t, &mut used);
                params.push((p, t));
            }
            vars.extend(params.iter().cloned());
            let mut body = String::new();
            for (p, t) in params.clone() {
                self.use_var(&p, t, &mut vars, &mut used, &mut body);
            }
            if self.rng.gen_bool(0.6) {
                let t = self.random_lib();
                if let Some(lit) = self.literal(t) {
                    let l = self.var_name(t, &mut used);
                    let _ = writeln!(body, "  let {l}: {} = {lit};", self.ty_name(t));
                    vars.push((l, t));
                }
            }
            if self.rng.gen_bool(0.3) {
                let n = self.lib("number");
                let s = self.lib("string");
                if let (Some(n), Some(s)) = (n, s) {
                    let o = unique("options".into(), &mut used);
                    let a = self.literal(n).expect("number literal");
                    let b = self.literal(s).expect("string literal");
                    let _ = writeln!(body, "  let {o} = {{ size: {a}, label: {b} }};");
                }
            }
            if self.rng.gen_bool(0.3) {
                if let Some(n) = self.lib("number") {
                    let i = self.var_name(n, &mut used);
                    let lim = self.rng.gen_range(2..10);
                    let _ = writeln!(body, "  let {i}: number = 0;");
                    let _ = writeln!(body, "  while ({i} < {lim}) {{");
                    let _ = writeln!(body, "    {i} = {i} + 1;");
                    let _ = writeln!(body, "  }}");
                    vars.push((i, n));
                }
            }
            // Call an earlier function when arguments of the right types exist.
            if let Some((callee, ptys, rt)) = defined.choose(&mut self.rng).cloned() {
                let mut args = Vec::new();
                for pt in &ptys {
                    let pool: Vec<&String> = vars
                        .iter()
                        .filter(|(_, t)| t == pt)
                        .map(|(n, _)| n)
                        .collect();
                    match pool.choose(&mut self.rng) {
                        Some(v) => args.push((*v).clone()),
                        None => match self.literal(*pt) {
                            Some(l) => args.push(l),
                            None => break,
                        },
                    }
                }
                if args.len() == ptys.len() {
                    let l = self.var_name(rt, &mut used);
                    let _ = writeln!(
                        body,
                        "  let {l}: {} = {callee}({});",
                        self.ty_name(rt),
                        args.join(", ")
                    );
                    vars.push((l, rt));
                }
            }
            let (rv, rt) = vars
                .choose(&mut self.rng)
                .cloned()
                .expect("at least one param");
            let _ = writeln!(body, "  return {rv};");

            let base = if self.rng.gen_bool(self.spec.name_correlation) {
                match rt {
                    Ty::User(c) => format!(
                        "{}{}",
                        ["make", "build", "load", "find"]
                            .choose(&mut self.rng)
                            .expect("nonempty"),
                        self.classes[c].name
                    ),
                    Ty::Lib(i) => {
                        let tn = self.spec.lib_types[i].clone();
                        lib_fn_names(&tn)
                            .choose(&mut self.rng)
                            .expect("nonempty")
                            .to_string()
                    }
                }
            } else {
                GENERIC_FNS
                    .choose(&mut self.rng)
                    .expect("nonempty")
                    .to_string()
            };
            let fname = unique(base, &mut fn_names);
            let sig: Vec<String> = params
                .iter()
                .map(|(p, t)| format!("{p}: {}", self.ty_name(*t)))
                .collect();
            let _ = writeln!(
                out,
                "function {fname}({}): {} {{",
                sig.join(", "),
                self.ty_name(rt)
            );
            out.push_str(&body);
            out.push_str("}\n\n");
            defined.push((fname, params.iter().map(|p| p.1).collect(), rt));
        }
        out
    }
}

pub fn generate_project(spec: &SyntheticSpec, name: &str, seed: u64) -> SyntheticProject {
    let mut g = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        classes: Vec::new(),
    };
    g.classes();
    let models = g.emit_classes();
    let main = g.emit_functions();
    SyntheticProject {
        name: name.to_string(),
        files: vec![
            SourceFile {
                path: "models.ts".into(),
                text: models,
            },
            SourceFile {
                path: "main.ts".into(),
                text: main,
            },
        ],
    }
}
