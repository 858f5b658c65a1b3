//! Parsing and lowering of the TypeScript subset.
//!
//! The subset covers classes (single inheritance, fields, methods), top-level
//! functions, `let` declarations, assignment, `return`, `if`/`while`, member
//! access, calls, object literals, number/string/boolean literals and the
//! operators `+ - * / < <= > >= == && || !`. Anything else is reported as an
//! [`FrontendError::Unsupported`] construct.

pub mod ast;
pub mod ir;
mod lexer;
mod lower;
mod occurrences;
mod parser;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{Span, SubsetAst};
pub use ir::{IrModule, VarId, VarKind};
pub use lower::lower_to_ir;
pub use occurrences::{count_occurrences, SourceVar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{path}:{line}:{col}: syntax error: {message}")]
    Syntax {
        path: String,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{path}:{}:{}: unsupported construct: {construct}", span.line, span.col)]
    Unsupported {
        path: String,
        span: Span,
        construct: String,
    },
    #[error("{path}:{}:{}: duplicate top-level name `{name}`", span.line, span.col)]
    DuplicateName {
        path: String,
        span: Span,
        name: String,
    },
    #[error("duplicate file path `{0}` in project")]
    DuplicatePath(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

/// A project is analysed as one unit: all files share one namespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProject {
    pub project_id: String,
    pub files: Vec<SourceFile>,
}

impl SourceProject {
    pub fn single(
        project_id: impl Into<String>,
        path: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        SourceProject {
            project_id: project_id.into(),
            files: vec![SourceFile {
                path: path.into(),
                text: text.into(),
            }],
        }
    }

    /// Reads every `.ts` file under `dir`, sorted by relative path.
    pub fn from_dir(dir: &Path) -> Result<Self, FrontendError> {
        let io = |p: &Path, e: std::io::Error| FrontendError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        };
        let mut paths = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).map_err(|e| io(&d, e))? {
                let p = entry.map_err(|e| io(&d, e))?.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|e| e == "ts") {
                    paths.push(p);
                }
            }
        }
        paths.sort();
        let mut files = Vec::with_capacity(paths.len());
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
            let rel = p.strip_prefix(dir).unwrap_or(&p);
            files.push(SourceFile {
                path: rel.to_string_lossy().replace('\\', "/"),
                text,
            });
        }
        let project_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(SourceProject { project_id, files })
    }
}

/// Parses every file of the project into one syntax tree.
pub fn parse_project(src: &SourceProject) -> Result<SubsetAst, FrontendError> {
    let mut ast = SubsetAst::default();
    let mut top_names: HashMap<String, ()> = HashMap::new();
    for (index, file) in src.files.iter().enumerate() {
        if ast.files.contains(&file.path) {
            return Err(FrontendError::DuplicatePath(file.path.clone()));
        }
        ast.files.push(file.path.clone());
        let tokens = lexer::tokenize(&file.text, index, &file.path)?;
        let items = parser::Parser::new(tokens, &file.path).parse_file()?;
        for item in &items {
            let name = match item {
                ast::Item::Class(c) => Some(&c.name),
                ast::Item::Function(f) => Some(&f.name),
                ast::Item::Stmt(ast::Stmt::Let { name, .. }) => Some(name),
                ast::Item::Stmt(_) => None,
            };
            if let Some(name) = name {
                if top_names.insert(name.name.clone(), ()).is_some() {
                    return Err(FrontendError::DuplicateName {
                        path: file.path.clone(),
                        span: name.span,
                        name: name.name.clone(),
                    });
                }
            }
        }
        ast.items.extend(items);
    }
    Ok(ast)
}

/// Parses and lowers a project in one step.
pub fn compile_project(src: &SourceProject) -> Result<IrModule, FrontendError> {
    parse_project(src).map(|ast| lower_to_ir(&ast))
}
