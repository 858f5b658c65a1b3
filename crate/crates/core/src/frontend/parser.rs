//! Recursive-descent parser for the TypeScript subset.

use super::ast::*;
use super::lexer::{Tok, Token};
use super::FrontendError;

/// Keywords that belong to TypeScript but not to the subset. Reaching one of
/// these is reported as an unsupported construct, never skipped.
const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "for",
    "do",
    "switch",
    "try",
    "throw",
    "import",
    "export",
    "async",
    "await",
    "interface",
    "enum",
    "type",
    "namespace",
    "var",
    "break",
    "continue",
    "new",
    "function*",
    "yield",
    "static",
    "abstract",
    "declare",
    "delete",
    "typeof",
    "instanceof",
    "in",
    "of",
    "super",
];

const MODIFIERS: &[&str] = &["public", "private", "protected", "readonly"];

pub struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    path: &'a str,
}

type PResult<T> = Result<T, FrontendError>;

impl<'a> Parser<'a> {
    pub fn new(toks: Vec<Token>, path: &'a str) -> Self {
        Parser { toks, pos: 0, path }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn syntax(&self, span: Span, message: impl Into<String>) -> FrontendError {
        FrontendError::Syntax {
            path: self.path.to_string(),
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    fn unsupported(&self, span: Span, construct: impl Into<String>) -> FrontendError {
        FrontendError::Unsupported {
            path: self.path.to_string(),
            span,
            construct: construct.into(),
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of file".into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.syntax(
                self.span(),
                format!("expected `{p}`, found {}", self.describe()),
            ))
        }
    }

    fn check_unsupported_keyword(&self) -> PResult<()> {
        if let Tok::Ident(s) = self.peek() {
            if UNSUPPORTED_KEYWORDS.contains(&s.as_str()) {
                return Err(self.unsupported(self.span(), s.clone()));
            }
        }
        Ok(())
    }

    fn ident(&mut self) -> PResult<Ident> {
        self.check_unsupported_keyword()?;
        match self.peek().clone() {
            Tok::Ident(name) if !is_reserved(&name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.syntax(
                self.span(),
                format!("expected identifier, found {}", self.describe()),
            )),
        }
    }

    pub fn parse_file(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> PResult<Item> {
        if self.is_kw("class") {
            return self.class_decl().map(Item::Class);
        }
        if self.is_kw("function") {
            self.bump();
            if self.is_punct("*") {
                return Err(self.unsupported(self.span(), "generator function"));
            }
            return self.function_rest().map(Item::Function);
        }
        self.stmt().map(Item::Stmt)
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        self.bump();
        let name = self.ident()?;
        if self.is_punct("<") {
            self.skip_type_args()?;
        }
        let superclass = if self.is_kw("extends") {
            self.bump();
            let sup = self.ident()?;
            if self.is_punct("<") {
                self.skip_type_args()?;
            }
            Some(sup)
        } else {
            None
        };
        if self.is_kw("implements") {
            return Err(self.unsupported(self.span(), "implements"));
        }
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.syntax(self.span(), "unterminated class body"));
            }
            while matches!(self.peek(), Tok::Ident(s) if MODIFIERS.contains(&s.as_str()))
                && matches!(self.peek_at(1), Tok::Ident(_))
            {
                self.bump();
            }
            let member = self.ident()?;
            if self.is_punct("(") {
                methods.push(self.function_after_name(member)?);
            } else {
                let ann = if self.eat_punct(":") {
                    Some(self.type_ann()?)
                } else {
                    None
                };
                let init = if self.eat_punct("=") {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                fields.push(FieldDecl {
                    name: member,
                    ann,
                    init,
                });
            }
        }
        Ok(ClassDecl {
            name,
            superclass,
            fields,
            methods,
        })
    }

    fn function_rest(&mut self) -> PResult<FunctionDecl> {
        let name = self.ident()?;
        self.function_after_name(name)
    }

    fn function_after_name(&mut self, name: Ident) -> PResult<FunctionDecl> {
        if self.is_punct("<") {
            return Err(self.unsupported(self.span(), "generic function"));
        }
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                if self.is_punct("...") {
                    return Err(self.unsupported(self.span(), "rest parameter"));
                }
                let pname = self.ident()?;
                if self.is_punct("?") || self.is_punct("=") {
                    return Err(self.unsupported(self.span(), "optional parameter"));
                }
                let ann = if self.eat_punct(":") {
                    Some(self.type_ann()?)
                } else {
                    None
                };
                params.push(Param { name: pname, ann });
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        let ret = if self.eat_punct(":") {
            Some(self.type_ann()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(FunctionDecl {
            name,
            params,
            ret,
            body,
        })
    }

    /// Parses an annotation and collapses it to a non-generic, non-function
    /// type name.
    fn type_ann(&mut self) -> PResult<TypeAnn> {
        let span = self.span();
        if self.is_punct("(") {
            self.skip_balanced("(", ")")?;
            if !self.eat_punct("=>") {
                return Err(self.syntax(self.span(), "expected `=>` in function type"));
            }
            self.type_ann()?;
            return Ok(TypeAnn {
                name: "Function".into(),
                span,
            });
        }
        if self.is_punct("{") {
            return Err(self.unsupported(span, "object type literal"));
        }
        let mut name = match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                s
            }
            _ => return Err(self.syntax(span, format!("expected type, found {}", self.describe()))),
        };
        while self.is_punct(".") {
            self.bump();
            name = self.ident()?.name;
        }
        if self.is_punct("<") {
            self.skip_type_args()?;
        }
        while self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.bump();
            self.bump();
            name = "Array".into();
        }
        if self.is_punct("|") || self.is_punct("&") {
            return Err(self.unsupported(self.span(), "union or intersection type"));
        }
        Ok(TypeAnn { name, span })
    }

    fn skip_type_args(&mut self) -> PResult<()> {
        self.skip_balanced("<", ">")
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        let start = self.span();
        self.expect_punct(open)?;
        let mut depth = 1;
        while depth > 0 {
            match self.peek() {
                Tok::Eof => return Err(self.syntax(start, format!("unbalanced `{open}`"))),
                Tok::Punct(p) if *p == open => depth += 1,
                Tok::Punct(p) if *p == close => depth -= 1,
                _ => {}
            }
            self.bump();
        }
        Ok(())
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.syntax(self.span(), "unterminated block"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        self.check_unsupported_keyword()?;
        let span = self.span();
        if self.is_kw("let") || self.is_kw("const") {
            self.bump();
            let name = self.ident()?;
            let ann = if self.eat_punct(":") {
                Some(self.type_ann()?)
            } else {
                None
            };
            if !self.eat_punct("=") {
                return Err(self.syntax(self.span(), "variable declarations need an initializer"));
            }
            let init = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Stmt::Let { name, ann, init });
        }
        if self.is_kw("return") {
            self.bump();
            let value = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(";")?;
            return Ok(Stmt::Return { value, span });
        }
        if self.is_kw("if") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_branch = self.block()?;
            let else_branch = if self.is_kw("else") {
                self.bump();
                if self.is_kw("if") {
                    vec![self.stmt()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            });
        }
        if self.is_kw("while") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body, span });
        }
        if self.is_kw("class") || self.is_kw("function") {
            return Err(self.unsupported(span, "nested declaration"));
        }
        let e = self.expr()?;
        if self.is_punct("=") {
            if !matches!(e.kind, ExprKind::Ident(_) | ExprKind::Member(..)) {
                return Err(self.syntax(self.span(), "invalid assignment target"));
            }
            self.bump();
            let value = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Stmt::Assign {
                target: e,
                value,
                span,
            });
        }
        for op in ["+=", "-=", "*=", "/=", "++", "--"] {
            if self.is_punct(op) {
                return Err(self.unsupported(self.span(), format!("`{op}` operator")));
            }
        }
        self.expect_punct(";")?;
        Ok(Stmt::Expr(e))
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let (op, negate, prec) = match self.peek() {
                Tok::Punct("||") => (BinOp::Or, false, 1),
                Tok::Punct("&&") => (BinOp::And, false, 2),
                Tok::Punct("==") | Tok::Punct("===") => (BinOp::Eq, false, 3),
                Tok::Punct("!=") | Tok::Punct("!==") => (BinOp::Eq, true, 3),
                Tok::Punct("<") => (BinOp::Lt, false, 4),
                Tok::Punct("<=") => (BinOp::Le, false, 4),
                Tok::Punct(">") => (BinOp::Gt, false, 4),
                Tok::Punct(">=") => (BinOp::Ge, false, 4),
                Tok::Punct("+") => (BinOp::Add, false, 5),
                Tok::Punct("-") => (BinOp::Sub, false, 5),
                Tok::Punct("*") => (BinOp::Mul, false, 6),
                Tok::Punct("/") => (BinOp::Div, false, 6),
                Tok::Punct(p @ ("%" | "&" | "|" | "^" | "?")) => {
                    return Err(self.unsupported(self.span(), format!("`{p}` operator")))
                }
                Tok::Ident(kw) if kw == "instanceof" || kw == "in" => {
                    return Err(self.unsupported(self.span(), kw.clone()))
                }
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            let span = lhs.span;
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let bin = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
            lhs = if negate {
                Expr {
                    kind: ExprKind::Unary(UnOp::Not, Box::new(bin)),
                    span,
                }
            } else {
                bin
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = if self.is_punct("!") {
            Some(UnOp::Not)
        } else if self.is_punct("-") {
            Some(UnOp::Neg)
        } else {
            None
        };
        if let Some(op) = op {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(op, Box::new(inner)),
                span,
            });
        }
        if self.is_punct("++") || self.is_punct("--") {
            return Err(self.unsupported(span, "increment operator"));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.is_punct(".") {
                self.bump();
                let member = self.member_name()?;
                let span = e.span;
                e = Expr {
                    kind: ExprKind::Member(Box::new(e), member),
                    span,
                };
            } else if self.is_punct("(") {
                self.bump();
                let mut args = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.eat_punct(")") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                let span = e.span;
                e = Expr {
                    kind: ExprKind::Call(Box::new(e), args),
                    span,
                };
            } else if self.is_punct("[") {
                return Err(self.unsupported(self.span(), "index access"));
            } else if self.is_punct("?.") {
                return Err(self.unsupported(self.span(), "optional chaining"));
            } else {
                return Ok(e);
            }
        }
    }

    /// Member names may be keywords (`x.delete`, `p.then`).
    fn member_name(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.syntax(
                self.span(),
                format!("expected member name, found {}", self.describe()),
            )),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        self.check_unsupported_keyword()?;
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                ExprKind::Lit(LitKind::Number, n)
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Lit(LitKind::String, s)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                ExprKind::Lit(LitKind::Boolean, s)
            }
            Tok::Ident(s) if s == "this" => {
                self.bump();
                ExprKind::This
            }
            Tok::Ident(s) if s == "function" => {
                return Err(self.unsupported(span, "function expression"))
            }
            Tok::Ident(s) if s == "null" || s == "undefined" => {
                return Err(self.unsupported(span, s))
            }
            Tok::Ident(_) => ExprKind::Ident(self.ident()?.name),
            Tok::Punct("(") => {
                self.bump();
                if self.is_punct(")") || self.is_punct(";") || *self.peek() == Tok::Eof {
                    return Err(self.syntax(span, "expected expression after `(`"));
                }
                let inner = self.expr()?;
                if !self.eat_punct(")") {
                    if self.is_punct(",") || self.is_punct(":") {
                        return Err(self.unsupported(span, "arrow function"));
                    }
                    return Err(self.syntax(span, "unclosed `(`"));
                }
                if self.is_punct("=>") {
                    return Err(self.unsupported(span, "arrow function"));
                }
                return Ok(inner);
            }
            Tok::Punct("{") => {
                self.bump();
                let mut fields = Vec::new();
                if !self.eat_punct("}") {
                    loop {
                        let key = self.member_name()?;
                        self.expect_punct(":")?;
                        let value = self.expr()?;
                        fields.push((key, value));
                        if self.eat_punct("}") {
                            break;
                        }
                        self.expect_punct(",")?;
                        if self.eat_punct("}") {
                            break;
                        }
                    }
                }
                ExprKind::Object(fields)
            }
            Tok::Punct("[") => return Err(self.unsupported(span, "array literal")),
            _ => {
                return Err(self.syntax(
                    span,
                    format!("expected expression, found {}", self.describe()),
                ))
            }
        };
        Ok(Expr { kind, span })
    }
}

fn is_reserved(name: &str) -> bool {
    matches!(
        name,
        "let"
            | "const"
            | "return"
            | "if"
            | "else"
            | "while"
            | "class"
            | "function"
            | "this"
            | "true"
            | "false"
            | "extends"
    )
}
