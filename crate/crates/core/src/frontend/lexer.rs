use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first so that `<=` wins over `<`.
const PUNCTS: &[&str] = &[
    "===", "!==", "...", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
    "/=", "?.", "(", ")", "{", "}", "[", "]", ";", ",", ".", ":", "=", "+", "-", "*", "/", "<",
    ">", "!", "?", "&", "|", "%", "^", "~", "@", "#",
];

pub fn tokenize(text: &str, file: usize, path: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    let err = |line: u32, col: u32, message: String| FrontendError::Syntax {
        path: path.to_string(),
        line,
        col,
        message,
    };

    while i < chars.len() {
        let c = chars[i];
        let span = Span { file, line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            col += 2;
            loop {
                if i >= chars.len() {
                    return Err(err(
                        span.line,
                        span.col,
                        "unterminated block comment".into(),
                    ));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    i += 2;
                    col += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                span,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                // `1.foo` is not a number followed by a member access in the subset
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            if lit.parse::<f64>().is_err() && !lit.starts_with("0x") {
                return Err(err(
                    span.line,
                    span.col,
                    format!("malformed number `{lit}`"),
                ));
            }
            out.push(Token {
                tok: Tok::Number(lit),
                span,
            });
            continue;
        }
        if c == '"' || c == '\'' || c == '`' {
            let quote = c;
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(
                            span.line,
                            span.col,
                            "unterminated string literal".into(),
                        ))
                    }
                    Some(&ch) if ch == quote => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        if let Some(&next) = chars.get(i + 1) {
                            s.push(match next {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            if quote == '`' {
                return Err(FrontendError::Unsupported {
                    path: path.to_string(),
                    span,
                    construct: "template literal".into(),
                });
            }
            out.push(Token {
                tok: Tok::Str(s),
                span,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(*p)) {
            Some(p) => {
                i += p.len();
                col += p.len() as u32;
                out.push(Token {
                    tok: Tok::Punct(p),
                    span,
                });
            }
            None => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { file, line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s, 0, "t.ts")
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect()
    }

    #[test]
    fn longest_punct_wins() {
        assert_eq!(
            toks("a <= b"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("<="),
                Tok::Ident("b".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_strings() {
        let t = toks("// hi\nlet s = \"a\\\"b\"; /* x\n y */ 1.5");
        assert_eq!(t[3], Tok::Str("a\"b".into()));
        assert_eq!(t[5], Tok::Number("1.5".into()));
    }

    #[test]
    fn spans_track_lines() {
        let t = tokenize("a\n  b", 0, "t.ts").unwrap();
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
    }

    #[test]
    fn unterminated_string_is_syntax_error() {
        assert!(matches!(
            tokenize("let s = \"abc", 0, "t.ts"),
            Err(FrontendError::Syntax {
                line: 1,
                col: 9,
                ..
            })
        ));
    }
}
