use super::{codes, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number { value: f64, integer: bool },
    Str(String),
    // keywords
    Param,
    Method,
    Logic,
    Let,
    For,
    In,
    If,
    Else,
    Emit,
    Return,
    True,
    False,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    DotDot,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::Number { value, .. } => format!("number `{value}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::Param => "param",
            Tok::Method => "method",
            Tok::Logic => "logic",
            Tok::Let => "let",
            Tok::For => "for",
            Tok::In => "in",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::Emit => "emit",
            Tok::Return => "return",
            Tok::True => "true",
            Tok::False => "false",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Arrow => "->",
            Tok::DotDot => "..",
            Tok::Ident(_) | Tok::Number { .. } | Tok::Str(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub const KEYWORDS: &[&str] = &[
    "param", "method", "logic", "let", "for", "in", "if", "else", "emit", "return", "true",
    "false",
];

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "param" => Tok::Param,
        "method" => Tok::Method,
        "logic" => Tok::Logic,
        "let" => Tok::Let,
        "for" => Tok::For,
        "in" => Tok::In,
        "if" => Tok::If,
        "else" => Tok::Else,
        "emit" => Tok::Emit,
        "return" => Tok::Return,
        "true" => Tok::True,
        "false" => Tok::False,
        _ => return None,
    })
}

/// Splits `src` into tokens. Comments run from `#` or `//` to end of line.
pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;
    let col_of = |pos: usize, line_start: usize| (src[line_start..pos].chars().count() + 1) as u32;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' || (c == b'/' && bytes.get(i + 1) == Some(&b'/')) {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let col = col_of(start, line_start);
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()))
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut integer = true;
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                integer = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| {
                Diagnostic::error(
                    codes::SYNTAX,
                    format!("invalid number `{text}`"),
                    Span::new(start, i - start, line, col),
                )
            })?;
            if !value.is_finite() {
                return Err(Diagnostic::error(
                    codes::SYNTAX,
                    format!("number `{text}` is out of range"),
                    Span::new(start, i - start, line, col),
                ));
            }
            Tok::Number { value, integer }
        } else if c == b'"' {
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&b) = bytes.get(i) else {
                    return Err(Diagnostic::error(
                        codes::SYNTAX,
                        "unterminated string literal",
                        Span::new(start, i - start, line, col),
                    ));
                };
                match b {
                    b'"' => {
                        i += 1;
                        break;
                    }
                    b'\n' => {
                        return Err(Diagnostic::error(
                            codes::SYNTAX,
                            "unterminated string literal",
                            Span::new(start, i - start, line, col),
                        ))
                    }
                    b'\\' => {
                        let esc = bytes.get(i + 1).copied();
                        s.push(match esc {
                            Some(b'"') => '"',
                            Some(b'\\') => '\\',
                            Some(b'n') => '\n',
                            Some(b't') => '\t',
                            _ => {
                                return Err(Diagnostic::error(
                                    codes::SYNTAX,
                                    "invalid escape in string literal",
                                    Span::new(i, 2, line, col_of(i, line_start)),
                                ))
                            }
                        });
                        i += 2;
                    }
                    _ => {
                        let ch = src[i..].chars().next().expect("in bounds");
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            Tok::Str(s)
        } else {
            let two = bytes.get(i + 1).copied();
            let (tok, width) = match (c, two) {
                (b'=', Some(b'=')) => (Tok::EqEq, 2),
                (b'!', Some(b'=')) => (Tok::NotEq, 2),
                (b'<', Some(b'=')) => (Tok::Le, 2),
                (b'>', Some(b'=')) => (Tok::Ge, 2),
                (b'&', Some(b'&')) => (Tok::AndAnd, 2),
                (b'|', Some(b'|')) => (Tok::OrOr, 2),
                (b'-', Some(b'>')) => (Tok::Arrow, 2),
                (b'.', Some(b'.')) => (Tok::DotDot, 2),
                (b'(', _) => (Tok::LParen, 1),
                (b')', _) => (Tok::RParen, 1),
                (b'{', _) => (Tok::LBrace, 1),
                (b'}', _) => (Tok::RBrace, 1),
                (b'[', _) => (Tok::LBracket, 1),
                (b']', _) => (Tok::RBracket, 1),
                (b',', _) => (Tok::Comma, 1),
                (b':', _) => (Tok::Colon, 1),
                (b';', _) => (Tok::Semi, 1),
                (b'=', _) => (Tok::Assign, 1),
                (b'<', _) => (Tok::Lt, 1),
                (b'>', _) => (Tok::Gt, 1),
                (b'+', _) => (Tok::Plus, 1),
                (b'-', _) => (Tok::Minus, 1),
                (b'*', _) => (Tok::Star, 1),
                (b'/', _) => (Tok::Slash, 1),
                (b'%', _) => (Tok::Percent, 1),
                (b'!', _) => (Tok::Bang, 1),
                _ => {
                    let ch = src[i..].chars().next().expect("in bounds");
                    return Err(Diagnostic::error(
                        codes::SYNTAX,
                        format!("unexpected character `{ch}`"),
                        Span::new(i, ch.len_utf8(), line, col),
                    ));
                }
            };
            i += width;
            tok
        };
        out.push(Token {
            tok,
            span: Span::new(start, i - start, line, col),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(src.len(), 0, line, col_of(src.len(), line_start)),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn range_dots_do_not_eat_numbers() {
        assert_eq!(
            toks("0..10"),
            vec![
                Tok::Number { value: 0.0, integer: true },
                Tok::DotDot,
                Tok::Number { value: 10.0, integer: true },
                Tok::Eof
            ]
        );
        assert_eq!(
            toks("1.5"),
            vec![Tok::Number { value: 1.5, integer: false }, Tok::Eof]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = lex("# note\n  let x // trailing\n").unwrap();
        assert_eq!(t[0].tok, Tok::Let);
        assert_eq!((t[0].span.line, t[0].span.col), (2, 3));
        assert_eq!(t[1].tok, Tok::Ident("x".into()));
    }

    #[test]
    fn string_escapes() {
        assert_eq!(toks(r#""a\"b""#)[0], Tok::Str("a\"b".into()));
        assert!(lex("\"open").is_err());
    }

    #[test]
    fn stray_character_is_reported() {
        let e = lex("let a = 1 @ 2;").unwrap_err();
        assert_eq!(e.code, codes::SYNTAX);
        assert_eq!(e.span.col, 11);
    }
}
