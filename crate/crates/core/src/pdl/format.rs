//! Canonical pretty-printer. Output re-parses to a structurally identical tree and is a
//! fixed point of `parse` followed by `format`.

use std::fmt::Write;

use super::ast::*;
use crate::params::ParamKind;

const INDENT: &str = "  ";

pub fn format(program: &Program) -> String {
    let mut out = String::new();
    for p in &program.params {
        out.push_str(&format_param(p));
        out.push('\n');
    }
    if !program.params.is_empty() {
        out.push('\n');
    }
    for m in &program.methods {
        out.push_str(&format_method(m));
        out.push_str("\n\n");
    }
    out.push_str("logic ");
    block(&mut out, &program.logic, 0);
    out.push('\n');
    out
}

pub fn format_param(p: &ParamDecl) -> String {
    let mut s = format!("param {}: {}", p.name.name, format_kind(&p.kind));
    if let Some(d) = &p.default {
        s.push_str(" = ");
        s.push_str(&format_literal(d));
    }
    if let Some((lo, hi)) = p.range {
        let _ = write!(s, " in [{lo}, {hi}]");
    }
    s
}

pub fn format_kind(kind: &ParamKind) -> String {
    match kind {
        ParamKind::Choice(options) => {
            let opts: Vec<String> = options.iter().map(|o| quote(o)).collect();
            format!("choice({})", opts.join(", "))
        }
        other => other.name().to_string(),
    }
}

fn format_literal(l: &Literal) -> String {
    match l {
        Literal::Number { value, integer } if *value < 0.0 => {
            format!("-{}", number(-value, *integer))
        }
        Literal::Number { value, integer } => number(*value, *integer),
        Literal::Bool(b) => b.to_string(),
        Literal::Str(s) => quote(s),
    }
}

pub fn format_method(m: &MethodDef) -> String {
    let params: Vec<String> = m
        .params
        .iter()
        .map(|(n, t)| format!("{}: {t}", n.name))
        .collect();
    let mut out = format!("method {}({}) -> {} ", m.name.name, params.join(", "), m.ret);
    block(&mut out, &m.body, 0);
    out
}

fn number(value: f64, integer: bool) -> String {
    let s = format!("{value}");
    if integer || s.contains('.') {
        s
    } else {
        s + ".0"
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn block(out: &mut String, b: &Block, depth: usize) {
    if b.stmts.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for s in &b.stmts {
        indent(out, depth + 1);
        stmt(out, s, depth + 1);
        out.push('\n');
    }
    indent(out, depth);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Let { name, value } => {
            let _ = write!(out, "let {} = {};", name.name, expr(value));
        }
        StmtKind::Assign { name, value } => {
            let _ = write!(out, "{} = {};", name.name, expr(value));
        }
        StmtKind::For {
            var,
            start,
            end,
            body,
        } => {
            let _ = write!(out, "for {} in {}..{} ", var.name, expr(start), expr(end));
            block(out, body, depth);
        }
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            let _ = write!(out, "if {} ", expr(cond));
            block(out, then, depth);
            match otherwise {
                Some(Else::Block(b)) => {
                    out.push_str(" else ");
                    block(out, b, depth);
                }
                Some(Else::If(s)) => {
                    out.push_str(" else ");
                    stmt(out, s, depth);
                }
                None => {}
            }
        }
        StmtKind::Emit(e) => {
            let _ = write!(out, "emit({});", expr(e));
        }
        StmtKind::Return(e) => {
            let _ = write!(out, "return {};", expr(e));
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", expr(e));
        }
    }
}

/// Formats one expression with the minimum parentheses the precedence rules need.
pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Number { value, integer } => number(*value, *integer),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Str(s) => quote(s),
        ExprKind::Ident(n) => n.clone(),
        ExprKind::List(items) => {
            let items: Vec<String> = items.iter().map(expr).collect();
            format!("[{}]", items.join(", "))
        }
        ExprKind::Unary { op, expr: inner } => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
            };
            match inner.kind {
                ExprKind::Binary { .. } => format!("{sym}({})", expr(inner)),
                _ => format!("{sym}{}", expr(inner)),
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let l = match &lhs.kind {
                ExprKind::Binary { op: lop, .. } if lop.precedence() < p => {
                    format!("({})", expr(lhs))
                }
                _ => expr(lhs),
            };
            let r = match &rhs.kind {
                ExprKind::Binary { op: rop, .. } if rop.precedence() <= p => {
                    format!("({})", expr(rhs))
                }
                _ => expr(rhs),
            };
            format!("{l} {} {r}", op.symbol())
        }
        ExprKind::Call { callee, args } => {
            let args: Vec<String> = args.iter().map(expr).collect();
            format!("{}({})", callee.name, args.join(", "))
        }
        ExprKind::Index { target, index } => match target.kind {
            ExprKind::Binary { .. } | ExprKind::Unary { .. } => {
                format!("({})[{}]", expr(target), expr(index))
            }
            _ => format!("{}[{}]", expr(target), expr(index)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn roundtrip(src: &str) -> String {
        let p = parse(src).unwrap();
        let out = format(&p);
        let again = parse(&out).unwrap_or_else(|d| panic!("{out}\n{d:?}"));
        assert!(same_structure(&p, &again), "{out}");
        assert_eq!(format(&again), out);
        out
    }

    #[test]
    fn nested_blocks_indent_two_spaces() {
        let out = roundtrip("logic { for i in 0..3 { if i > 1 { emit(rect(point(i, 0, 0), 1, 1)); } } }");
        let expected = "logic {\n  for i in 0..3 {\n    if i > 1 {\n      emit(rect(point(i, 0, 0), 1, 1));\n    }\n  }\n}\n";
        assert_eq!(out, expected);
    }

    #[test]
    fn parentheses_are_minimal_but_sufficient() {
        let out = roundtrip("logic { let a = (1 - (2 - 3)) * -(4 + 5) / ((6)); let b = !(true && false) || true; }");
        assert!(out.contains("let a = (1 - (2 - 3)) * -(4 + 5) / 6;"), "{out}");
        assert!(out.contains("let b = !(true && false) || true;"), "{out}");
    }

    #[test]
    fn numbers_keep_their_integer_flag() {
        let out = roundtrip("param G: number = -2.0 in [-1.5, 10]\nlogic { let a = 2.0 + 3 + 0.25; }");
        assert!(out.contains("param G: number = -2.0 in [-1.5, 10]"), "{out}");
        assert!(out.contains("2.0 + 3 + 0.25"), "{out}");
    }

    #[test]
    fn strings_and_choices_escape() {
        roundtrip("param S: choice(\"a\\\"b\", \"c\") = \"c\"\nlogic { let s = \"x\\ny\"; }");
    }

    #[test]
    fn else_if_chains() {
        roundtrip("method f(a: number) -> number { if a < 0 { return 0; } else if a < 1 { return 1; } else { return 2; } }\nlogic {}");
    }
}
