//! Recursive-descent parser for PDL source.
//!
//! ```text
//! program   := paramDecl* methodDef* "logic" block
//! paramDecl := "param" IDENT ":" kind ("=" literal)? ("in" "[" num "," num "]")?
//! kind      := number | integer | boolean | point_ref | curve_ref | shape_ref
//!            | choice "(" STRING ("," STRING)* ")"
//! methodDef := "method" IDENT "(" (IDENT ":" type ("," IDENT ":" type)*)? ")" "->" type block
//! type      := number | integer | boolean | string | point | shape | "[" type "]"
//! block     := "{" stmt* "}"
//! stmt      := "let" IDENT "=" expr ";" | IDENT "=" expr ";"
//!            | "for" IDENT "in" expr ".." expr block
//!            | "if" expr block ("else" (block | ifStmt))?
//!            | "emit" "(" expr ")" ";" | "return" expr ";" | expr ";"
//! expr      := binary expression over || && == != < <= > >= + - * / %,
//!              unary - and !, calls f(a, b), indexing xs[i], list literals [a, b]
//! ```

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{codes, Diagnostic, Span};
use crate::params::ParamKind;

type PResult<T> = Result<T, Diagnostic>;

/// Parses a whole program. Syntax errors come back as diagnostics, never panics.
pub fn parse(src: &str) -> Result<Program, Vec<Diagnostic>> {
    let tokens = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { tokens, pos: 0 };
    p.program().map_err(|d| vec![d])
}

/// Parses a single `method` definition (the unit exchanged in agent payloads).
pub fn parse_method(src: &str) -> Result<MethodDef, Vec<Diagnostic>> {
    let tokens = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { tokens, pos: 0 };
    let m = p.method().map_err(|d| vec![d])?;
    p.expect(&Tok::Eof).map_err(|d| vec![d])?;
    Ok(m)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn syntax(msg: impl Into<String>, span: Span) -> Diagnostic {
    Diagnostic::error(codes::SYNTAX, msg, span)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> PResult<Span> {
        if self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{}`", tok.text())))
        }
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        syntax(
            format!("expected {wanted}, found {}", self.peek().describe()),
            self.span(),
        )
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut params = Vec::new();
        while *self.peek() == Tok::Param {
            params.push(self.param_decl()?);
        }
        let mut methods = Vec::new();
        while *self.peek() == Tok::Method {
            methods.push(self.method()?);
        }
        if *self.peek() == Tok::Param {
            return Err(syntax(
                "parameter declarations must precede method definitions",
                self.span(),
            ));
        }
        if *self.peek() != Tok::Logic {
            return Err(self.unexpected("`param`, `method` or `logic`"));
        }
        self.bump();
        let logic = self.block()?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input after the logic block"));
        }
        Ok(Program {
            params,
            methods,
            logic,
        })
    }

    fn param_decl(&mut self) -> PResult<ParamDecl> {
        let start = self.expect(&Tok::Param)?;
        let name = self.ident()?;
        self.expect(&Tok::Colon)?;
        let kind = self.param_kind()?;
        let default = if self.eat(&Tok::Assign) {
            Some(self.literal()?)
        } else {
            None
        };
        let range = if self.eat(&Tok::In) {
            self.expect(&Tok::LBracket)?;
            let lo = self.signed_number()?;
            self.expect(&Tok::Comma)?;
            let hi = self.signed_number()?;
            self.expect(&Tok::RBracket)?;
            Some((lo, hi))
        } else {
            None
        };
        Ok(ParamDecl {
            name,
            kind,
            default,
            range,
            span: start.to(self.prev_span()),
        })
    }

    fn param_kind(&mut self) -> PResult<ParamKind> {
        let id = self.ident()?;
        Ok(match id.name.as_str() {
            "number" => ParamKind::Number,
            "integer" => ParamKind::Integer,
            "boolean" => ParamKind::Boolean,
            "point_ref" => ParamKind::PointRef,
            "curve_ref" => ParamKind::CurveRef,
            "shape_ref" => ParamKind::ShapeRef,
            "choice" => {
                self.expect(&Tok::LParen)?;
                let mut options = Vec::new();
                loop {
                    match self.peek().clone() {
                        Tok::Str(s) => {
                            self.bump();
                            options.push(s);
                        }
                        _ => return Err(self.unexpected("string option")),
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(&Tok::RParen)?;
                ParamKind::Choice(options)
            }
            other => {
                return Err(syntax(
                    format!("unknown parameter kind `{other}`"),
                    id.span,
                ))
            }
        })
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Number { value, .. } => {
                self.bump();
                Ok(if neg { -value } else { value })
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn literal(&mut self) -> PResult<Literal> {
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Literal::Bool(true))
            }
            Tok::False => {
                self.bump();
                Ok(Literal::Bool(false))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Literal::Str(s))
            }
            Tok::Minus | Tok::Number { .. } => {
                let neg = self.eat(&Tok::Minus);
                let Tok::Number { value, integer } = *self.peek() else {
                    return Err(self.unexpected("number"));
                };
                self.bump();
                Ok(Literal::Number {
                    value: if neg { -value } else { value },
                    integer,
                })
            }
            _ => Err(self.unexpected("literal")),
        }
    }

    fn method(&mut self) -> PResult<MethodDef> {
        let start = self.expect(&Tok::Method)?;
        let name = self.ident()?;
        self.expect(&Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let p = self.ident()?;
                self.expect(&Tok::Colon)?;
                let t = self.ty()?;
                params.push((p, t));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        self.expect(&Tok::Arrow)?;
        let ret = self.ty()?;
        let body = self.block()?;
        Ok(MethodDef {
            name,
            params,
            ret,
            span: start.to(body.span),
            body,
        })
    }

    fn ty(&mut self) -> PResult<Type> {
        if self.eat(&Tok::LBracket) {
            let inner = self.ty()?;
            self.expect(&Tok::RBracket)?;
            return Ok(Type::List(Box::new(inner)));
        }
        let id = self.ident()?;
        Ok(match id.name.as_str() {
            "number" => Type::Number,
            "integer" => Type::Integer,
            "boolean" => Type::Boolean,
            "string" => Type::Str,
            "point" => Type::Point,
            "shape" => Type::Shape,
            other => return Err(syntax(format!("unknown type `{other}`"), id.span)),
        })
    }

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect(&Tok::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => break,
                Tok::Eof => {
                    return Err(syntax("unclosed block: missing `}`", open));
                }
                _ => stmts.push(self.stmt()?),
            }
        }
        let close = self.bump().span;
        Ok(Block {
            stmts,
            span: open.to(close),
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Let => {
                self.bump();
                let name = self.ident()?;
                self.expect(&Tok::Assign)?;
                let value = self.expr()?;
                self.expect(&Tok::Semi)?;
                StmtKind::Let { name, value }
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::Assign => {
                let name = self.ident()?;
                self.bump();
                let value = self.expr()?;
                self.expect(&Tok::Semi)?;
                StmtKind::Assign { name, value }
            }
            Tok::For => {
                self.bump();
                let var = self.ident()?;
                self.expect(&Tok::In)?;
                let start = self.expr()?;
                self.expect(&Tok::DotDot)?;
                let end = self.expr()?;
                let body = self.block()?;
                StmtKind::For {
                    var,
                    start,
                    end,
                    body,
                }
            }
            Tok::If => return self.if_stmt(),
            Tok::Emit => {
                let kw = self.bump().span;
                let open = self.expect(&Tok::LParen)?;
                let arg = self.expr().map_err(|e| self.unclosed(e, "emit", kw.to(open)))?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unclosed(self.unexpected("`)`"), "emit", kw.to(open)));
                }
                self.bump();
                self.expect(&Tok::Semi)?;
                StmtKind::Emit(arg)
            }
            Tok::Return => {
                self.bump();
                let value = self.expr()?;
                self.expect(&Tok::Semi)?;
                StmtKind::Return(value)
            }
            _ => {
                let e = self.expr()?;
                self.expect(&Tok::Semi)?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt {
            kind,
            span: start.to(self.prev_span()),
        })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect(&Tok::If)?;
        let cond = self.expr()?;
        let then = self.block()?;
        let otherwise = if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                Some(Else::If(Box::new(self.if_stmt()?)))
            } else {
                Some(Else::Block(self.block()?))
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then,
                otherwise,
            },
            span: start.to(self.prev_span()),
        })
    }

    /// Rewrites an error hit inside an argument list into an "unclosed call" diagnostic
    /// when the parser ran into a terminator instead of `)`.
    fn unclosed(&self, err: Diagnostic, name: &str, call: Span) -> Diagnostic {
        match self.peek() {
            Tok::RBrace | Tok::Semi | Tok::Eof | Tok::RBracket => syntax(
                format!("unclosed call to `{name}`: expected `)` before {}", self.peek().describe()),
                call,
            ),
            _ => err,
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Minus => UnaryOp::Neg,
            Tok::Bang => UnaryOp::Not,
            _ => return self.postfix(),
        };
        let start = self.bump().span;
        let expr = self.unary()?;
        Ok(Expr {
            span: start.to(expr.span),
            kind: ExprKind::Unary {
                op,
                expr: Box::new(expr),
            },
        })
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while *self.peek() == Tok::LBracket {
            self.bump();
            let index = self.expr()?;
            let close = self.expect(&Tok::RBracket)?;
            e = Expr {
                span: e.span.to(close),
                kind: ExprKind::Index {
                    target: Box::new(e),
                    index: Box::new(index),
                },
            };
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Number { value, integer } => {
                self.bump();
                ExprKind::Number { value, integer }
            }
            Tok::True => {
                self.bump();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.bump();
                ExprKind::Bool(false)
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Tok::Ident(name) => {
                let ident = self.ident()?;
                if *self.peek() == Tok::LParen {
                    let open = self.bump().span;
                    let call = ident.span.to(open);
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            let arg = self.expr().map_err(|e| self.unclosed(e, &name, call))?;
                            args.push(arg);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    if *self.peek() != Tok::RParen {
                        return Err(self.unclosed(self.unexpected("`,` or `)`"), &name, call));
                    }
                    let close = self.bump().span;
                    return Ok(Expr {
                        kind: ExprKind::Call {
                            callee: ident,
                            args,
                        },
                        span: start.to(close),
                    });
                }
                ExprKind::Ident(name)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(&Tok::RParen)?;
                // Parentheses are not kept in the tree; the span covers them.
                return Ok(Expr {
                    kind: inner.kind,
                    span: start.to(self.prev_span()),
                });
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(&Tok::RBracket)?;
                ExprKind::List(items)
            }
            Tok::Emit => {
                return Err(syntax("`emit` is a statement, not an expression", start));
            }
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr {
            kind,
            span: start.to(self.prev_span()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("logic { }").unwrap();
        assert!(p.params.is_empty() && p.methods.is_empty() && p.logic.stmts.is_empty());
    }

    #[test]
    fn unclosed_emit_points_at_the_call() {
        let d = parse("logic { emit( }").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, codes::SYNTAX);
        assert!(d[0].message.contains("unclosed call"), "{}", d[0].message);
        assert_eq!((d[0].span.line, d[0].span.col, d[0].span.len), (1, 9, 5));
    }

    #[test]
    fn unclosed_nested_call() {
        let d = parse("logic {\n  emit(rect(point(0, 0, 0), 1);\n}").unwrap_err();
        assert!(d[0].message.contains("unclosed call to `emit`"), "{}", d[0].message);
        assert_eq!(d[0].span.line, 2);
    }

    #[test]
    fn precedence_and_associativity() {
        let p = parse("logic { let a = 1 - 2 - 3 * 4; }").unwrap();
        let StmtKind::Let { value, .. } = &p.logic.stmts[0].kind else {
            panic!()
        };
        let ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } = &value.kind else {
            panic!("{value:?}")
        };
        assert!(matches!(lhs.kind, ExprKind::Binary { op: BinaryOp::Sub, .. }));
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinaryOp::Mul, .. }));
    }

    #[test]
    fn params_methods_and_else_if() {
        let src = r#"
            param Count: integer = 3 in [1, 20]
            param Style: choice("flat", "tall")
            param Base: point_ref
            method ring(c: point, r: number) -> shape {
              if r > 1 { return ellipse(c, r, r); } else if r > 0 { return ellipse(c, 1, 1); } else { return ellipse(c, 2, 2); }
            }
            logic { for i in 0..Count { emit(ring(Base, i + 1)); } }
        "#;
        let p = parse(src).unwrap();
        assert_eq!(p.params.len(), 3);
        assert_eq!(p.params[0].range, Some((1.0, 20.0)));
        assert_eq!(p.methods[0].params.len(), 2);
    }

    #[test]
    fn params_after_methods_rejected() {
        let d = parse("method m() -> number { return 1; } param X: number logic {}").unwrap_err();
        assert!(d[0].message.contains("precede"));
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(parse("logic {} logic {}").is_err());
    }

    #[test]
    fn parse_single_method() {
        let m = parse_method("method sq(s: number) -> shape { return rect(point(0,0,0), s, s); }").unwrap();
        assert_eq!(m.name.name, "sq");
        assert!(parse_method("method a() -> shape { } extra").is_err());
    }
}
