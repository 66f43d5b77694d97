use serde::Serialize;

use super::Span;
use crate::params::ParamKind;

/// A parsed program: parameter declarations, method definitions and the logic block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Program {
    pub params: Vec<ParamDecl>,
    pub methods: Vec<MethodDef>,
    pub logic: Block,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDecl {
    pub name: Ident,
    pub kind: ParamKind,
    pub default: Option<Literal>,
    pub range: Option<(f64, f64)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Literal {
    Number { value: f64, integer: bool },
    Bool(bool),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Type {
    Number,
    Integer,
    Boolean,
    Str,
    Point,
    Shape,
    List(Box<Type>),
}

impl Type {
    /// Whether a value of type `self` may be used where `expected` is required.
    pub fn fits(&self, expected: &Type) -> bool {
        match (self, expected) {
            (Type::Integer, Type::Number) => true,
            (Type::List(a), Type::List(b)) => a.fits(b),
            (a, b) => a == b,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Number | Type::Integer)
    }
}

impl std::fmt::Display for Type {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Type::Number => f.write_str("number"),
            Type::Integer => f.write_str("integer"),
            Type::Boolean => f.write_str("boolean"),
            Type::Str => f.write_str("string"),
            Type::Point => f.write_str("point"),
            Type::Shape => f.write_str("shape"),
            Type::List(t) => write!(f, "[{t}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodDef {
    pub name: Ident,
    pub params: Vec<(Ident, Type)>,
    pub ret: Type,
    pub body: Block,
    pub span: Span,
}

impl MethodDef {
    pub fn signature(&self) -> Signature {
        Signature {
            params: self.params.iter().map(|(_, t)| t.clone()).collect(),
            ret: self.ret.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Signature {
    pub params: Vec<Type>,
    pub ret: Type,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StmtKind {
    Let { name: Ident, value: Expr },
    Assign { name: Ident, value: Expr },
    For { var: Ident, start: Expr, end: Expr, body: Block },
    If { cond: Expr, then: Block, otherwise: Option<Else> },
    Emit(Expr),
    Return(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Else {
    Block(Block),
    If(Box<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    Number { value: f64, integer: bool },
    Bool(bool),
    Str(String),
    Ident(String),
    List(Vec<Expr>),
    Unary { op: UnaryOp, expr: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { callee: Ident, args: Vec<Expr> },
    Index { target: Box<Expr>, index: Box<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinaryOp {
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
        }
    }
}

/// Zeroes every span so two trees can be compared structurally.
pub trait StripSpans {
    fn strip_spans(&mut self);
}

impl StripSpans for Program {
    fn strip_spans(&mut self) {
        for p in &mut self.params {
            p.span = Span::default();
            p.name.span = Span::default();
        }
        for m in &mut self.methods {
            m.strip_spans();
        }
        self.logic.strip_spans();
    }
}

impl StripSpans for MethodDef {
    fn strip_spans(&mut self) {
        self.span = Span::default();
        self.name.span = Span::default();
        for (i, _) in &mut self.params {
            i.span = Span::default();
        }
        self.body.strip_spans();
    }
}

impl StripSpans for Block {
    fn strip_spans(&mut self) {
        self.span = Span::default();
        for s in &mut self.stmts {
            s.strip_spans();
        }
    }
}

impl StripSpans for Stmt {
    fn strip_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            StmtKind::Let { name, value } | StmtKind::Assign { name, value } => {
                name.span = Span::default();
                value.strip_spans();
            }
            StmtKind::For {
                var,
                start,
                end,
                body,
            } => {
                var.span = Span::default();
                start.strip_spans();
                end.strip_spans();
                body.strip_spans();
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                cond.strip_spans();
                then.strip_spans();
                match otherwise {
                    Some(Else::Block(b)) => b.strip_spans(),
                    Some(Else::If(s)) => s.strip_spans(),
                    None => {}
                }
            }
            StmtKind::Emit(e) | StmtKind::Return(e) | StmtKind::Expr(e) => e.strip_spans(),
        }
    }
}

impl StripSpans for Expr {
    fn strip_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            ExprKind::List(items) => items.iter_mut().for_each(StripSpans::strip_spans),
            ExprKind::Unary { expr, .. } => expr.strip_spans(),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.strip_spans();
                rhs.strip_spans();
            }
            ExprKind::Call { callee, args } => {
                callee.span = Span::default();
                args.iter_mut().for_each(StripSpans::strip_spans);
            }
            ExprKind::Index { target, index } => {
                target.strip_spans();
                index.strip_spans();
            }
            _ => {}
        }
    }
}

/// Structural equality: same tree ignoring source positions.
pub fn same_structure<T: StripSpans + Clone + PartialEq>(a: &T, b: &T) -> bool {
    let (mut a, mut b) = (a.clone(), b.clone());
    a.strip_spans();
    b.strip_spans();
    a == b
}

/// Visits every expression in a block, depth first, in source order.
pub fn walk_block_exprs<'a>(block: &'a Block, f: &mut dyn FnMut(&'a Expr)) {
    for s in &block.stmts {
        walk_stmt_exprs(s, f);
    }
}

pub fn walk_stmt_exprs<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    match &stmt.kind {
        StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => walk_expr(value, f),
        StmtKind::For {
            start, end, body, ..
        } => {
            walk_expr(start, f);
            walk_expr(end, f);
            walk_block_exprs(body, f);
        }
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            walk_expr(cond, f);
            walk_block_exprs(then, f);
            match otherwise {
                Some(Else::Block(b)) => walk_block_exprs(b, f),
                Some(Else::If(s)) => walk_stmt_exprs(s, f),
                None => {}
            }
        }
        StmtKind::Emit(e) | StmtKind::Return(e) | StmtKind::Expr(e) => walk_expr(e, f),
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match &expr.kind {
        ExprKind::List(items) => items.iter().for_each(|e| walk_expr(e, f)),
        ExprKind::Unary { expr, .. } => walk_expr(expr, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Call { args, .. } => args.iter().for_each(|e| walk_expr(e, f)),
        ExprKind::Index { target, index } => {
            walk_expr(target, f);
            walk_expr(index, f);
        }
        _ => {}
    }
}

/// Names of non-builtin functions called anywhere in `block`, in first-call order.
pub fn called_methods(block: &Block) -> Vec<&Ident> {
    let mut out: Vec<&Ident> = Vec::new();
    walk_block_exprs(block, &mut |e| {
        if let ExprKind::Call { callee, .. } = &e.kind {
            if !super::builtins::is_builtin(&callee.name)
                && !out.iter().any(|i| i.name == callee.name)
            {
                out.push(callee);
            }
        }
    });
    out
}
