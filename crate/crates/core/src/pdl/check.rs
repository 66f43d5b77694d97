//! Static checker: name resolution, arity and type rules, method linking, return paths,
//! recursion and loop-bound analysis.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::builtins::{self, Params};
use super::registry::MethodRegistry;
use super::{codes, Diagnostic, Span};
use crate::params::{ParamKind, ParamSet};

/// Checks `program` against the registered methods and the session parameters.
///
/// The result is empty iff the program passes every static rule. Warnings may appear
/// alongside errors; use [`super::has_errors`] to decide.
pub fn check(program: &Program, registry: &MethodRegistry, params: &ParamSet) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let param_env = check_param_decls(program, params, &mut diags);

    let mut sigs = registry.signatures();
    let mut local: Vec<&MethodDef> = Vec::new();
    for m in &program.methods {
        if builtins::is_builtin(&m.name.name) {
            diags.push(shadow(m));
            continue;
        }
        if let Some(prev) = local.iter().find(|p| p.name.name == m.name.name) {
            if !same_structure(*prev, m) {
                diags.push(duplicate(m));
            }
            continue;
        }
        if let Some(entry) = registry.get(&m.name.name) {
            if !same_structure(&entry.def, m) {
                diags.push(duplicate(m));
                continue;
            }
        }
        sigs.insert(m.name.name.clone(), m.signature());
        local.push(m);
    }
    diags.extend(recursion(&local));
    for m in &local {
        diags.extend(check_method(m, &sigs));
    }

    let mut c = Checker::new(&sigs, param_env, None, assigned_names(&program.logic));
    c.block(&program.logic);
    diags.extend(c.diags);
    diags
}

fn shadow(m: &MethodDef) -> Diagnostic {
    Diagnostic::error(
        codes::BUILTIN_SHADOW,
        format!("method `{}` shadows a built-in", m.name.name),
        m.name.span,
    )
}

fn duplicate(m: &MethodDef) -> Diagnostic {
    Diagnostic::error(
        codes::DUPLICATE_METHOD,
        format!("method `{}` is already defined with a different body", m.name.name),
        m.name.span,
    )
}

/// Type of the value a parameter of `kind` has inside logic.
pub fn param_type(kind: &ParamKind) -> Type {
    match kind {
        ParamKind::Number => Type::Number,
        ParamKind::Integer => Type::Integer,
        ParamKind::Boolean => Type::Boolean,
        ParamKind::Choice(_) => Type::Str,
        ParamKind::PointRef => Type::Point,
        ParamKind::CurveRef | ParamKind::ShapeRef => Type::Shape,
    }
}

#[derive(Debug, Clone)]
struct ParamInfo {
    ty: Type,
    interval: Option<(f64, f64)>,
}

fn literal_fits(kind: &ParamKind, lit: &Literal) -> bool {
    match (kind, lit) {
        (ParamKind::Number, Literal::Number { .. }) => true,
        (ParamKind::Integer, Literal::Number { value, .. }) => value.fract() == 0.0,
        (ParamKind::Boolean, Literal::Bool(_)) => true,
        (ParamKind::Choice(opts), Literal::Str(s)) => opts.contains(s),
        _ => false,
    }
}

fn check_param_decls(
    program: &Program,
    session: &ParamSet,
    diags: &mut Vec<Diagnostic>,
) -> HashMap<String, ParamInfo> {
    // Only parameters the program declares are in scope; the session refines them.
    let mut env: HashMap<String, ParamInfo> = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for d in &program.params {
        let name = d.name.name.as_str();
        if !seen.insert(name) {
            diags.push(Diagnostic::error(
                codes::DUPLICATE_PARAM,
                format!("parameter `{name}` is declared twice"),
                d.name.span,
            ));
            continue;
        }
        if let ParamKind::Choice(opts) = &d.kind {
            let distinct: HashSet<&String> = opts.iter().collect();
            if opts.len() < 2 || distinct.len() != opts.len() {
                diags.push(Diagnostic::error(
                    codes::PARAM_KIND,
                    format!("choice parameter `{name}` needs at least 2 distinct options"),
                    d.span,
                ));
            }
        }
        if let Some((lo, hi)) = d.range {
            if !d.kind.is_numeric() || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                diags.push(Diagnostic::error(
                    codes::INVALID_RANGE,
                    format!("parameter `{name}` has invalid range [{lo}, {hi}]"),
                    d.span,
                ));
            }
        }
        if let Some(lit) = &d.default {
            if d.kind.is_reference() || !literal_fits(&d.kind, lit) {
                diags.push(Diagnostic::error(
                    codes::PARAM_KIND,
                    format!("default of `{name}` is not a valid {} value", d.kind.name()),
                    d.span,
                ));
            } else if let (Literal::Number { value, .. }, Some((lo, hi))) = (lit, d.range) {
                if *value < lo || *value > hi {
                    diags.push(Diagnostic::error(
                        codes::OUT_OF_RANGE,
                        format!("default {value} of `{name}` is outside [{lo}, {hi}]"),
                        d.span,
                    ));
                }
            }
        }
        match session.get(name) {
            Some(spec) if spec.kind.name() != d.kind.name() => {
                diags.push(Diagnostic::error(
                    codes::PARAM_KIND,
                    format!(
                        "parameter `{name}` is declared as {} but the session has it as {}",
                        d.kind.name(),
                        spec.kind.name()
                    ),
                    d.span,
                ));
            }
            None if d.default.is_none() => {
                diags.push(Diagnostic::error(
                    codes::PARAM_MISSING,
                    format!("parameter `{name}` has no default and is not in the session"),
                    d.span,
                ));
            }
            _ => {}
        }
        let session_range = session.get(name).and_then(|s| s.range).map(|[a, b]| (a, b));
        env.insert(
            name.to_string(),
            ParamInfo {
                ty: param_type(&d.kind),
                interval: d.range.or(session_range),
            },
        );
    }
    env
}

/// Reports every method that can reach itself through calls to other methods in `methods`.
pub(crate) fn recursion(methods: &[&MethodDef]) -> Vec<Diagnostic> {
    let names: HashSet<&str> = methods.iter().map(|m| m.name.name.as_str()).collect();
    let edges: HashMap<&str, Vec<&str>> = methods
        .iter()
        .map(|m| {
            let callees = called_methods(&m.body)
                .into_iter()
                .map(|i| i.name.as_str())
                .filter(|n| names.contains(n))
                .collect();
            (m.name.name.as_str(), callees)
        })
        .collect();
    let mut out = Vec::new();
    for m in methods {
        let start = m.name.name.as_str();
        let mut stack: Vec<&str> = edges[start].clone();
        let mut visited: HashSet<&str> = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == start {
                out.push(Diagnostic::error(
                    codes::RECURSION,
                    format!("method `{start}` calls itself (directly or through other methods)"),
                    m.name.span,
                ));
                break;
            }
            if visited.insert(n) {
                stack.extend(edges[n].iter().copied());
            }
        }
    }
    out
}

/// Checks one method body: names, types, emit ban and return paths.
pub(crate) fn check_method(m: &MethodDef, sigs: &HashMap<String, Signature>) -> Vec<Diagnostic> {
    let mut c = Checker::new(sigs, HashMap::new(), Some(m.ret.clone()), assigned_names(&m.body));
    let mut seen = HashSet::new();
    for (name, ty) in &m.params {
        if !seen.insert(name.name.as_str()) {
            c.error(
                codes::DUPLICATE_PARAM,
                format!("method parameter `{}` is declared twice", name.name),
                name.span,
            );
        }
        c.declare(
            &name.name,
            Var {
                ty: Some(ty.clone()),
                mutable: false,
                interval: None,
            },
        );
    }
    c.block(&m.body);
    if !block_returns(&m.body) {
        c.error(
            codes::MISSING_RETURN,
            format!("method `{}` does not return a value on every path", m.name.name),
            m.name.span,
        );
    }
    c.diags
}

fn block_returns(b: &Block) -> bool {
    b.stmts.iter().any(stmt_returns)
}

fn stmt_returns(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If {
            then,
            otherwise: Some(other),
            ..
        } => {
            block_returns(then)
                && match other {
                    Else::Block(b) => block_returns(b),
                    Else::If(s) => stmt_returns(s),
                }
        }
        _ => false,
    }
}

fn assigned_names(b: &Block) -> HashSet<String> {
    fn visit(b: &Block, out: &mut HashSet<String>) {
        for s in &b.stmts {
            visit_stmt(s, out);
        }
    }
    fn visit_stmt(s: &Stmt, out: &mut HashSet<String>) {
        match &s.kind {
            StmtKind::Assign { name, .. } => {
                out.insert(name.name.clone());
            }
            StmtKind::For { body, .. } => visit(body, out),
            StmtKind::If {
                then, otherwise, ..
            } => {
                visit(then, out);
                match otherwise {
                    Some(Else::Block(b)) => visit(b, out),
                    Some(Else::If(s)) => visit_stmt(s, out),
                    None => {}
                }
            }
            _ => {}
        }
    }
    let mut out = HashSet::new();
    visit(b, &mut out);
    out
}

#[derive(Debug, Clone)]
struct Var {
    ty: Option<Type>,
    mutable: bool,
    interval: Option<(f64, f64)>,
}

struct Checker<'a> {
    sigs: &'a HashMap<String, Signature>,
    params: HashMap<String, ParamInfo>,
    ret: Option<Type>,
    assigned: HashSet<String>,
    scopes: Vec<HashMap<String, Var>>,
    diags: Vec<Diagnostic>,
}

fn join(a: &Type, b: &Type) -> Option<Type> {
    if a.fits(b) {
        Some(b.clone())
    } else if b.fits(a) {
        Some(a.clone())
    } else {
        None
    }
}

impl<'a> Checker<'a> {
    fn new(
        sigs: &'a HashMap<String, Signature>,
        params: HashMap<String, ParamInfo>,
        ret: Option<Type>,
        assigned: HashSet<String>,
    ) -> Self {
        Checker {
            sigs,
            params,
            ret,
            assigned,
            scopes: vec![HashMap::new()],
            diags: Vec::new(),
        }
    }

    fn error(&mut self, code: &str, msg: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::error(code, msg, span));
    }

    fn type_error(&mut self, msg: impl Into<String>, span: Span) {
        self.error(codes::TYPE, msg, span);
    }

    fn declare(&mut self, name: &str, var: Var) {
        self.scopes
            .last_mut()
            .expect("scope stack is never empty")
            .insert(name.to_string(), var);
    }

    fn lookup(&self, name: &str) -> Option<&Var> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn lookup_mut(&mut self, name: &str) -> Option<&mut Var> {
        self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }

    fn scoped(&mut self, vars: Vec<(String, Var)>, b: &Block) {
        self.scopes.push(vars.into_iter().collect());
        self.block_stmts(b);
        self.scopes.pop();
    }

    fn block(&mut self, b: &Block) {
        self.scoped(Vec::new(), b);
    }

    fn block_stmts(&mut self, b: &Block) {
        for s in &b.stmts {
            self.stmt(s);
        }
    }

    fn expect_type(&mut self, e: &Expr, want: &Type, what: &str) {
        if let Some(t) = self.expr(e) {
            if !t.fits(want) {
                self.type_error(format!("{what} must be {want}, found {t}"), e.span);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Let { name, value } => {
                let ty = self.expr(value);
                let interval = if self.assigned.contains(&name.name) {
                    None
                } else {
                    self.interval(value)
                };
                self.declare(
                    &name.name,
                    Var {
                        ty,
                        mutable: true,
                        interval,
                    },
                );
            }
            StmtKind::Assign { name, value } => {
                let ty = self.expr(value);
                match self.lookup_mut(&name.name) {
                    None => {
                        let msg = if self.params.contains_key(&name.name) {
                            format!("parameter `{}` cannot be assigned", name.name)
                        } else {
                            format!("assignment to undeclared variable `{}`", name.name)
                        };
                        let code = if self.params.contains_key(&name.name) {
                            codes::IMMUTABLE
                        } else {
                            codes::UNKNOWN_IDENT
                        };
                        self.error(code, msg, name.span);
                    }
                    Some(var) if !var.mutable => {
                        self.error(
                            codes::IMMUTABLE,
                            format!("`{}` cannot be assigned", name.name),
                            name.span,
                        );
                    }
                    Some(var) => match (&var.ty, ty) {
                        (None, t) => var.ty = t,
                        (Some(want), Some(t)) if !t.fits(want) => {
                            let msg = format!("`{}` has type {want}, cannot assign {t}", name.name);
                            self.type_error(msg, value.span);
                        }
                        _ => {}
                    },
                }
            }
            StmtKind::For {
                var,
                start,
                end,
                body,
            } => {
                let ts = self.expr(start);
                let te = self.expr(end);
                for (t, e) in [(&ts, start), (&te, end)] {
                    if let Some(t) = t {
                        if !t.is_numeric() {
                            self.type_error(format!("loop bound must be numeric, found {t}"), e.span);
                        }
                    }
                }
                let var_ty = match (&ts, &te) {
                    (Some(Type::Integer), Some(Type::Integer)) => Type::Integer,
                    _ => Type::Number,
                };
                let (is, ie) = (self.interval(start), self.interval(end));
                let bounded = matches!((is, ie), (Some((a, _)), Some((_, b))) if a.is_finite() && b.is_finite());
                if !bounded {
                    self.error(
                        codes::UNBOUNDED_LOOP,
                        "loop bounds must be statically bounded (literals, ranged parameters or values derived from them)",
                        start.span.to(end.span),
                    );
                }
                let interval = match (is, ie) {
                    (Some((a, _)), Some((_, b))) => Some((a, b)),
                    _ => None,
                };
                let v = Var {
                    ty: Some(var_ty),
                    mutable: false,
                    interval,
                };
                self.scoped(vec![(var.name.clone(), v)], body);
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                self.expect_type(cond, &Type::Boolean, "condition");
                self.block(then);
                match otherwise {
                    Some(Else::Block(b)) => self.block(b),
                    Some(Else::If(s)) => self.stmt(s),
                    None => {}
                }
            }
            StmtKind::Emit(e) => {
                let t = self.expr(e);
                if self.ret.is_some() {
                    self.error(codes::EMIT_IN_METHOD, "methods cannot emit; return the shape instead", s.span);
                } else if let Some(t) = t {
                    let ok = matches!(t, Type::Shape | Type::Point)
                        || matches!(&t, Type::List(inner) if matches!(**inner, Type::Shape | Type::Point));
                    if !ok {
                        self.type_error(format!("cannot emit a value of type {t}"), e.span);
                    }
                }
            }
            StmtKind::Return(e) => {
                let t = self.expr(e);
                match (&self.ret, t) {
                    (None, _) => {
                        self.error(codes::RETURN_OUTSIDE_METHOD, "`return` is only allowed inside methods", s.span)
                    }
                    (Some(want), Some(t)) if !t.fits(want) => {
                        let msg = format!("method returns {want}, found {t}");
                        self.type_error(msg, e.span);
                    }
                    _ => {}
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e);
                self.diags.push(Diagnostic::warning(
                    codes::UNUSED_VALUE,
                    "expression value is discarded",
                    e.span,
                ));
            }
        }
    }

    /// Static interval of a numeric expression, or `None` when it cannot be bounded.
    fn interval(&self, e: &Expr) -> Option<(f64, f64)> {
        let iv = match &e.kind {
            ExprKind::Number { value, .. } => (*value, *value),
            ExprKind::Ident(name) => match self.lookup(name) {
                Some(v) => v.interval?,
                None => self.params.get(name)?.interval?,
            },
            ExprKind::Unary {
                op: UnaryOp::Neg,
                expr,
            } => {
                let (a, b) = self.interval(expr)?;
                (-b, -a)
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (a, b) = self.interval(lhs)?;
                let (c, d) = self.interval(rhs)?;
                match op {
                    BinaryOp::Add => (a + c, b + d),
                    BinaryOp::Sub => (a - d, b - c),
                    BinaryOp::Mul => hull(&[a * c, a * d, b * c, b * d]),
                    BinaryOp::Div if c > 0.0 || d < 0.0 => hull(&[a / c, a / d, b / c, b / d]),
                    _ => return None,
                }
            }
            ExprKind::Call { callee, args } => {
                let ivs: Option<Vec<(f64, f64)>> = args.iter().map(|a| self.interval(a)).collect();
                match (callee.name.as_str(), ivs.as_deref()) {
                    ("min", Some([(a, b), (c, d)])) => (a.min(*c), b.min(*d)),
                    ("max", Some([(a, b), (c, d)])) => (a.max(*c), b.max(*d)),
                    ("floor", Some([(a, b)])) => (a.floor(), b.floor()),
                    ("abs", Some([(a, b)])) => {
                        let lo = if *a <= 0.0 && *b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
                        (lo, a.abs().max(b.abs()))
                    }
                    ("len", _) => match args.first().map(|a| &a.kind) {
                        Some(ExprKind::List(items)) => (items.len() as f64, items.len() as f64),
                        _ => return None,
                    },
                    _ => return None,
                }
            }
            _ => return None,
        };
        (iv.0.is_finite() && iv.1.is_finite()).then_some(iv)
    }

    fn expr(&mut self, e: &Expr) -> Option<Type> {
        match &e.kind {
            ExprKind::Number { integer, .. } => Some(if *integer { Type::Integer } else { Type::Number }),
            ExprKind::Bool(_) => Some(Type::Boolean),
            ExprKind::Str(_) => Some(Type::Str),
            ExprKind::Ident(name) => {
                if let Some(v) = self.lookup(name) {
                    return v.ty.clone();
                }
                if let Some(p) = self.params.get(name) {
                    return Some(p.ty.clone());
                }
                let msg = if self.sigs.contains_key(name) || builtins::is_builtin(name) {
                    format!("`{name}` is a function, not a value")
                } else {
                    format!("unknown identifier `{name}`")
                };
                self.error(codes::UNKNOWN_IDENT, msg, e.span);
                None
            }
            ExprKind::List(items) => {
                let mut elem: Option<Type> = None;
                let mut unknown = false;
                for item in items {
                    match (self.expr(item), &elem) {
                        (None, _) => unknown = true,
                        (Some(t), None) => elem = Some(t),
                        (Some(t), Some(cur)) => match join(cur, &t) {
                            Some(j) => elem = Some(j),
                            None => {
                                self.type_error(format!("list mixes {cur} and {t}"), item.span);
                                unknown = true;
                            }
                        },
                    }
                }
                if unknown {
                    return None;
                }
                elem.map(|t| Type::List(Box::new(t)))
            }
            ExprKind::Unary { op, expr } => {
                let t = self.expr(expr)?;
                match (op, &t) {
                    (UnaryOp::Neg, Type::Number | Type::Integer | Type::Point) => Some(t),
                    (UnaryOp::Not, Type::Boolean) => Some(t),
                    _ => {
                        let sym = if *op == UnaryOp::Neg { "-" } else { "!" };
                        self.type_error(format!("operator `{sym}` cannot be applied to {t}"), e.span);
                        None
                    }
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (l, r) = (self.expr(lhs), self.expr(rhs));
                let (l, r) = (l?, r?);
                let res = binary_type(*op, &l, &r);
                if res.is_none() {
                    self.type_error(
                        format!("operator `{}` cannot be applied to {l} and {r}", op.symbol()),
                        e.span,
                    );
                }
                res
            }
            ExprKind::Index { target, index } => {
                let t = self.expr(target);
                self.expect_type(index, &Type::Integer, "list index");
                match t? {
                    Type::List(inner) => Some(*inner),
                    other => {
                        self.type_error(format!("cannot index into {other}"), target.span);
                        None
                    }
                }
            }
            ExprKind::Call { callee, args } => self.call(callee, args, e.span),
        }
    }

    fn arity(&mut self, name: &str, want: usize, got: usize, span: Span) -> bool {
        if want != got {
            self.error(
                codes::ARITY,
                format!("`{name}` expects {want} argument(s), got {got}"),
                span,
            );
            return false;
        }
        true
    }

    fn call(&mut self, callee: &Ident, args: &[Expr], span: Span) -> Option<Type> {
        let name = callee.name.as_str();
        if name == "emit" {
            self.error(codes::SYNTAX, "`emit` is a statement, not a function", callee.span);
            return None;
        }
        if let Some(b) = builtins::lookup(name) {
            return match b.params {
                Params::Fixed(want) => {
                    if !self.arity(name, want.len(), args.len(), span) {
                        args.iter().for_each(|a| {
                            self.expr(a);
                        });
                        return b.ret;
                    }
                    for (i, (a, w)) in args.iter().zip(&want).enumerate() {
                        self.expect_type(a, w, &format!("argument {} of `{name}`", i + 1));
                    }
                    b.ret
                }
                Params::Profiles => {
                    let types: Vec<Option<Type>> = args.iter().map(|a| self.expr(a)).collect();
                    match types.as_slice() {
                        [] => {
                            self.error(codes::ARITY, "`loft` needs at least 2 profiles", span);
                        }
                        [Some(Type::List(inner))] => {
                            if !inner.fits(&Type::Shape) {
                                self.type_error(format!("`loft` profiles must be shapes, found [{inner}]"), args[0].span);
                            }
                        }
                        [Some(Type::Shape)] => {
                            self.error(
                                codes::ARITY,
                                "`loft` needs at least 2 profiles (or one list of profiles), got 1",
                                span,
                            );
                        }
                        [_] => {
                            if let Some(t) = &types[0] {
                                self.type_error(format!("`loft` expects shapes or a list of shapes, found {t}"), args[0].span);
                            }
                        }
                        many => {
                            for (t, a) in many.iter().zip(args) {
                                if let Some(t) = t {
                                    if !t.fits(&Type::Shape) {
                                        self.type_error(format!("`loft` profile must be shape, found {t}"), a.span);
                                    }
                                }
                            }
                        }
                    }
                    b.ret
                }
                Params::AnyList => {
                    if self.arity(name, 1, args.len(), span) {
                        if let Some(t) = self.expr(&args[0]) {
                            if !matches!(t, Type::List(_)) {
                                self.type_error(format!("`len` expects a list, found {t}"), args[0].span);
                            }
                        }
                    }
                    b.ret
                }
                Params::Append => {
                    if !self.arity(name, 2, args.len(), span) {
                        return None;
                    }
                    let list = self.expr(&args[0]);
                    let item = self.expr(&args[1]);
                    match (list, item) {
                        (Some(Type::List(inner)), Some(item)) => match join(&inner, &item) {
                            Some(j) => Some(Type::List(Box::new(j))),
                            None => {
                                self.type_error(format!("cannot append {item} to [{inner}]"), args[1].span);
                                None
                            }
                        },
                        (Some(other), _) if !matches!(other, Type::List(_)) => {
                            self.type_error(format!("`append` expects a list, found {other}"), args[0].span);
                            None
                        }
                        (None, Some(item)) => Some(Type::List(Box::new(item))),
                        _ => None,
                    }
                }
            };
        }
        let Some(sig) = self.sigs.get(name).cloned() else {
            self.error(
                codes::UNREGISTERED_METHOD,
                format!("method `{name}` is not registered"),
                callee.span,
            );
            args.iter().for_each(|a| {
                self.expr(a);
            });
            return None;
        };
        if self.arity(name, sig.params.len(), args.len(), span) {
            for (i, (a, w)) in args.iter().zip(&sig.params).enumerate() {
                self.expect_type(a, w, &format!("argument {} of `{name}`", i + 1));
            }
        } else {
            args.iter().for_each(|a| {
                self.expr(a);
            });
        }
        Some(sig.ret)
    }
}

fn hull(xs: &[f64]) -> (f64, f64) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Result type of a binary operator, or `None` if the operands are not accepted.
pub(crate) fn binary_type(op: BinaryOp, l: &Type, r: &Type) -> Option<Type> {
    use Type::*;
    let numeric = l.is_numeric() && r.is_numeric();
    let both_int = *l == Integer && *r == Integer;
    match op {
        BinaryOp::Or | BinaryOp::And => (*l == Boolean && *r == Boolean).then_some(Boolean),
        BinaryOp::Eq | BinaryOp::Ne => {
            let ok = numeric || (l == r && matches!(l, Boolean | Str));
            ok.then_some(Boolean)
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => numeric.then_some(Boolean),
        BinaryOp::Add | BinaryOp::Sub => match (l, r) {
            _ if both_int => Some(Integer),
            _ if numeric => Some(Number),
            (Point, Point) => Some(Point),
            _ => None,
        },
        BinaryOp::Mul => match (l, r) {
            _ if both_int => Some(Integer),
            _ if numeric => Some(Number),
            (Point, n) | (n, Point) if n.is_numeric() => Some(Point),
            _ => None,
        },
        BinaryOp::Div => match (l, r) {
            _ if numeric => Some(Number),
            (Point, n) if n.is_numeric() => Some(Point),
            _ => None,
        },
        BinaryOp::Rem => match () {
            _ if both_int => Some(Integer),
            _ if numeric => Some(Number),
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn codes_of(src: &str) -> Vec<String> {
        let p = parse(src).unwrap_or_else(|d| panic!("{d:?}"));
        let set = ParamSet::from_program(&p).unwrap();
        check(&p, &MethodRegistry::new(), &set)
            .into_iter()
            .filter(Diagnostic::is_error)
            .map(|d| d.code)
            .collect()
    }

    #[test]
    fn two_squares_is_clean() {
        let p = parse(
            "logic { let first = rect(point(0, 0, 0), 1, 1); emit(first); emit(translate(first, 2, 0, 0)); }",
        )
        .unwrap();
        assert!(check(&p, &MethodRegistry::new(), &ParamSet::new()).is_empty());
    }

    #[test]
    fn unregistered_method_is_a_link_error() {
        assert_eq!(
            codes_of("logic { emit(ring(point(0, 0, 0), 1)); }"),
            vec![codes::UNREGISTERED_METHOD]
        );
    }

    #[test]
    fn local_method_resolves() {
        let src = "method ring(c: point, r: number) -> shape { return ellipse(c, r, r); }\nlogic { emit(ring(point(0, 0, 0), 1)); }";
        assert!(codes_of(src).is_empty());
    }

    #[test]
    fn loft_with_one_profile_is_an_arity_error() {
        let src = "logic { let p1 = rect(point(0, 0, 0), 1, 1); emit(loft(p1)); }";
        assert_eq!(codes_of(src), vec![codes::ARITY]);
        let ok = "logic { let p1 = rect(point(0, 0, 0), 1, 1); emit(loft(p1, translate(p1, 0, 0, 1))); emit(loft([p1, translate(p1, 0, 0, 1)])); }";
        assert!(codes_of(ok).is_empty());
    }

    #[test]
    fn unknown_identifier() {
        assert_eq!(codes_of("logic { emit(sqaure); }"), vec![codes::UNKNOWN_IDENT]);
    }

    #[test]
    fn arity_and_types() {
        assert_eq!(codes_of("logic { emit(rect(point(0, 0, 0), 1)); }"), vec![codes::ARITY]);
        assert_eq!(codes_of("logic { emit(rect(1, 1, 1)); }"), vec![codes::TYPE]);
        assert_eq!(codes_of("logic { let a = true + 1; }"), vec![codes::TYPE]);
        assert_eq!(codes_of("logic { if 1 { } }"), vec![codes::TYPE]);
    }

    #[test]
    fn method_rules() {
        assert_eq!(
            codes_of("method f(a: number) -> number { if a > 0 { return 1; } }\nlogic {}"),
            vec![codes::MISSING_RETURN]
        );
        assert_eq!(
            codes_of("method f(a: number) -> number { return f(a); }\nlogic {}"),
            vec![codes::RECURSION]
        );
        assert_eq!(
            codes_of("method f(a: number) -> number { return g(a); }\nmethod g(a: number) -> number { return f(a); }\nlogic {}"),
            vec![codes::RECURSION, codes::RECURSION]
        );
        assert_eq!(
            codes_of("method rect(a: number) -> number { return a; }\nlogic {}"),
            vec![codes::BUILTIN_SHADOW]
        );
        assert_eq!(
            codes_of("method f(a: point) -> shape { emit(rect(a, 1, 1)); return rect(a, 1, 1); }\nlogic {}"),
            vec![codes::EMIT_IN_METHOD]
        );
        assert_eq!(codes_of("logic { return 1; }"), vec![codes::RETURN_OUTSIDE_METHOD]);
        assert_eq!(
            codes_of("method f() -> number { return 1; }\nmethod f() -> number { return 2; }\nlogic {}"),
            vec![codes::DUPLICATE_METHOD]
        );
    }

    #[test]
    fn loop_bounds() {
        assert!(codes_of("param N: integer = 3 in [1, 20]\nlogic { for i in 0..N { emit(rect(point(i, 0, 0), 1, 1)); } }").is_empty());
        assert_eq!(
            codes_of("param N: integer = 3\nlogic { for i in 0..N { } }"),
            vec![codes::UNBOUNDED_LOOP]
        );
        assert_eq!(
            codes_of("logic { let n = 3; n = n * 2; for i in 0..n { } }"),
            vec![codes::UNBOUNDED_LOOP]
        );
        assert!(codes_of("logic { let n = 3; for i in 0..n * 2 { for j in i..n { } } }").is_empty());
        assert_eq!(codes_of("logic { for i in 0..3 { i = 2; } }"), vec![codes::IMMUTABLE]);
    }

    #[test]
    fn param_declarations() {
        let p = parse("param A: number = 1\nparam A: number = 2\nlogic {}").unwrap();
        let d = check(&p, &MethodRegistry::new(), &ParamSet::new());
        assert_eq!(d[0].code, codes::DUPLICATE_PARAM);
        let p = parse("param A: number = 30 in [0, 10]\nlogic {}").unwrap();
        let d = check(&p, &MethodRegistry::new(), &ParamSet::new());
        assert_eq!(d[0].code, codes::OUT_OF_RANGE);
        let p = parse("param A: number in [10, 0]\nlogic {}").unwrap();
        let codes: Vec<_> = check(&p, &MethodRegistry::new(), &ParamSet::new())
            .into_iter()
            .map(|d| d.code)
            .collect();
        assert_eq!(codes, vec![codes::INVALID_RANGE, codes::PARAM_MISSING]);
    }

    #[test]
    fn session_kind_must_match() {
        use crate::params::ParamSpec;
        let p = parse("param A: integer = 1\nlogic {}").unwrap();
        let mut set = ParamSet::new();
        set.declare(ParamSpec::new("A", ParamKind::Boolean)).unwrap();
        let d = check(&p, &MethodRegistry::new(), &set);
        assert_eq!(d[0].code, codes::PARAM_KIND);
    }

    #[test]
    fn integer_arithmetic_and_points() {
        assert!(codes_of("logic { let xs = [rect(point(0, 0, 0), 1, 1)]; let s = xs[1 + 1 * 0]; let p = point(1, 2, 3) * 2 - point(0, 0, 1); emit(translate(s, x(p), y(p), z(p))); }").is_empty());
        assert_eq!(codes_of("logic { let xs = [1, 2]; let v = xs[0.5]; }"), vec![codes::TYPE]);
    }
}
