//! Tree-walking interpreter: phase two of two-phase linking.

use std::collections::HashMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ast::*;
use super::registry::MethodRegistry;
use super::{codes, Diagnostic, Span};
use crate::geometry::{self, AxisAngle, GeometryError, Shape, ShapeRegistry, Vec3};
use crate::params::{Completeness, ParamKind, ParamSet, ParamValue};

pub const MAX_LOOP_ITERATIONS: u64 = 100_000;
pub const MAX_EMITS: usize = 10_000;
pub const MAX_CALL_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EvalStats {
    pub statements: u64,
    pub loop_iterations: u64,
    pub method_calls: u64,
}

/// Emitted shapes in emit order, with the span of the emit statement that produced each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub shapes: Vec<Shape>,
    pub provenance: Vec<Span>,
    pub stats: EvalStats,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    Point(Vec3),
    Shape(Shape),
    List(Vec<Value>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::Point(_) => "point",
            Value::Shape(_) => "shape",
            Value::List(_) => "list",
        }
    }
}

/// Evaluates `program` with no scene shapes available for reference parameters.
pub fn evaluate(
    program: &Program,
    params: &ParamSet,
    registry: &MethodRegistry,
    seed: u64,
) -> Result<EvalResult, Diagnostic> {
    evaluate_in(program, params, registry, &ShapeRegistry::new(), seed)
}

/// Evaluates `program`, resolving reference parameters against `scene`.
pub fn evaluate_in(
    program: &Program,
    params: &ParamSet,
    registry: &MethodRegistry,
    scene: &ShapeRegistry,
    seed: u64,
) -> Result<EvalResult, Diagnostic> {
    if let Completeness::Missing(names) = params.validate_complete() {
        return Err(Diagnostic::error(
            codes::PARAM_PENDING,
            format!("parameters not confirmed: {}", names.join(", ")),
            program.logic.span,
        ));
    }
    let mut methods: HashMap<&str, &MethodDef> = registry
        .iter()
        .map(|e| (e.def.name.name.as_str(), &e.def))
        .collect();
    for m in &program.methods {
        methods.insert(m.name.name.as_str(), m);
    }
    let mut interp = Interp {
        program,
        params,
        scene,
        methods,
        seed,
        frames: vec![Frame::new("logic")],
        site_counts: HashMap::new(),
        shapes: Vec::new(),
        provenance: Vec::new(),
        stats: EvalStats::default(),
    };
    match interp.block(&program.logic)? {
        Flow::Normal => {}
        Flow::Return(_, span) => {
            return Err(Diagnostic::error(
                codes::RETURN_OUTSIDE_METHOD,
                "`return` is only allowed inside methods",
                span,
            ))
        }
    }
    Ok(EvalResult {
        shapes: interp.shapes,
        provenance: interp.provenance,
        stats: interp.stats,
    })
}

enum Flow {
    Normal,
    Return(Value, Span),
}

struct Frame {
    owner: String,
    scopes: Vec<HashMap<String, Value>>,
}

impl Frame {
    fn new(owner: &str) -> Self {
        Frame {
            owner: owner.to_string(),
            scopes: vec![HashMap::new()],
        }
    }
}

struct Interp<'a> {
    program: &'a Program,
    params: &'a ParamSet,
    scene: &'a ShapeRegistry,
    methods: HashMap<&'a str, &'a MethodDef>,
    seed: u64,
    frames: Vec<Frame>,
    site_counts: HashMap<(String, usize), u64>,
    shapes: Vec<Shape>,
    provenance: Vec<Span>,
    stats: EvalStats,
}

type R<T> = Result<T, Diagnostic>;

fn rt_type(msg: impl Into<String>, span: Span) -> Diagnostic {
    Diagnostic::error(codes::RUNTIME_TYPE, msg, span)
}

fn domain(msg: impl Into<String>, span: Span) -> Diagnostic {
    Diagnostic::error(codes::RUNTIME_DOMAIN, msg, span)
}

fn geo(e: GeometryError, span: Span) -> Diagnostic {
    domain(e.to_string(), span)
}

fn finite(v: f64, span: Span) -> R<Value> {
    if v.is_finite() {
        Ok(Value::Number(v))
    } else {
        Err(domain("arithmetic produced a non-finite number", span))
    }
}

impl<'a> Interp<'a> {
    fn frame(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("frame stack is never empty")
    }

    fn lookup(&self, name: &str) -> Option<&Value> {
        let f = self.frames.last().expect("frame stack is never empty");
        f.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn with_scope<T>(&mut self, vars: Vec<(String, Value)>, f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        self.frame().scopes.push(vars.into_iter().collect());
        let out = f(self);
        self.frame().scopes.pop();
        out
    }

    fn block(&mut self, b: &Block) -> R<Flow> {
        self.with_scope(Vec::new(), |me| me.stmts(b))
    }

    fn stmts(&mut self, b: &Block) -> R<Flow> {
        for s in &b.stmts {
            if let Flow::Return(v, sp) = self.stmt(s)? {
                return Ok(Flow::Return(v, sp));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt) -> R<Flow> {
        self.stats.statements += 1;
        match &s.kind {
            StmtKind::Let { name, value } => {
                let v = self.expr(value)?;
                self.frame()
                    .scopes
                    .last_mut()
                    .expect("scope")
                    .insert(name.name.clone(), v);
            }
            StmtKind::Assign { name, value } => {
                let v = self.expr(value)?;
                let frame = self.frame();
                let slot = frame
                    .scopes
                    .iter_mut()
                    .rev()
                    .find_map(|sc| sc.get_mut(&name.name))
                    .ok_or_else(|| rt_type(format!("assignment to undeclared `{}`", name.name), name.span))?;
                *slot = v;
            }
            StmtKind::For {
                var,
                start,
                end,
                body,
            } => {
                let a = self.number(start)?;
                let b = self.number(end)?;
                let mut i = a;
                while i < b {
                    self.stats.loop_iterations += 1;
                    if self.stats.loop_iterations > MAX_LOOP_ITERATIONS {
                        return Err(Diagnostic::error(
                            codes::CAP_EXCEEDED,
                            format!("more than {MAX_LOOP_ITERATIONS} loop iterations"),
                            s.span,
                        ));
                    }
                    let flow = self.with_scope(vec![(var.name.clone(), Value::Number(i))], |me| me.stmts(body))?;
                    if let Flow::Return(v, sp) = flow {
                        return Ok(Flow::Return(v, sp));
                    }
                    i += 1.0;
                }
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                let c = match self.expr(cond)? {
                    Value::Bool(b) => b,
                    other => return Err(rt_type(format!("condition is {}", other.type_name()), cond.span)),
                };
                if c {
                    return self.block(then);
                }
                match otherwise {
                    Some(Else::Block(b)) => return self.block(b),
                    Some(Else::If(s)) => return self.stmt(s),
                    None => {}
                }
            }
            StmtKind::Emit(e) => {
                if self.frames.len() > 1 {
                    return Err(Diagnostic::error(codes::EMIT_IN_METHOD, "methods cannot emit", s.span));
                }
                let v = self.expr(e)?;
                self.emit(v, s.span)?;
            }
            StmtKind::Return(e) => {
                let v = self.expr(e)?;
                return Ok(Flow::Return(v, s.span));
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn emit(&mut self, v: Value, span: Span) -> R<()> {
        let shape = match v {
            Value::Shape(s) => s,
            Value::Point(p) => Shape::point(p).map_err(|e| geo(e, span))?,
            Value::List(items) => {
                for item in items {
                    self.emit(item, span)?;
                }
                return Ok(());
            }
            other => return Err(rt_type(format!("cannot emit a {}", other.type_name()), span)),
        };
        if self.shapes.len() >= MAX_EMITS {
            return Err(Diagnostic::error(
                codes::CAP_EXCEEDED,
                format!("more than {MAX_EMITS} emitted shapes"),
                span,
            ));
        }
        self.shapes.push(shape);
        self.provenance.push(span);
        Ok(())
    }

    fn number(&mut self, e: &Expr) -> R<f64> {
        match self.expr(e)? {
            Value::Number(n) => Ok(n),
            other => Err(rt_type(format!("expected a number, found {}", other.type_name()), e.span)),
        }
    }

    fn param_value(&self, name: &str, span: Span) -> R<Option<Value>> {
        let decl = self.program.params.iter().find(|d| d.name.name == name);
        let Some(spec) = self.params.get(name) else {
            return Ok(decl.and_then(|d| d.default.as_ref()).map(|lit| match lit {
                Literal::Number { value, .. } => Value::Number(*value),
                Literal::Bool(b) => Value::Bool(*b),
                Literal::Str(s) => Value::Str(s.clone()),
            }));
        };
        if spec.kind.is_reference() {
            let id = spec.reference.ok_or_else(|| {
                Diagnostic::error(codes::PARAM_PENDING, format!("parameter `{name}` is not bound"), span)
            })?;
            let shape = self.scene.get(id).map_err(|_| {
                Diagnostic::error(
                    codes::UNRESOLVED_REF,
                    format!("parameter `{name}` refers to missing {id}"),
                    span,
                )
            })?;
            return Ok(Some(match (&spec.kind, shape) {
                (ParamKind::PointRef, Shape::Point { pos }) => Value::Point(*pos),
                (ParamKind::PointRef, _) => {
                    return Err(rt_type(format!("parameter `{name}` does not refer to a point"), span))
                }
                _ => Value::Shape(shape.clone()),
            }));
        }
        let value = spec.value.as_ref().ok_or_else(|| {
            Diagnostic::error(codes::PARAM_PENDING, format!("parameter `{name}` has no value"), span)
        })?;
        Ok(Some(match value {
            ParamValue::Number(n) => Value::Number(*n),
            ParamValue::Bool(b) => Value::Bool(*b),
            ParamValue::Text(s) => Value::Str(s.clone()),
        }))
    }

    fn expr(&mut self, e: &Expr) -> R<Value> {
        match &e.kind {
            ExprKind::Number { value, .. } => Ok(Value::Number(*value)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Ident(name) => {
                if let Some(v) = self.lookup(name) {
                    return Ok(v.clone());
                }
                if self.frames.len() == 1 {
                    if let Some(v) = self.param_value(name, e.span)? {
                        return Ok(v);
                    }
                }
                Err(Diagnostic::error(
                    codes::UNKNOWN_IDENT,
                    format!("unknown identifier `{name}`"),
                    e.span,
                ))
            }
            ExprKind::List(items) => Ok(Value::List(
                items.iter().map(|i| self.expr(i)).collect::<R<Vec<_>>>()?,
            )),
            ExprKind::Unary { op, expr } => match (op, self.expr(expr)?) {
                (UnaryOp::Neg, Value::Number(n)) => Ok(Value::Number(-n)),
                (UnaryOp::Neg, Value::Point(p)) => Ok(Value::Point(-p)),
                (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (_, v) => Err(rt_type(format!("bad operand {}", v.type_name()), e.span)),
            },
            ExprKind::Binary { op, lhs, rhs } => {
                if matches!(op, BinaryOp::And | BinaryOp::Or) {
                    let l = self.expr(lhs)?;
                    let Value::Bool(l) = l else {
                        return Err(rt_type("logical operator needs booleans", lhs.span));
                    };
                    if (*op == BinaryOp::And && !l) || (*op == BinaryOp::Or && l) {
                        return Ok(Value::Bool(l));
                    }
                    return match self.expr(rhs)? {
                        Value::Bool(r) => Ok(Value::Bool(r)),
                        _ => Err(rt_type("logical operator needs booleans", rhs.span)),
                    };
                }
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                binary(*op, l, r, e.span)
            }
            ExprKind::Index { target, index } => {
                let t = self.expr(target)?;
                let i = self.number(index)?;
                let Value::List(items) = t else {
                    return Err(rt_type(format!("cannot index into {}", t.type_name()), target.span));
                };
                if i.fract() != 0.0 || i < 0.0 || i as usize >= items.len() {
                    return Err(domain(
                        format!("index {i} out of bounds for list of length {}", items.len()),
                        index.span,
                    ));
                }
                Ok(items[i as usize].clone())
            }
            ExprKind::Call { callee, args } => {
                let vals = args.iter().map(|a| self.expr(a)).collect::<R<Vec<_>>>()?;
                if let Some(m) = self.methods.get(callee.name.as_str()).copied() {
                    return self.call_method(m, vals, e.span);
                }
                self.builtin(&callee.name, vals, e.span)
            }
        }
    }

    fn call_method(&mut self, m: &MethodDef, args: Vec<Value>, span: Span) -> R<Value> {
        if args.len() != m.params.len() {
            return Err(rt_type(
                format!("`{}` expects {} arguments, got {}", m.name.name, m.params.len(), args.len()),
                span,
            ));
        }
        if self.frames.len() > MAX_CALL_DEPTH {
            return Err(Diagnostic::error(
                codes::CAP_EXCEEDED,
                format!("call depth exceeds {MAX_CALL_DEPTH}"),
                span,
            ));
        }
        self.stats.method_calls += 1;
        let mut frame = Frame::new(&m.name.name);
        for ((name, _), v) in m.params.iter().zip(args) {
            frame.scopes[0].insert(name.name.clone(), v);
        }
        self.frames.push(frame);
        let flow = self.stmts(&m.body);
        self.frames.pop();
        match flow? {
            Flow::Return(v, _) => Ok(v),
            Flow::Normal => Err(rt_type(format!("method `{}` ended without returning", m.name.name), span)),
        }
    }

    /// Seed for one `distribute_random` call: mixes the evaluation seed, the call site and
    /// how many times that site has run.
    fn site_seed(&mut self, span: Span) -> u64 {
        let owner = self.frames.last().expect("frame").owner.clone();
        let counter = self.site_counts.entry((owner.clone(), span.start)).or_insert(0);
        let n = *counter;
        *counter += 1;
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(owner.as_bytes());
        h.update((span.start as u64).to_le_bytes());
        h.update(n.to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>, span: Span) -> R<Value> {
        use Value as V;
        let bad = || rt_type(format!("invalid arguments to `{name}`"), span);
        let count = |n: f64| -> R<usize> {
            if n.fract() != 0.0 || n < 1.0 || n > MAX_EMITS as f64 {
                Err(domain(format!("count must be an integer in [1, {MAX_EMITS}], got {n}"), span))
            } else {
                Ok(n as usize)
            }
        };
        let shape = |r: Result<Shape, GeometryError>| r.map(V::Shape).map_err(|e| geo(e, span));
        let points = |items: &[Value]| -> R<Vec<Vec3>> {
            items
                .iter()
                .map(|v| match v {
                    V::Point(p) => Ok(*p),
                    _ => Err(bad()),
                })
                .collect()
        };
        Ok(match (name, args.as_slice()) {
            ("point", [V::Number(x), V::Number(y), V::Number(z)]) => V::Point(Vec3::new(*x, *y, *z)),
            ("polyline", [V::List(items)]) => shape(Shape::polyline(points(items)?))?,
            ("closed_polyline", [V::List(items)]) => shape(Shape::closed_polyline(points(items)?))?,
            ("ellipse", [V::Point(c), V::Number(a), V::Number(b)]) => shape(Shape::ellipse(*c, *a, *b))?,
            ("rect", [V::Point(c), V::Number(w), V::Number(h)]) => shape(Shape::rect(*c, *w, *h))?,
            ("translate", [V::Shape(s), V::Number(x), V::Number(y), V::Number(z)]) => shape(geometry::transform(
                s,
                Vec3::new(*x, *y, *z),
                AxisAngle::ZERO,
                1.0,
            ))?,
            ("rotate", [V::Shape(s), V::Number(deg)]) => shape(geometry::transform(
                s,
                Vec3::ZERO,
                AxisAngle::about_z(deg.to_radians()),
                1.0,
            ))?,
            ("scale", [V::Shape(s), V::Number(k)]) => {
                shape(geometry::transform(s, Vec3::ZERO, AxisAngle::ZERO, *k))?
            }
            ("extrude", [V::Shape(s), V::Number(h)]) => shape(Shape::extrusion(s.clone(), *h))?,
            ("loft", [V::List(items)]) => {
                let profiles = items
                    .iter()
                    .map(|v| match v {
                        V::Shape(s) => Ok(s.clone()),
                        _ => Err(bad()),
                    })
                    .collect::<R<Vec<_>>>()?;
                shape(geometry::loft(profiles))?
            }
            ("loft", items) => {
                let profiles = items
                    .iter()
                    .map(|v| match v {
                        V::Shape(s) => Ok(s.clone()),
                        _ => Err(bad()),
                    })
                    .collect::<R<Vec<_>>>()?;
                shape(geometry::loft(profiles))?
            }
            ("sweep", [V::Shape(p), V::Shape(path)]) => shape(geometry::sweep(p.clone(), path.clone()))?,
            ("array_linear", [V::Shape(s), V::Number(n), V::Number(dx), V::Number(dy), V::Number(dz)]) => {
                let n = count(*n)?;
                let step = Vec3::new(*dx, *dy, *dz);
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    out.push(shape(geometry::transform(s, step * i as f64, AxisAngle::ZERO, 1.0))?);
                }
                V::List(out)
            }
            ("array_radial", [V::Shape(s), V::Number(n), V::Point(c)]) => {
                let n = count(*n)?;
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let angle = std::f64::consts::TAU * i as f64 / n as f64;
                    let moved = geometry::transform(s, -*c, AxisAngle::ZERO, 1.0)
                        .and_then(|t| geometry::transform(&t, *c, AxisAngle::about_z(angle), 1.0));
                    out.push(shape(moved)?);
                }
                V::List(out)
            }
            ("distribute_random", [V::Shape(region), V::Number(n)]) => {
                let n = count(*n)?;
                let seed = self.site_seed(span);
                match geometry::distribute_random(region, n, seed).map_err(|e| geo(e, span))? {
                    Shape::Group { children } => V::List(
                        children
                            .into_iter()
                            .map(|c| match c {
                                Shape::Point { pos } => V::Point(pos),
                                other => V::Shape(other),
                            })
                            .collect(),
                    ),
                    other => V::List(vec![V::Shape(other)]),
                }
            }
            ("group", [V::List(items)]) => {
                let children = items
                    .iter()
                    .map(|v| match v {
                        V::Shape(s) => Ok(s.clone()),
                        V::Point(p) => Ok(Shape::Point { pos: *p }),
                        _ => Err(bad()),
                    })
                    .collect::<R<Vec<_>>>()?;
                shape(Shape::group(children))?
            }
            ("x", [V::Point(p)]) => V::Number(p.x),
            ("y", [V::Point(p)]) => V::Number(p.y),
            ("z", [V::Point(p)]) => V::Number(p.z),
            ("sqrt", [V::Number(n)]) => {
                if *n < 0.0 {
                    return Err(domain(format!("sqrt of negative number {n}"), span));
                }
                V::Number(n.sqrt())
            }
            ("abs", [V::Number(n)]) => V::Number(n.abs()),
            ("sin", [V::Number(n)]) => V::Number(n.to_radians().sin()),
            ("cos", [V::Number(n)]) => V::Number(n.to_radians().cos()),
            ("min", [V::Number(a), V::Number(b)]) => V::Number(a.min(*b)),
            ("max", [V::Number(a), V::Number(b)]) => V::Number(a.max(*b)),
            ("floor", [V::Number(n)]) => V::Number(n.floor()),
            ("len", [V::List(items)]) => V::Number(items.len() as f64),
            ("append", [V::List(items), item]) => {
                let mut items = items.clone();
                items.push(item.clone());
                V::List(items)
            }
            _ if super::builtins::is_builtin(name) => return Err(bad()),
            _ => {
                return Err(Diagnostic::error(
                    codes::UNREGISTERED_METHOD,
                    format!("method `{name}` is not registered"),
                    span,
                ))
            }
        })
    }
}

fn binary(op: BinaryOp, l: Value, r: Value, span: Span) -> R<Value> {
    use Value as V;
    let bad = |l: &Value, r: &Value| {
        rt_type(
            format!("operator `{}` cannot be applied to {} and {}", op.symbol(), l.type_name(), r.type_name()),
            span,
        )
    };
    Ok(match (op, &l, &r) {
        (BinaryOp::Add, V::Number(a), V::Number(b)) => finite(a + b, span)?,
        (BinaryOp::Sub, V::Number(a), V::Number(b)) => finite(a - b, span)?,
        (BinaryOp::Mul, V::Number(a), V::Number(b)) => finite(a * b, span)?,
        (BinaryOp::Div | BinaryOp::Rem, V::Number(_), V::Number(b)) if *b == 0.0 => {
            return Err(domain("division by zero", span))
        }
        (BinaryOp::Div, V::Number(a), V::Number(b)) => finite(a / b, span)?,
        (BinaryOp::Rem, V::Number(a), V::Number(b)) => finite(a.rem_euclid(*b), span)?,
        (BinaryOp::Add, V::Point(a), V::Point(b)) => V::Point(*a + *b),
        (BinaryOp::Sub, V::Point(a), V::Point(b)) => V::Point(*a - *b),
        (BinaryOp::Mul, V::Point(p), V::Number(k)) | (BinaryOp::Mul, V::Number(k), V::Point(p)) => {
            V::Point(*p * *k)
        }
        (BinaryOp::Div, V::Point(_), V::Number(k)) if *k == 0.0 => return Err(domain("division by zero", span)),
        (BinaryOp::Div, V::Point(p), V::Number(k)) => V::Point(*p * (1.0 / *k)),
        (BinaryOp::Lt, V::Number(a), V::Number(b)) => V::Bool(a < b),
        (BinaryOp::Le, V::Number(a), V::Number(b)) => V::Bool(a <= b),
        (BinaryOp::Gt, V::Number(a), V::Number(b)) => V::Bool(a > b),
        (BinaryOp::Ge, V::Number(a), V::Number(b)) => V::Bool(a >= b),
        (BinaryOp::Eq, V::Number(_), V::Number(_))
        | (BinaryOp::Eq, V::Bool(_), V::Bool(_))
        | (BinaryOp::Eq, V::Str(_), V::Str(_)) => V::Bool(l == r),
        (BinaryOp::Ne, V::Number(_), V::Number(_))
        | (BinaryOp::Ne, V::Bool(_), V::Bool(_))
        | (BinaryOp::Ne, V::Str(_), V::Str(_)) => V::Bool(l != r),
        _ => return Err(bad(&l, &r)),
    })
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn run(src: &str) -> R<EvalResult> {
        let p = parse(src).unwrap();
        let set = ParamSet::from_program(&p).unwrap();
        evaluate(&p, &set, &MethodRegistry::new(), 7)
    }

    #[test]
    fn runtime_domain_errors() {
        let e = run("logic { let r = 1 - 2; emit(ellipse(point(0, 0, 0), r, 1)); }").unwrap_err();
        assert_eq!(e.code, codes::RUNTIME_DOMAIN);
        assert_eq!(run("logic { let a = 1 / 0; }").unwrap_err().code, codes::RUNTIME_DOMAIN);
        assert_eq!(run("logic { let a = sqrt(0 - 1); }").unwrap_err().code, codes::RUNTIME_DOMAIN);
    }

    #[test]
    fn loop_cap_stops_long_loops() {
        let e = run("logic { for i in 0..1000 { for j in 0..1000 { } } }").unwrap_err();
        assert_eq!(e.code, codes::CAP_EXCEEDED);
    }

    #[test]
    fn emit_cap() {
        let e = run("logic { for i in 0..20000 { emit(point(i, 0, 0)); } }").unwrap_err();
        assert_eq!(e.code, codes::CAP_EXCEEDED);
    }

    #[test]
    fn loft_with_one_profile_fails_at_runtime_too() {
        let e = run("logic { let p1 = rect(point(0, 0, 0), 1, 1); emit(loft(p1)); }").unwrap_err();
        assert_eq!(e.code, codes::RUNTIME_DOMAIN);
    }

    #[test]
    fn provenance_and_stats() {
        let r = run("logic {\n  for i in 0..3 {\n    emit(point(i, 0, 0));\n  }\n  emit([point(9, 9, 9)]);\n}").unwrap();
        assert_eq!(r.shapes.len(), 4);
        assert_eq!(r.provenance[0].line, 3);
        assert_eq!(r.provenance[3].line, 5);
        assert_eq!(r.stats.loop_iterations, 3);
    }

    #[test]
    fn distribute_random_is_seeded_per_call_site() {
        let src = "logic { let region = rect(point(0, 0, 0), 10, 10); emit(distribute_random(region, 5)); emit(distribute_random(region, 5)); }";
        let a = run(src).unwrap();
        let b = run(src).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.shapes[0], a.shapes[5]);
        for s in &a.shapes {
            let Shape::Point { pos } = s else { panic!() };
            assert!((0.0..=10.0).contains(&pos.x) && (0.0..=10.0).contains(&pos.y));
        }
    }

    #[test]
    fn array_radial_places_copies_around_center() {
        let r = run("logic { let c = point(1, 1, 0); emit(array_radial(ellipse(point(2, 1, 0), 0.5, 0.25), 4, c)); }").unwrap();
        let centers: Vec<Vec3> = r
            .shapes
            .iter()
            .map(|s| match s {
                Shape::Ellipse { center, .. } => *center,
                _ => panic!(),
            })
            .collect();
        let expected = [(2.0, 1.0), (1.0, 2.0), (0.0, 1.0), (1.0, 0.0)];
        for (c, (x, y)) in centers.iter().zip(expected) {
            assert!((c.x - x).abs() < 1e-12 && (c.y - y).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn pending_params_block_evaluation() {
        let p = parse("param N: integer in [1, 3]\nlogic {}").unwrap();
        let set = ParamSet::from_program(&p).unwrap();
        assert_eq!(
            evaluate(&p, &set, &MethodRegistry::new(), 0).unwrap_err().code,
            codes::PARAM_PENDING
        );
    }
}
