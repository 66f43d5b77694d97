//! Built-in functions: names and static signatures. Runtime behaviour lives in the
//! interpreter.

use super::ast::Type;

/// How a built-in accepts its arguments.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Fixed(Vec<Type>),
    /// `loft(a, b, ...)` with at least two shapes, or `loft(list)`.
    Profiles,
    /// `len(list)`.
    AnyList,
    /// `append(list, item)`.
    Append,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Builtin {
    pub name: &'static str,
    pub params: Params,
    /// Return type; `None` when it depends on the arguments (`append`).
    pub ret: Option<Type>,
}

pub const NAMES: &[&str] = &[
    "point",
    "polyline",
    "closed_polyline",
    "ellipse",
    "rect",
    "translate",
    "rotate",
    "scale",
    "extrude",
    "loft",
    "sweep",
    "array_linear",
    "array_radial",
    "distribute_random",
    "group",
    "x",
    "y",
    "z",
    "sqrt",
    "abs",
    "sin",
    "cos",
    "min",
    "max",
    "floor",
    "len",
    "append",
    "emit",
];

pub fn is_builtin(name: &str) -> bool {
    NAMES.contains(&name)
}

fn list(t: Type) -> Type {
    Type::List(Box::new(t))
}

/// Signature of built-in `name`. `emit` is a statement and has no entry.
pub fn lookup(name: &str) -> Option<Builtin> {
    use Type::*;
    let fixed = |params: Vec<Type>, ret: Type| (Params::Fixed(params), Some(ret));
    let (params, ret) = match name {
        "point" => fixed(vec![Number, Number, Number], Point),
        "polyline" | "closed_polyline" => fixed(vec![list(Point)], Shape),
        "ellipse" | "rect" => fixed(vec![Point, Number, Number], Shape),
        "translate" => fixed(vec![Shape, Number, Number, Number], Shape),
        "rotate" | "scale" | "extrude" => fixed(vec![Shape, Number], Shape),
        "loft" => (Params::Profiles, Some(Shape)),
        "sweep" => fixed(vec![Shape, Shape], Shape),
        "array_linear" => fixed(vec![Shape, Integer, Number, Number, Number], list(Shape)),
        "array_radial" => fixed(vec![Shape, Integer, Point], list(Shape)),
        "distribute_random" => fixed(vec![Shape, Integer], list(Point)),
        "group" => fixed(vec![list(Shape)], Shape),
        "x" | "y" | "z" => fixed(vec![Point], Number),
        "sqrt" | "abs" | "sin" | "cos" => fixed(vec![Number], Number),
        "min" | "max" => fixed(vec![Number, Number], Number),
        "floor" => fixed(vec![Number], Integer),
        "len" => (Params::AnyList, Some(Integer)),
        "append" => (Params::Append, None),
        _ => return None,
    };
    let name = NAMES.iter().find(|n| **n == name).copied()?;
    Some(Builtin { name, params, ret })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_but_emit_has_a_signature() {
        for n in NAMES {
            assert_eq!(lookup(n).is_some(), *n != "emit", "{n}");
        }
        assert!(lookup("ring").is_none());
    }
}
