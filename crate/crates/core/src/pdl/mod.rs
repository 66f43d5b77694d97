//! The Parametric Design Language: a small interpreted language for parametric design
//! programs.
//!
//! A program declares parameters, defines methods and ends with a `logic` block. Linking
//! happens in two phases: methods are registered first ([`register_methods`]), then logic
//! is checked and evaluated against the registry ([`check`], [`evaluate`]). A call to a
//! method that was never registered is a link error (`E_UNREGISTERED_METHOD`).
//!
//! ```
//! use parlogue::params::ParamSet;
//! use parlogue::pdl::{self, MethodRegistry};
//!
//! let program = pdl::parse("logic { emit(rect(point(0, 0, 0), 1, 1)); }").unwrap();
//! let registry = MethodRegistry::new();
//! assert!(pdl::check(&program, &registry, &ParamSet::new()).is_empty());
//! let result = pdl::evaluate(&program, &ParamSet::new(), &registry, 0).unwrap();
//! assert_eq!(result.shapes.len(), 1);
//! ```

pub mod ast;
pub mod builtins;
mod check;
mod diag;
mod eval;
mod format;
pub mod lexer;
mod parser;
mod registry;

pub use ast::Program;
pub use check::{check, param_type};
pub use diag::{codes, has_errors, Diagnostic, Severity, Span};
pub use eval::{
    evaluate, evaluate_in, EvalResult, EvalStats, Value, MAX_CALL_DEPTH, MAX_EMITS,
    MAX_LOOP_ITERATIONS,
};
pub use format::{format, format_method};
pub use parser::{parse, parse_method};
pub use registry::{method_key, MethodRegistry, RegisteredMethod, RegistryKey};

use crate::params::{ParamError, ParamSet, ParamSpec, ParamValue};
use ast::{Literal, MethodDef};

/// Registers `methods` into `registry`; see [`MethodRegistry::register_methods`].
pub fn register_methods(
    methods: &[MethodDef],
    registry: &mut MethodRegistry,
) -> Result<Vec<RegistryKey>, Vec<Diagnostic>> {
    registry.register_methods(methods)
}

impl ParamSet {
    /// Parameter set declared by a program's `param` lines, with defaults applied.
    pub fn from_program(program: &Program) -> Result<ParamSet, ParamError> {
        let mut set = ParamSet::new();
        for d in &program.params {
            let mut spec = ParamSpec::new(d.name.name.clone(), d.kind.clone());
            if let Some((lo, hi)) = d.range {
                spec = spec.with_range(lo, hi);
            }
            if let Some(lit) = &d.default {
                spec = spec.with_default(match lit {
                    Literal::Number { value, .. } => ParamValue::Number(*value),
                    Literal::Bool(b) => ParamValue::Bool(*b),
                    Literal::Str(s) => ParamValue::Text(s.clone()),
                });
            }
            set.declare(spec)?;
        }
        Ok(set)
    }
}
