use serde::{Deserialize, Serialize};

/// Source location. `start` is a byte offset and stays internal; the wire form is
/// `{line, col, len}` with 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    #[serde(skip)]
    pub start: usize,
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(start: usize, len: usize, line: u32, col: u32) -> Self {
        Span {
            start,
            line,
            col,
            len: len as u32,
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.len as usize
    }

    /// Smallest span covering `self` and `other` (which must come later in the source).
    pub fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            line: self.line,
            col: self.col,
            len: (other.end().max(self.end()) - self.start) as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// A finding from the parser, checker, registry or interpreter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(code: &str, message: impl Into<String>, span: Span) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code: code.to_string(),
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: &str, message: impl Into<String>, span: Span) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code: code.to_string(),
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}: {} {}",
            self.span.line, self.span.col, self.code, self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Stable diagnostic codes.
pub mod codes {
    pub const SYNTAX: &str = "E_SYNTAX";
    pub const UNKNOWN_IDENT: &str = "E_UNKNOWN_IDENT";
    pub const UNREGISTERED_METHOD: &str = "E_UNREGISTERED_METHOD";
    pub const ARITY: &str = "E_ARITY";
    pub const TYPE: &str = "E_TYPE";
    pub const DUPLICATE_METHOD: &str = "E_DUPLICATE_METHOD";
    pub const DUPLICATE_PARAM: &str = "E_DUPLICATE_PARAM";
    pub const BUILTIN_SHADOW: &str = "E_BUILTIN_SHADOW";
    pub const RECURSION: &str = "E_RECURSION";
    pub const MISSING_RETURN: &str = "E_MISSING_RETURN";
    pub const RETURN_OUTSIDE_METHOD: &str = "E_RETURN_OUTSIDE_METHOD";
    pub const EMIT_IN_METHOD: &str = "E_EMIT_IN_METHOD";
    pub const IMMUTABLE: &str = "E_IMMUTABLE";
    pub const UNBOUNDED_LOOP: &str = "E_UNBOUNDED_LOOP";
    pub const INVALID_RANGE: &str = "E_INVALID_RANGE";
    pub const OUT_OF_RANGE: &str = "E_OUT_OF_RANGE";
    pub const PARAM_MISSING: &str = "E_PARAM_MISSING";
    pub const PARAM_KIND: &str = "E_PARAM_KIND";
    pub const PARAM_PENDING: &str = "E_PARAM_PENDING";
    pub const RUNTIME_DOMAIN: &str = "E_RUNTIME_DOMAIN";
    pub const RUNTIME_TYPE: &str = "E_RUNTIME_TYPE";
    pub const CAP_EXCEEDED: &str = "E_CAP_EXCEEDED";
    pub const UNRESOLVED_REF: &str = "E_UNRESOLVED_REF";
    pub const UNKNOWN_DEPENDENCY: &str = "E_UNKNOWN_DEPENDENCY";
    pub const TRANSPORT: &str = "E_TRANSPORT";
    pub const PROTOCOL: &str = "E_PROTOCOL";
    pub const UNUSED_VALUE: &str = "W_UNUSED_VALUE";
}
