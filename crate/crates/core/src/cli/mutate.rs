//! Seeded single-site mutations of PDL sources, used to build the fault-injection corpus.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::agents::CaOutput;
use crate::pdl::lexer::{lex, Tok, Token};
use crate::pdl::{self, builtins, Diagnostic, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MutationOp {
    /// Misspell one use of a variable or parameter.
    RenameIdent,
    /// Drop the last argument of one call (or add one to an empty call).
    BreakArity,
    /// Remove one `param` declaration.
    DropParam,
    /// Delete one closing or separating token.
    CorruptToken,
}

impl MutationOp {
    pub const ALL: [MutationOp; 4] = [
        MutationOp::RenameIdent,
        MutationOp::BreakArity,
        MutationOp::DropParam,
        MutationOp::CorruptToken,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationOp::RenameIdent => "rename_ident",
            MutationOp::BreakArity => "break_arity",
            MutationOp::DropParam => "drop_param",
            MutationOp::CorruptToken => "corrupt_token",
        }
    }

    /// Whether every mutant of this operator must be rejected before evaluation.
    pub fn is_static_fault(self) -> bool {
        true
    }
}

/// Which source of a candidate a mutation touched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", content = "index", rename_all = "snake_case")]
pub enum Target {
    Program,
    Method(usize),
    Logic,
}

/// What was changed and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub op: MutationOp,
    pub seed: u64,
    pub target: Target,
    pub span: Span,
    pub original: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MutateError {
    #[error("input does not parse: {}", .0.first().map(|d| d.message.as_str()).unwrap_or("unknown error"))]
    Unparsable(Vec<Diagnostic>),
    #[error("no applicable site for {}", .0.name())]
    NoApplicableSite(MutationOp),
}

struct Edit {
    start: usize,
    end: usize,
    replacement: String,
    span: Span,
}

fn tok_at(tokens: &[Token], i: usize) -> Option<&Tok> {
    tokens.get(i).map(|t| &t.tok)
}

fn is_type_position(tokens: &[Token], i: usize) -> bool {
    match i.checked_sub(1).and_then(|j| tok_at(tokens, j)) {
        Some(Tok::Colon | Tok::Arrow) => true,
        Some(Tok::LBracket) => matches!(i.checked_sub(2).and_then(|j| tok_at(tokens, j)), Some(Tok::Colon | Tok::Arrow)),
        _ => false,
    }
}

fn fresh_name(name: &str, taken: &[&str]) -> String {
    let mut chars: Vec<char> = name.chars().collect();
    let n = chars.len();
    if n >= 2 {
        chars.swap(n - 1, n - 2);
    }
    let mut out: String = chars.into_iter().collect();
    let lexes_as_ident = |s: &str| matches!(lex(s).as_deref(), Ok([Token { tok: Tok::Ident(_), .. }, ..]));
    while out == name || taken.contains(&out.as_str()) || builtins::is_builtin(&out) || !lexes_as_ident(&out) {
        out.push('x');
    }
    out
}

fn matching_close(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t.tok {
            Tok::LParen | Tok::LBracket | Tok::LBrace => depth += 1,
            Tok::RParen | Tok::RBracket | Tok::RBrace => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn sites(src: &str, op: MutationOp) -> Vec<Edit> {
    let Ok(tokens) = lex(src) else { return Vec::new() };
    let taken: Vec<&str> = tokens
        .iter()
        .filter_map(|t| match &t.tok {
            Tok::Ident(n) => Some(n.as_str()),
            _ => None,
        })
        .collect();
    let edit = |t: &Token, replacement: String| Edit {
        start: t.span.start,
        end: t.span.end(),
        replacement,
        span: t.span,
    };
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        match (op, &t.tok) {
            (MutationOp::RenameIdent, Tok::Ident(name)) => {
                let prev = i.checked_sub(1).and_then(|j| tok_at(&tokens, j));
                let declares = matches!(prev, Some(Tok::Let | Tok::For | Tok::Param | Tok::Method));
                let next = tok_at(&tokens, i + 1);
                if !declares && !is_type_position(&tokens, i) && !matches!(next, Some(Tok::Colon | Tok::LParen)) {
                    out.push(edit(t, fresh_name(name, &taken)));
                }
            }
            (MutationOp::BreakArity, Tok::Ident(name)) if name != "loft" => {
                if tok_at(&tokens, i + 1) != Some(&Tok::LParen) || is_type_position(&tokens, i) {
                    continue;
                }
                let Some(close) = matching_close(&tokens, i + 1) else { continue };
                let open_end = tokens[i + 1].span.end();
                let close_start = tokens[close].span.start;
                // Top-level commas inside the call.
                let mut depth = 0;
                let mut last_comma = None;
                for (j, a) in tokens.iter().enumerate().take(close).skip(i + 2) {
                    match a.tok {
                        Tok::LParen | Tok::LBracket | Tok::LBrace => depth += 1,
                        Tok::RParen | Tok::RBracket | Tok::RBrace => depth -= 1,
                        Tok::Comma if depth == 0 => last_comma = Some(j),
                        _ => {}
                    }
                }
                let args = &src[open_end..close_start];
                let new_args = if args.trim().is_empty() {
                    "0".to_string()
                } else if let Some(c) = last_comma {
                    src[open_end..tokens[c].span.start].to_string()
                } else {
                    String::new()
                };
                out.push(Edit {
                    start: open_end,
                    end: close_start,
                    replacement: new_args,
                    span: t.span.to(tokens[close].span),
                });
            }
            (MutationOp::DropParam, Tok::Param) => {
                let end = tokens[i + 1..]
                    .iter()
                    .find(|n| matches!(n.tok, Tok::Param | Tok::Method | Tok::Logic | Tok::Eof))
                    .map(|n| n.span.start)
                    .unwrap_or(src.len());
                let last = tokens[i..].iter().take_while(|n| n.span.start < end).last().unwrap_or(t);
                out.push(Edit {
                    start: t.span.start,
                    end,
                    replacement: String::new(),
                    span: t.span.to(last.span),
                });
            }
            (MutationOp::CorruptToken, Tok::Semi | Tok::RParen | Tok::RBrace | Tok::RBracket | Tok::Comma) => {
                out.push(edit(t, String::new()));
            }
            _ => {}
        }
    }
    out
}

fn apply(src: &str, e: &Edit) -> String {
    format!("{}{}{}", &src[..e.start], e.replacement, &src[e.end..])
}

fn pick<'a>(edits: &'a [(usize, Edit)], seed: u64) -> Option<&'a (usize, Edit)> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    edits.choose(&mut rng)
}

/// Applies exactly one `op` mutation to a whole program, chosen by `seed`.
pub fn mutate_program(src: &str, op: MutationOp, seed: u64) -> Result<(String, Mutation), MutateError> {
    pdl::parse(src).map_err(MutateError::Unparsable)?;
    let edits: Vec<(usize, Edit)> = sites(src, op).into_iter().map(|e| (0, e)).collect();
    let (_, e) = pick(&edits, seed).ok_or(MutateError::NoApplicableSite(op))?;
    Ok((
        apply(src, e),
        Mutation {
            op,
            seed,
            target: Target::Program,
            span: e.span,
            original: src[e.start..e.end].to_string(),
            replacement: e.replacement.clone(),
        },
    ))
}

/// Applies exactly one `op` mutation somewhere in a coder output: one of its method
/// sources or its logic.
pub fn mutate_candidate(candidate: &CaOutput, op: MutationOp, seed: u64) -> Result<(CaOutput, Mutation), MutateError> {
    let mut sources: Vec<(Target, &str)> = Vec::new();
    for (i, m) in candidate.method_new.iter().enumerate() {
        pdl::parse_method(m).map_err(MutateError::Unparsable)?;
        sources.push((Target::Method(i), m));
    }
    pdl::parse(&candidate.logic).map_err(MutateError::Unparsable)?;
    sources.push((Target::Logic, &candidate.logic));

    let edits: Vec<(usize, Edit)> = sources
        .iter()
        .enumerate()
        .flat_map(|(k, (_, src))| sites(src, op).into_iter().map(move |e| (k, e)))
        .collect();
    let (k, e) = pick(&edits, seed).ok_or(MutateError::NoApplicableSite(op))?;
    let (target, src) = &sources[*k];
    let mutated = apply(src, e);
    let mut out = candidate.clone();
    match target {
        Target::Method(i) => out.method_new[*i] = mutated,
        _ => out.logic = mutated,
    }
    Ok((
        out,
        Mutation {
            op,
            seed,
            target: target.clone(),
            span: e.span,
            original: src[e.start..e.end].to_string(),
            replacement: e.replacement.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamSet;
    use crate::pdl::MethodRegistry;

    const SQUARES: &str = "logic {\n  let first = closed_polyline([point(0, 0, 0), point(1, 0, 0), point(1, 1, 0), point(0, 1, 0)]);\n  emit(first);\n  emit(translate(first, 2, 0, 0));\n}\n";

    #[test]
    fn rename_ident_is_an_unknown_identifier_at_the_span() {
        for seed in 0..10 {
            let (out, m) = mutate_program(SQUARES, MutationOp::RenameIdent, seed).unwrap();
            assert_eq!(m.original, "first");
            let diags = pdl::check(&pdl::parse(&out).unwrap(), &MethodRegistry::new(), &ParamSet::new());
            assert_eq!(diags.len(), 1, "{out}");
            assert_eq!(diags[0].code, "E_UNKNOWN_IDENT");
            assert_eq!((diags[0].span.line, diags[0].span.col), (m.span.line, m.span.col));
        }
    }

    #[test]
    fn same_seed_same_mutant() {
        let a = mutate_program(SQUARES, MutationOp::CorruptToken, 42).unwrap();
        let b = mutate_program(SQUARES, MutationOp::CorruptToken, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drop_param_needs_a_param() {
        assert_eq!(
            mutate_program(SQUARES, MutationOp::DropParam, 1).unwrap_err(),
            MutateError::NoApplicableSite(MutationOp::DropParam)
        );
        let src = "param N: integer = 2 in [1, 4]\nparam W: number = 1\nlogic { for i in 0..N { emit(rect(point(i, 0, 0), W, W)); } }";
        let (out, m) = mutate_program(src, MutationOp::DropParam, 3).unwrap();
        assert!(m.original.starts_with("param "));
        assert_eq!(pdl::parse(&out).unwrap().params.len(), 1);
    }

    #[test]
    fn break_arity_changes_argument_count() {
        let (out, m) = mutate_program("logic { emit(rect(point(0, 0, 0), 1, 1)); }", MutationOp::BreakArity, 0).unwrap();
        let diags = pdl::check(&pdl::parse(&out).unwrap(), &MethodRegistry::new(), &ParamSet::new());
        assert!(diags.iter().any(|d| d.code == "E_ARITY"), "{out} {m:?}");
    }

    #[test]
    fn unparsable_input_is_refused() {
        assert!(matches!(
            mutate_program("logic {", MutationOp::CorruptToken, 0),
            Err(MutateError::Unparsable(_))
        ));
    }
}
