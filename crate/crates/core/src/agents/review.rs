use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{send_with_timeout, ChatMessage, LlmBackend, LlmRequest, Role};
use super::prompt::{render_prompt, FinalVariant, PromptContext, PromptTemplate};
use super::protocol::{parse_ca_output, CaOutput};
use super::AgentKind;
use crate::params::ParamSet;
use crate::pdl::{self, ast::MethodDef, codes, Diagnostic, MethodRegistry, Program, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OaStatus {
    Approved,
    Revised,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OaVerdict {
    pub status: OaStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_output: Option<CaOutput>,
    pub diagnostics: Vec<Diagnostic>,
    /// Number of revision requests sent to the backend.
    pub rounds: u32,
}

impl OaVerdict {
    /// The candidate that should go on to compilation, if any.
    pub fn accepted<'a>(&'a self, original: &'a CaOutput) -> Option<&'a CaOutput> {
        match self.status {
            OaStatus::Approved => Some(original),
            OaStatus::Revised => self.revised_output.as_ref(),
            OaStatus::Rejected => None,
        }
    }
}

/// A candidate parsed into methods and a logic program.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCandidate {
    pub methods: Vec<MethodDef>,
    pub program: Program,
}

fn located(mut d: Diagnostic, place: &str) -> Diagnostic {
    d.message = format!("{} (in {place})", d.message);
    d
}

/// Parses every payload of `candidate`. Diagnostics from method sources say which
/// Method_New entry they came from.
pub fn parse_candidate(candidate: &CaOutput) -> Result<ParsedCandidate, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut methods = Vec::new();
    for (i, src) in candidate.method_new.iter().enumerate() {
        match pdl::parse_method(src) {
            Ok(m) => methods.push(m),
            Err(ds) => diags.extend(ds.into_iter().map(|d| located(d, &format!("Method_New[{i}]")))),
        }
    }
    let program = match pdl::parse(&candidate.logic) {
        Ok(p) => Some(p),
        Err(ds) => {
            diags.extend(ds.into_iter().map(|d| located(d, "Logic")));
            None
        }
    };
    if let Some(p) = &program {
        if let Some(m) = p.methods.first() {
            diags.push(Diagnostic::error(
                codes::SYNTAX,
                format!("method `{}` must be listed in Method_New, not in Logic", m.name.name),
                m.name.span,
            ));
        }
    }
    match program {
        Some(program) if diags.is_empty() => Ok(ParsedCandidate { methods, program }),
        _ => Err(diags),
    }
}

/// The static analysis the reviewer runs: parse, register methods into a scratch copy of
/// `registry`, check dependencies, then check the logic. Only errors are returned.
pub fn static_check(candidate: &CaOutput, registry: &MethodRegistry, params: &ParamSet) -> Vec<Diagnostic> {
    let parsed = match parse_candidate(candidate) {
        Ok(p) => p,
        Err(diags) => return diags,
    };
    let mut scratch = registry.clone();
    if let Err(diags) = scratch.register_methods(&parsed.methods) {
        return diags
            .into_iter()
            .filter(Diagnostic::is_error)
            .map(|d| located(d, "Method_New"))
            .collect();
    }
    let mut diags: Vec<Diagnostic> = candidate
        .dependency
        .iter()
        .filter(|name| scratch.get(name).is_none())
        .map(|name| {
            Diagnostic::error(
                codes::UNKNOWN_DEPENDENCY,
                format!("dependency `{name}` is neither in Method_New nor registered"),
                Span::default(),
            )
        })
        .collect();
    diags.extend(
        pdl::check(&parsed.program, &scratch, params)
            .into_iter()
            .filter(Diagnostic::is_error)
            .map(|d| located(d, "Logic")),
    );
    diags
}

/// Message sent to the reviewer: the diagnostics and the candidate envelope.
pub fn review_message(candidate: &CaOutput, diagnostics: &[Diagnostic]) -> String {
    let lines: Vec<String> = diagnostics.iter().map(|d| format!("- {d}")).collect();
    format!(
        "<diagnostics>\n{}\n</diagnostics>\n<candidate>\n{}\n</candidate>",
        lines.join("\n"),
        serde_json::to_string_pretty(candidate).expect("candidate serializes")
    )
}

#[derive(Debug, Clone)]
pub struct ReviewConfig {
    pub max_rounds: u32,
    pub timeout: Duration,
    pub template: PromptTemplate,
}

impl Default for ReviewConfig {
    fn default() -> Self {
        ReviewConfig {
            max_rounds: 2,
            timeout: Duration::from_secs(120),
            template: PromptTemplate::builtin(AgentKind::Optimizer),
        }
    }
}

/// Reviews `candidate`: a clean candidate is approved without calling the backend;
/// otherwise the backend is asked for a revision up to `max_rounds` times.
pub async fn run_oa_review(
    candidate: &CaOutput,
    registry: &MethodRegistry,
    params: &ParamSet,
    backend: &dyn LlmBackend,
    config: &ReviewConfig,
) -> OaVerdict {
    assert!(config.max_rounds >= 1, "max_rounds must be positive");
    let mut diagnostics = static_check(candidate, registry, params);
    if diagnostics.is_empty() {
        return OaVerdict {
            status: OaStatus::Approved,
            revised_output: None,
            diagnostics,
            rounds: 0,
        };
    }
    let system = render_prompt(
        &config.template,
        &PromptContext {
            params,
            registry,
            final_variant: FinalVariant::Strict,
        },
    );
    let system = match system {
        Ok(s) => s,
        Err(e) => {
            diagnostics.push(Diagnostic::error(codes::PROTOCOL, e.to_string(), Span::default()));
            return OaVerdict {
                status: OaStatus::Rejected,
                revised_output: None,
                diagnostics,
                rounds: 0,
            };
        }
    };
    let mut current = candidate.clone();
    let mut rounds = 0;
    while rounds < config.max_rounds {
        rounds += 1;
        let request = LlmRequest {
            agent: AgentKind::Optimizer,
            system: system.clone(),
            messages: vec![ChatMessage::new(Role::User, review_message(&current, &diagnostics))],
        };
        let raw = match send_with_timeout(backend, &request, config.timeout).await {
            Ok(raw) => raw,
            Err(e) => {
                diagnostics.push(Diagnostic::error(codes::TRANSPORT, e.to_string(), Span::default()));
                break;
            }
        };
        match parse_ca_output(&raw) {
            Ok(revised) => {
                current = revised;
                diagnostics = static_check(&current, registry, params);
                if diagnostics.is_empty() {
                    return OaVerdict {
                        status: OaStatus::Revised,
                        revised_output: Some(current),
                        diagnostics,
                        rounds,
                    };
                }
            }
            Err(e) => {
                diagnostics.retain(|d| d.code != codes::PROTOCOL);
                diagnostics.push(Diagnostic::error(
                    codes::PROTOCOL,
                    format!("reviewer reply rejected: {e}"),
                    Span::default(),
                ));
            }
        }
    }
    OaVerdict {
        status: OaStatus::Rejected,
        revised_output: None,
        diagnostics,
        rounds,
    }
}

#[cfg(test)]
mod tests {
    use super::super::backend::{ScriptedBackend, ScriptedStep};
    use super::*;

    fn ca(logic: &str) -> CaOutput {
        CaOutput {
            name: "Squares".into(),
            description: "two squares".into(),
            dependency: vec![],
            method_new: vec![],
            logic: logic.into(),
        }
    }

    const GOOD: &str = "logic { let first = rect(point(0, 0, 0), 1, 1); emit(first); emit(translate(first, 2, 0, 0)); }";
    const BAD: &str = "logic { let first = rect(point(0, 0, 0), 1, 1); emit(frist); emit(translate(first, 2, 0, 0)); }";

    fn scripted(responses: &[&str]) -> ScriptedBackend {
        ScriptedBackend::new(
            responses
                .iter()
                .map(|r| ScriptedStep {
                    agent: Some(AgentKind::Optimizer),
                    pattern: "E_UNKNOWN_IDENT".into(),
                    response: r.to_string(),
                    error: None,
                })
                .collect(),
        )
    }

    #[tokio::test]
    async fn clean_candidate_is_approved_without_calls() {
        let backend = scripted(&[]);
        let v = run_oa_review(&ca(GOOD), &MethodRegistry::new(), &ParamSet::new(), &backend, &ReviewConfig::default()).await;
        assert_eq!(v.status, OaStatus::Approved);
        assert_eq!(backend.consumed(), 0);
    }

    #[tokio::test]
    async fn misnamed_identifier_is_repaired() {
        let fixed = serde_json::to_string(&ca(GOOD)).unwrap();
        let backend = scripted(&[&fixed]);
        let v = run_oa_review(&ca(BAD), &MethodRegistry::new(), &ParamSet::new(), &backend, &ReviewConfig::default()).await;
        assert_eq!(v.status, OaStatus::Revised);
        assert_eq!(v.rounds, 1);
        assert_eq!(v.revised_output.unwrap().logic, GOOD);
    }

    #[tokio::test]
    async fn persistent_fault_is_rejected() {
        let same = serde_json::to_string(&ca(BAD)).unwrap();
        let backend = scripted(&[&same]);
        let config = ReviewConfig {
            max_rounds: 1,
            ..ReviewConfig::default()
        };
        let v = run_oa_review(&ca(BAD), &MethodRegistry::new(), &ParamSet::new(), &backend, &config).await;
        assert_eq!(v.status, OaStatus::Rejected);
        assert!(v.diagnostics.iter().any(|d| d.code == codes::UNKNOWN_IDENT));
    }

    #[tokio::test]
    async fn unknown_dependency_is_flagged() {
        let mut c = ca(GOOD);
        c.dependency = vec!["ring".into()];
        let d = static_check(&c, &MethodRegistry::new(), &ParamSet::new());
        assert_eq!(d[0].code, codes::UNKNOWN_DEPENDENCY);
    }
}
