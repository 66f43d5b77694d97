use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::params::{ParamKind, ParamSet, ParamSpec, ParamValue};
use crate::pdl::builtins::{self, Params};
use crate::pdl::{param_type, MethodRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Reasoner,
    Coder,
    Optimizer,
}

impl AgentKind {
    /// Section tags of this agent's prompt, in render order.
    pub fn sections(self) -> &'static [&'static str] {
        match self {
            AgentKind::Reasoner => &["role", "approach", "parameters", "user", "response", "final"],
            AgentKind::Coder => &["role", "language", "parameters", "methods", "response"],
            AgentKind::Optimizer => &["role", "methods", "review", "response"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Reasoner => "reasoner",
            AgentKind::Coder => "coder",
            AgentKind::Optimizer => "optimizer",
        }
    }
}

/// Which wording the reasoner's `<final>` section uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalVariant {
    #[default]
    Strict,
    Flexible,
}

impl FinalVariant {
    pub fn text(self) -> &'static str {
        match self {
            FinalVariant::Strict => include_str!("../../assets/prompts/final_strict.txt"),
            FinalVariant::Flexible => include_str!("../../assets/prompts/final_flexible.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("template is missing the <{0}> section")]
    MissingSection(String),
    #[error("template has an unexpected <{0}> section")]
    UnknownSection(String),
    #[error("malformed template: {0}")]
    Malformed(String),
    #[error("cannot read template: {0}")]
    Io(String),
}

/// A prompt as tagged sections. Section bodies may contain `{{placeholders}}` that
/// [`render_prompt`] fills from the session.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub agent: AgentKind,
    pub sections: Vec<(String, String)>,
}

impl PromptTemplate {
    /// Splits `text` into `<tag>body</tag>` sections. Text between sections is ignored.
    pub fn parse(agent: AgentKind, text: &str) -> Result<Self, PromptError> {
        let mut sections = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('<') {
            let after = &rest[open + 1..];
            let close = after
                .find('>')
                .ok_or_else(|| PromptError::Malformed("unterminated tag".into()))?;
            let tag = &after[..close];
            if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                return Err(PromptError::Malformed(format!("bad tag <{tag}>")));
            }
            let body_start = &after[close + 1..];
            let end_tag = format!("</{tag}>");
            let end = body_start
                .find(&end_tag)
                .ok_or_else(|| PromptError::Malformed(format!("<{tag}> is never closed")))?;
            sections.push((tag.to_string(), body_start[..end].trim().to_string()));
            rest = &body_start[end + end_tag.len()..];
        }
        Ok(PromptTemplate { agent, sections })
    }

    /// The template shipped with the crate.
    pub fn builtin(agent: AgentKind) -> Self {
        let text = match agent {
            AgentKind::Reasoner => include_str!("../../assets/prompts/reasoner.txt"),
            AgentKind::Coder => include_str!("../../assets/prompts/coder.txt"),
            AgentKind::Optimizer => include_str!("../../assets/prompts/optimizer.txt"),
        };
        Self::parse(agent, text).expect("shipped templates are well formed")
    }

    /// Loads `<dir>/<agent>.txt`, so prompts can be edited without rebuilding.
    pub fn load(dir: &Path, agent: AgentKind) -> Result<Self, PromptError> {
        let path = dir.join(format!("{}.txt", agent.name()));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PromptError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(agent, &text)
    }

    pub fn section(&self, tag: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, b)| b.as_str())
    }
}

/// Session state a prompt can mention.
#[derive(Debug, Clone, Copy)]
pub struct PromptContext<'a> {
    pub params: &'a ParamSet,
    pub registry: &'a MethodRegistry,
    pub final_variant: FinalVariant,
}

/// One JSON example per parameter kind, one line each.
pub fn parameter_kinds() -> String {
    ParamKind::taxonomy()
        .into_iter()
        .map(|kind| {
            let example = match &kind {
                ParamKind::Number => ParamSpec::new("Height", kind.clone())
                    .with_range(1.0, 50.0)
                    .with_default(ParamValue::Number(12.5)),
                ParamKind::Integer => ParamSpec::new("Count", kind.clone())
                    .with_range(1.0, 20.0)
                    .with_default(ParamValue::Number(3.0)),
                ParamKind::Boolean => {
                    ParamSpec::new("Mirrored", kind.clone()).with_default(ParamValue::Bool(false))
                }
                ParamKind::Choice(_) => ParamSpec::new(
                    "Style",
                    ParamKind::Choice(vec!["flat".into(), "tapered".into()]),
                )
                .with_default(ParamValue::Text("flat".into())),
                ParamKind::PointRef => ParamSpec::new("BaseCenter", kind.clone()),
                ParamKind::CurveRef => ParamSpec::new("Outline", kind.clone()),
                ParamKind::ShapeRef => ParamSpec::new("Site", kind.clone()),
            };
            let mut json = serde_json::to_value(&example).expect("spec serializes");
            if let Some(obj) = json.as_object_mut() {
                obj.retain(|k, v| !v.is_null() && k != "status");
            }
            format!("- {} (logic type {}): {json}", kind.name(), param_type(&kind))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn session_parameters(params: &ParamSet) -> String {
    if params.is_empty() {
        return "(none yet)".into();
    }
    params
        .specs()
        .iter()
        .map(|s| format!("- {}", serde_json::to_string(s).expect("spec serializes")))
        .collect::<Vec<_>>()
        .join("\n")
}

fn registered_methods(registry: &MethodRegistry) -> String {
    if registry.is_empty() {
        return "(none)".into();
    }
    registry
        .iter()
        .map(|m| {
            let args: Vec<String> = m
                .def
                .params
                .iter()
                .map(|(n, t)| format!("{}: {t}", n.name))
                .collect();
            format!("- {}({}) -> {}", m.def.name.name, args.join(", "), m.def.ret)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn builtin_list() -> String {
    builtins::NAMES
        .iter()
        .filter_map(|n| builtins::lookup(n))
        .map(|b| {
            let args = match &b.params {
                Params::Fixed(ts) => ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", "),
                Params::Profiles => "shape, shape, ... | [shape]".into(),
                Params::AnyList => "[T]".into(),
                Params::Append => "[T], T".into(),
            };
            let ret = b.ret.map(|t| t.to_string()).unwrap_or_else(|| "[T]".into());
            format!("- {}({args}) -> {ret}", b.name)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders every section of `template` in the agent's canonical order, each wrapped in
/// matching tags, with placeholders filled from `ctx`.
pub fn render_prompt(template: &PromptTemplate, ctx: &PromptContext<'_>) -> Result<String, PromptError> {
    let order = template.agent.sections();
    for (tag, _) in &template.sections {
        if !order.contains(&tag.as_str()) {
            return Err(PromptError::UnknownSection(tag.clone()));
        }
    }
    let mut parts = Vec::with_capacity(order.len());
    for tag in order {
        let body = template
            .section(tag)
            .filter(|b| !b.trim().is_empty())
            .ok_or_else(|| PromptError::MissingSection(tag.to_string()))?;
        let mut body = body.to_string();
        let fills: [(&str, fn(&PromptContext<'_>) -> String); 5] = [
            ("{{parameter_kinds}}", |_| parameter_kinds()),
            ("{{session_parameters}}", |c| session_parameters(c.params)),
            ("{{registered_methods}}", |c| registered_methods(c.registry)),
            ("{{builtins}}", |_| builtin_list()),
            ("{{final_variant}}", |c| c.final_variant.text().trim().to_string()),
        ];
        for (key, fill) in fills {
            if body.contains(key) {
                body = body.replace(key, &fill(ctx));
            }
        }
        parts.push(format!("<{tag}>\n{body}\n</{tag}>"));
    }
    Ok(parts.join("\n\n"))
}
