use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::params::{ParamSpec, ParamUpdate};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum ProtocolError {
    #[error("response contains no JSON object")]
    NoJson,
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}` must be {expected}")]
    BadType { field: String, expected: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaType {
    Question,
    Update,
    Final,
}

/// A reasoner reply: exactly `type`, `text` and `parameters`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaResponse {
    #[serde(rename = "type")]
    pub kind: RaType,
    pub text: String,
    pub parameters: Vec<ParamSpec>,
}

/// The coding agent's envelope. Field names are part of the wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaOutput {
    #[serde(rename = "Name")]
    pub name: String,
    #[serde(rename = "Description")]
    pub description: String,
    #[serde(rename = "Dependency")]
    pub dependency: Vec<String>,
    #[serde(rename = "Method_New")]
    pub method_new: Vec<String>,
    /// Param declarations followed by the logic block.
    #[serde(rename = "Logic")]
    pub logic: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Reasoner,
    System,
}

/// One entry of a session transcript. `at` is the session's logical clock, so
/// transcripts of scripted sessions are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    pub at: u64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

/// Wraps a designer message as `<text>…</text><updates>…</updates>`. Updates are a JSON
/// array; no updates gives an empty element.
pub fn wrap_user_input(text: &str, updates: &[ParamUpdate]) -> String {
    let updates = if updates.is_empty() {
        String::new()
    } else {
        escape(&serde_json::to_string(updates).expect("updates serialize"))
    };
    format!("<text>{}</text><updates>{updates}</updates>", escape(text))
}

/// Inverse of [`wrap_user_input`].
pub fn unwrap_user_input(message: &str) -> Result<(String, Vec<ParamUpdate>), ProtocolError> {
    let inner = |tag: &str, from: &str| -> Result<(String, usize), ProtocolError> {
        let open = format!("<{tag}>");
        let close = format!("</{tag}>");
        let start = from
            .find(&open)
            .ok_or_else(|| ProtocolError::MissingField(tag.into()))?
            + open.len();
        let end = from[start..]
            .find(&close)
            .ok_or_else(|| ProtocolError::Malformed(format!("unclosed <{tag}>")))?
            + start;
        Ok((from[start..end].to_string(), end + close.len()))
    };
    let (text, used) = inner("text", message)?;
    let (updates, _) = inner("updates", &message[used..])?;
    let updates = if updates.is_empty() {
        Vec::new()
    } else {
        serde_json::from_str(&unescape(&updates)).map_err(|e| ProtocolError::Malformed(e.to_string()))?
    };
    Ok((unescape(&text), updates))
}

/// Finds the single JSON object in an agent reply: either the whole trimmed text or the
/// body of exactly one fenced code block.
pub fn extract_json(raw: &str) -> Result<Map<String, Value>, ProtocolError> {
    let trimmed = raw.trim();
    let body = if trimmed.starts_with('{') {
        trimmed.to_string()
    } else {
        let fences: Vec<usize> = trimmed.match_indices("```").map(|(i, _)| i).collect();
        match fences.len() {
            0 => return Err(ProtocolError::NoJson),
            2 => {
                let block = &trimmed[fences[0] + 3..fences[1]];
                // Drop an info string such as `json` on the opening fence line.
                let block = match block.find('\n') {
                    Some(nl) if !block[..nl].trim_start().starts_with('{') => &block[nl + 1..],
                    _ => block,
                };
                block.trim().to_string()
            }
            n if n % 2 == 1 => return Err(ProtocolError::Malformed("unclosed code fence".into())),
            _ => return Err(ProtocolError::Malformed("more than one code block".into())),
        }
    };
    if !body.starts_with('{') {
        return Err(ProtocolError::NoJson);
    }
    match serde_json::from_str::<Value>(&body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ProtocolError::NoJson),
        Err(e) => Err(ProtocolError::Malformed(e.to_string())),
    }
}

fn require_fields(obj: &Map<String, Value>, fields: &[&str]) -> Result<(), ProtocolError> {
    if let Some(extra) = obj.keys().find(|k| !fields.contains(&k.as_str())) {
        return Err(ProtocolError::UnknownField(extra.clone()));
    }
    if let Some(missing) = fields.iter().find(|f| !obj.contains_key(**f)) {
        return Err(ProtocolError::MissingField(missing.to_string()));
    }
    Ok(())
}

fn bad_type(field: &str, expected: &str) -> ProtocolError {
    ProtocolError::BadType {
        field: field.into(),
        expected: expected.into(),
    }
}

fn string_field(obj: &Map<String, Value>, field: &str) -> Result<String, ProtocolError> {
    obj[field]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| bad_type(field, "a string"))
}

fn string_list(obj: &Map<String, Value>, field: &str) -> Result<Vec<String>, ProtocolError> {
    obj[field]
        .as_array()
        .and_then(|items| items.iter().map(|v| v.as_str().map(str::to_string)).collect())
        .ok_or_else(|| bad_type(field, "a list of strings"))
}

/// Strict parse of a reasoner reply.
pub fn parse_ra_response(raw: &str) -> Result<RaResponse, ProtocolError> {
    let obj = extract_json(raw)?;
    require_fields(&obj, &["type", "text", "parameters"])?;
    let kind = match obj["type"].as_str() {
        Some("question") => RaType::Question,
        Some("update") => RaType::Update,
        Some("final") => RaType::Final,
        _ => return Err(bad_type("type", "one of \"question\", \"update\", \"final\"")),
    };
    let text = string_field(&obj, "text")?;
    let items = obj["parameters"]
        .as_array()
        .ok_or_else(|| bad_type("parameters", "a list"))?;
    let mut parameters = Vec::with_capacity(items.len());
    for item in items {
        let spec: ParamSpec = serde_json::from_value(item.clone())
            .map_err(|e| ProtocolError::InvalidParameter(e.to_string()))?;
        spec.validate()
            .map_err(|e| ProtocolError::InvalidParameter(e.to_string()))?;
        parameters.push(spec);
    }
    Ok(RaResponse {
        kind,
        text,
        parameters,
    })
}

/// Strict parse of the coding agent's envelope. Payload sources are not parsed here.
pub fn parse_ca_output(raw: &str) -> Result<CaOutput, ProtocolError> {
    let obj = extract_json(raw)?;
    require_fields(&obj, &["Name", "Description", "Dependency", "Method_New", "Logic"])?;
    Ok(CaOutput {
        name: string_field(&obj, "Name")?,
        description: string_field(&obj, "Description")?,
        dependency: string_list(&obj, "Dependency")?,
        method_new: string_list(&obj, "Method_New")?,
        logic: string_field(&obj, "Logic")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamKind;

    #[test]
    fn wrap_examples() {
        assert_eq!(
            wrap_user_input("make it taller", &[]),
            "<text>make it taller</text><updates></updates>"
        );
        let w = wrap_user_input("", &[ParamUpdate::number("OvalCount", 5.0)]);
        assert_eq!(w, "<text></text><updates>[{\"name\":\"OvalCount\",\"value\":5.0}]</updates>");
        let (text, updates) = unwrap_user_input(&w).unwrap();
        assert_eq!(text, "");
        assert_eq!(updates.len(), 1);
    }

    #[test]
    fn angle_brackets_are_escaped() {
        let msg = "height < 10 & width > 2 </text> <updates>";
        let w = wrap_user_input(msg, &[]);
        assert_eq!(w.matches("<text>").count(), 1);
        assert_eq!(unwrap_user_input(&w).unwrap(), (msg.to_string(), vec![]));
    }

    #[test]
    fn ra_question_parses() {
        let r = parse_ra_response(
            r#"{"type":"question","text":"How many floors?","parameters":[{"name":"Floors","kind":"integer","range":[1,80]}]}"#,
        )
        .unwrap();
        assert_eq!(r.kind, RaType::Question);
        assert_eq!(r.parameters[0].kind, ParamKind::Integer);
    }

    #[test]
    fn fenced_json_is_accepted() {
        let raw = "Here you go:\n```json\n{\"type\":\"final\",\"text\":\"done\",\"parameters\":[]}\n```\n";
        assert_eq!(parse_ra_response(raw).unwrap().kind, RaType::Final);
    }

    #[test]
    fn strictness() {
        assert_eq!(parse_ra_response("Sure! How tall?"), Err(ProtocolError::NoJson));
        assert_eq!(
            parse_ra_response(r#"{"type":"question","text":"x","parameters":[],"mood":"happy"}"#),
            Err(ProtocolError::UnknownField("mood".into()))
        );
        assert_eq!(
            parse_ra_response(r#"{"type":"question","text":"x"}"#),
            Err(ProtocolError::MissingField("parameters".into()))
        );
        assert!(matches!(
            parse_ra_response(r#"{"type":"answer","text":"x","parameters":[]}"#),
            Err(ProtocolError::BadType { .. })
        ));
        assert!(matches!(
            parse_ra_response(r#"{"type":"update","text":"x","parameters":[{"name":"A","kind":"integer","range":[5,1]}]}"#),
            Err(ProtocolError::InvalidParameter(_))
        ));
        assert!(matches!(
            parse_ra_response("```\n{}\n```\n```\n{}\n```"),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn ca_output_envelope() {
        let raw = r#"{"Name":"Ovals","Description":"rings","Dependency":["ring"],"Method_New":["method ring(c: point, r: number) -> shape { return ellipse(c, r, r); }"],"Logic":"logic { }"}"#;
        let ca = parse_ca_output(raw).unwrap();
        assert_eq!(ca.dependency, vec!["ring"]);
        assert_eq!(serde_json::from_str::<CaOutput>(&serde_json::to_string(&ca).unwrap()).unwrap(), ca);
        let missing = r#"{"Name":"Ovals","Description":"rings","Dependency":[],"Method_New":[]}"#;
        assert_eq!(parse_ca_output(missing), Err(ProtocolError::MissingField("Logic".into())));
    }
}
