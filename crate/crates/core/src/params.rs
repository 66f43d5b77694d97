//! Typed design parameters: the graphical and nongraphical inputs of a parametric program,
//! with ranges and confirmation status.

use serde::{Deserialize, Serialize};

use crate::geometry::{Shape, ShapeId, ShapeRegistry};

/// Parameter types. New kinds can be appended; the serialized names are stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Number,
    Integer,
    Boolean,
    Choice(Vec<String>),
    PointRef,
    CurveRef,
    ShapeRef,
}

impl ParamKind {
    /// One representative of every kind, in declaration order.
    pub fn taxonomy() -> Vec<ParamKind> {
        vec![
            ParamKind::Number,
            ParamKind::Integer,
            ParamKind::Boolean,
            ParamKind::Choice(vec!["a".into(), "b".into()]),
            ParamKind::PointRef,
            ParamKind::CurveRef,
            ParamKind::ShapeRef,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ParamKind::Number => "number",
            ParamKind::Integer => "integer",
            ParamKind::Boolean => "boolean",
            ParamKind::Choice(_) => "choice",
            ParamKind::PointRef => "point_ref",
            ParamKind::CurveRef => "curve_ref",
            ParamKind::ShapeRef => "shape_ref",
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(
            self,
            ParamKind::PointRef | ParamKind::CurveRef | ParamKind::ShapeRef
        )
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ParamKind::Number | ParamKind::Integer)
    }

    fn accepts_shape(&self, shape: &Shape) -> bool {
        match self {
            ParamKind::PointRef => matches!(shape, Shape::Point { .. }),
            ParamKind::CurveRef => shape.is_curve(),
            ParamKind::ShapeRef => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(n) => Some(*n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamStatus {
    #[default]
    Pending,
    Confirmed,
}

/// One declared parameter. Its JSON form is used verbatim in agent messages, the service
/// API and journals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub default: Option<ParamValue>,
    #[serde(default)]
    pub status: ParamStatus,
    #[serde(default)]
    pub value: Option<ParamValue>,
    #[serde(default, rename = "ref")]
    pub reference: Option<ShapeId>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.into(),
            kind,
            range: None,
            default: None,
            status: ParamStatus::Pending,
            value: None,
            reference: None,
        }
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.range = Some([min, max]);
        self
    }

    pub fn with_default(mut self, v: ParamValue) -> Self {
        self.default = Some(v);
        self
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == ParamStatus::Confirmed
    }

    /// Checks `value` against this spec's kind and range.
    pub fn check_value(&self, value: &ParamValue) -> Result<(), ParamError> {
        let mismatch = || ParamError::KindMismatch {
            name: self.name.clone(),
            expected: self.kind.name(),
        };
        match (&self.kind, value) {
            (ParamKind::Number, ParamValue::Number(n)) if n.is_finite() => self.check_range(*n),
            (ParamKind::Integer, ParamValue::Number(n)) if n.is_finite() => {
                if n.fract() != 0.0 {
                    return Err(mismatch());
                }
                self.check_range(*n)
            }
            (ParamKind::Boolean, ParamValue::Bool(_)) => Ok(()),
            (ParamKind::Choice(options), ParamValue::Text(t)) => {
                if options.contains(t) {
                    Ok(())
                } else {
                    Err(ParamError::NotAnOption {
                        name: self.name.clone(),
                        value: t.clone(),
                    })
                }
            }
            _ => Err(mismatch()),
        }
    }

    fn check_range(&self, n: f64) -> Result<(), ParamError> {
        match self.range {
            Some([lo, hi]) if n < lo || n > hi => Err(ParamError::OutOfRange {
                name: self.name.clone(),
                value: n,
                min: lo,
                max: hi,
            }),
            _ => Ok(()),
        }
    }

    /// Verifies every invariant of a single spec.
    pub fn validate(&self) -> Result<(), ParamError> {
        if !is_identifier(&self.name) {
            return Err(ParamError::InvalidName(self.name.clone()));
        }
        if let ParamKind::Choice(options) = &self.kind {
            let mut distinct = options.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(ParamError::InvalidChoice(self.name.clone()));
            }
        }
        if let Some([lo, hi]) = self.range {
            if !self.kind.is_numeric() || !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(ParamError::InvalidRange {
                    name: self.name.clone(),
                    min: lo,
                    max: hi,
                });
            }
        }
        if self.kind.is_reference() {
            if self.value.is_some() || self.default.is_some() {
                return Err(ParamError::KindMismatch {
                    name: self.name.clone(),
                    expected: self.kind.name(),
                });
            }
        } else if self.reference.is_some() {
            return Err(ParamError::KindMismatch {
                name: self.name.clone(),
                expected: self.kind.name(),
            });
        }
        if let Some(v) = &self.value {
            self.check_value(v)?;
        }
        if self.is_confirmed() {
            let bound = if self.kind.is_reference() {
                self.reference.is_some()
            } else {
                self.value.is_some()
            };
            if !bound {
                return Err(ParamError::ConfirmedWithoutValue(self.name.clone()));
            }
        }
        Ok(())
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSource {
    #[default]
    User,
    Agent,
}

/// A request to bind a value (or a shape reference) to a declared parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamUpdate {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ParamValue>,
    #[serde(default, rename = "ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<ShapeId>,
    #[serde(default, skip_serializing_if = "is_user")]
    pub source: UpdateSource,
}

fn is_user(s: &UpdateSource) -> bool {
    *s == UpdateSource::User
}

impl ParamUpdate {
    pub fn value(name: impl Into<String>, value: ParamValue) -> Self {
        ParamUpdate {
            name: name.into(),
            value: Some(value),
            reference: None,
            source: UpdateSource::User,
        }
    }

    pub fn number(name: impl Into<String>, n: f64) -> Self {
        Self::value(name, ParamValue::Number(n))
    }

    pub fn reference(name: impl Into<String>, id: ShapeId) -> Self {
        ParamUpdate {
            name: name.into(),
            value: None,
            reference: Some(id),
            source: UpdateSource::User,
        }
    }

    pub fn from_agent(mut self) -> Self {
        self.source = UpdateSource::Agent;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("parameter `{0}` is already declared")]
    DuplicateName(String),
    #[error("`{0}` is not a valid parameter name")]
    InvalidName(String),
    #[error("parameter `{name}` has invalid range [{min}, {max}]")]
    InvalidRange { name: String, min: f64, max: f64 },
    #[error("choice parameter `{0}` needs at least 2 distinct options")]
    InvalidChoice(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("value {value} for `{name}` is outside [{min}, {max}]")]
    OutOfRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("parameter `{name}` expects a {expected} value")]
    KindMismatch { name: String, expected: &'static str },
    #[error("`{value}` is not an option of `{name}`")]
    NotAnOption { name: String, value: String },
    #[error("parameter `{name}` references unknown shape {id}")]
    UnknownShapeId { name: String, id: ShapeId },
    #[error("parameter `{0}` is confirmed but has no value")]
    ConfirmedWithoutValue(String),
}

impl ParamError {
    /// Stable diagnostic code for wire payloads.
    pub fn code(&self) -> &'static str {
        match self {
            ParamError::DuplicateName(_) => "E_DUPLICATE_PARAM",
            ParamError::InvalidName(_) => "E_INVALID_NAME",
            ParamError::InvalidRange { .. } => "E_INVALID_RANGE",
            ParamError::InvalidChoice(_) => "E_INVALID_CHOICE",
            ParamError::UnknownParam(_) => "E_UNKNOWN_PARAM",
            ParamError::OutOfRange { .. } => "E_OUT_OF_RANGE",
            ParamError::KindMismatch { .. } | ParamError::NotAnOption { .. } => "E_KIND_MISMATCH",
            ParamError::UnknownShapeId { .. } => "E_UNKNOWN_SHAPE",
            ParamError::ConfirmedWithoutValue(_) => "E_MISSING_VALUE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completeness {
    Confirmed,
    Missing(Vec<String>),
}

/// Ordered, name-unique parameter list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet {
    specs: Vec<ParamSpec>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Appends `spec`. A valid value or default confirms it immediately; otherwise it is
    /// stored as Pending.
    pub fn declare(&mut self, mut spec: ParamSpec) -> Result<(), ParamError> {
        if self.get(&spec.name).is_some() {
            return Err(ParamError::DuplicateName(spec.name));
        }
        if spec.value.is_none() && spec.default.is_some() && !spec.kind.is_reference() {
            spec.value = spec.default.clone();
        }
        if let Some(d) = &spec.default {
            spec.check_value(d)?;
        }
        let bound = if spec.kind.is_reference() {
            spec.reference.is_some()
        } else {
            spec.value.is_some()
        };
        spec.status = if bound {
            ParamStatus::Confirmed
        } else {
            ParamStatus::Pending
        };
        spec.validate()?;
        self.specs.push(spec);
        Ok(())
    }

    /// Replaces the spec with the same name, normalizing it like [`ParamSet::declare`].
    pub fn replace(&mut self, spec: ParamSpec) -> Result<(), ParamError> {
        let idx = self
            .specs
            .iter()
            .position(|s| s.name == spec.name)
            .ok_or_else(|| ParamError::UnknownParam(spec.name.clone()))?;
        let mut scratch = ParamSet::new();
        scratch.declare(spec)?;
        self.specs[idx] = scratch.specs.pop().expect("just declared");
        Ok(())
    }

    /// Binds a value or reference and marks the target Confirmed. Leaves the set untouched
    /// on error.
    pub fn apply_update(
        &mut self,
        update: &ParamUpdate,
        registry: &ShapeRegistry,
    ) -> Result<(), ParamError> {
        let spec = self
            .specs
            .iter_mut()
            .find(|s| s.name == update.name)
            .ok_or_else(|| ParamError::UnknownParam(update.name.clone()))?;
        let mismatch = || ParamError::KindMismatch {
            name: spec.name.clone(),
            expected: spec.kind.name(),
        };
        if spec.kind.is_reference() {
            let (Some(id), None) = (update.reference, &update.value) else {
                return Err(mismatch());
            };
            let shape = registry.get(id).map_err(|_| ParamError::UnknownShapeId {
                name: spec.name.clone(),
                id,
            })?;
            if !spec.kind.accepts_shape(shape) {
                return Err(mismatch());
            }
            spec.reference = Some(id);
        } else {
            let (Some(value), None) = (&update.value, update.reference) else {
                return Err(mismatch());
            };
            spec.check_value(value)?;
            spec.value = Some(value.clone());
        }
        spec.status = ParamStatus::Confirmed;
        Ok(())
    }

    pub fn validate_complete(&self) -> Completeness {
        let missing: Vec<String> = self
            .specs
            .iter()
            .filter(|s| !s.is_confirmed())
            .map(|s| s.name.clone())
            .collect();
        if missing.is_empty() {
            Completeness::Confirmed
        } else {
            Completeness::Missing(missing)
        }
    }

    /// Checks set-level invariants after deserialization.
    pub fn validate(&self) -> Result<(), ParamError> {
        for (i, s) in self.specs.iter().enumerate() {
            s.validate()?;
            if self.specs[..i].iter().any(|o| o.name == s.name) {
                return Err(ParamError::DuplicateName(s.name.clone()));
            }
        }
        Ok(())
    }
}
