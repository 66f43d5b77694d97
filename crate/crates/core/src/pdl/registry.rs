//! Method registry: phase one of two-phase linking. Methods are validated, keyed by a
//! content hash and stored immutably; logic is checked and evaluated against them later.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ast::{called_methods, same_structure, MethodDef, Signature};
use super::check::{check_method, recursion};
use super::format::format_method;
use super::{builtins, codes, has_errors, Diagnostic};

/// Content hash of a registered method: its canonical source plus the keys of the
/// methods it calls.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegistryKey(pub String);

impl fmt::Display for RegistryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredMethod {
    pub def: MethodDef,
    pub signature: Signature,
    pub key: RegistryKey,
    /// Canonical source as produced by the formatter.
    pub source: String,
    /// Keys of the registered methods this one calls, sorted.
    pub deps: Vec<RegistryKey>,
}

/// Append-only map from method name to its registered definition. Cloning is cheap and
/// gives an independent read snapshot.
#[derive(Debug, Clone, Default)]
pub struct MethodRegistry {
    entries: IndexMap<String, Arc<RegisteredMethod>>,
}

/// Key for a method with canonical `source` whose callees have keys `deps`.
pub fn method_key(source: &str, deps: &[RegistryKey]) -> RegistryKey {
    let mut sorted: Vec<&RegistryKey> = deps.iter().collect();
    sorted.sort();
    let mut h = Sha256::new();
    h.update(source.as_bytes());
    for d in sorted {
        h.update(b"\n");
        h.update(d.0.as_bytes());
    }
    RegistryKey(hex::encode(h.finalize()))
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&RegisteredMethod> {
        self.entries.get(name).map(|e| e.as_ref())
    }

    pub fn by_key(&self, key: &RegistryKey) -> Option<&RegisteredMethod> {
        self.entries.values().find(|e| &e.key == key).map(|e| e.as_ref())
    }

    pub fn contains_key(&self, key: &RegistryKey) -> bool {
        self.by_key(key).is_some()
    }

    /// Entries in registration order.
    pub fn iter(&self) -> impl Iterator<Item = &RegisteredMethod> {
        self.entries.values().map(|e| e.as_ref())
    }

    pub fn keys(&self) -> Vec<RegistryKey> {
        self.iter().map(|e| e.key.clone()).collect()
    }

    pub fn signatures(&self) -> HashMap<String, Signature> {
        self.entries
            .iter()
            .map(|(n, e)| (n.clone(), e.signature.clone()))
            .collect()
    }

    /// Registers `methods` all-or-nothing and returns one key per input method.
    ///
    /// A method identical to an already registered one yields the existing key. On any
    /// error the registry is left unchanged.
    pub fn register_methods(
        &mut self,
        methods: &[MethodDef],
    ) -> Result<Vec<RegistryKey>, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut fresh: Vec<&MethodDef> = Vec::new();
        for m in methods {
            let name = &m.name.name;
            if builtins::is_builtin(name) {
                diags.push(Diagnostic::error(
                    codes::BUILTIN_SHADOW,
                    format!("method `{name}` shadows a built-in"),
                    m.name.span,
                ));
                continue;
            }
            let existing = self
                .get(name)
                .map(|e| &e.def)
                .or_else(|| fresh.iter().find(|f| f.name.name == *name).copied());
            match existing {
                Some(prev) if same_structure(prev, m) => {}
                Some(_) => diags.push(Diagnostic::error(
                    codes::DUPLICATE_METHOD,
                    format!("method `{name}` is already defined with a different body"),
                    m.name.span,
                )),
                None => fresh.push(m),
            }
        }
        if has_errors(&diags) {
            return Err(diags);
        }

        let mut sigs = self.signatures();
        for m in &fresh {
            sigs.insert(m.name.name.clone(), m.signature());
        }
        diags.extend(recursion(&fresh));
        for m in &fresh {
            diags.extend(check_method(m, &sigs).into_iter().filter(Diagnostic::is_error));
        }
        if has_errors(&diags) {
            return Err(diags);
        }

        // Callees first, so every dependency key is known when a method is hashed.
        let mut staged: IndexMap<String, Arc<RegisteredMethod>> = IndexMap::new();
        let mut done: HashSet<&str> = HashSet::new();
        while done.len() < fresh.len() {
            let before = done.len();
            for m in &fresh {
                let name = m.name.name.as_str();
                if done.contains(name) {
                    continue;
                }
                let callees = called_methods(&m.body);
                let ready = callees.iter().all(|c| {
                    self.entries.contains_key(&c.name) || staged.contains_key(&c.name)
                });
                if !ready {
                    continue;
                }
                let mut deps: Vec<RegistryKey> = callees
                    .iter()
                    .map(|c| {
                        self.entries
                            .get(&c.name)
                            .or_else(|| staged.get(&c.name))
                            .expect("callee is ready")
                            .key
                            .clone()
                    })
                    .collect();
                deps.sort();
                deps.dedup();
                let source = format_method(m);
                let key = method_key(&source, &deps);
                staged.insert(
                    name.to_string(),
                    Arc::new(RegisteredMethod {
                        def: (*m).clone(),
                        signature: m.signature(),
                        key,
                        source,
                        deps,
                    }),
                );
                done.insert(name);
            }
            assert!(done.len() > before, "acyclic call graph always makes progress");
        }
        self.entries.extend(staged);
        Ok(methods
            .iter()
            .map(|m| self.entries[&m.name.name].key.clone())
            .collect())
    }
}
