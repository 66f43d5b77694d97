use std::collections::{HashMap, HashSet};

use sha2::{Digest, Sha256};

use super::wire::{CompileRequest, CompileResponse, MethodUnit, Status, UnitKind};
use crate::params::ParamSet;
use crate::pdl::{self, codes, has_errors, method_key, Diagnostic, MethodRegistry, RegistryKey, Span};

/// Lookup of registered method sources by key.
pub trait SourceStore {
    fn unit(&self, key: &RegistryKey) -> Option<MethodUnit>;
}

impl SourceStore for MethodRegistry {
    fn unit(&self, key: &RegistryKey) -> Option<MethodUnit> {
        self.by_key(key).map(|m| MethodUnit {
            key: m.key.clone(),
            source: m.source.clone(),
            deps: m.deps.clone(),
        })
    }
}

impl SourceStore for HashMap<RegistryKey, MethodUnit> {
    fn unit(&self, key: &RegistryKey) -> Option<MethodUnit> {
        self.get(key).cloned()
    }
}

/// Outcome of compiling one unit. `unit` is set for successful method requests.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub response: CompileResponse,
    pub unit: Option<MethodUnit>,
}

/// True when `unit` hashes to its own key.
pub fn unit_is_consistent(unit: &MethodUnit) -> bool {
    method_key(&unit.source, &unit.deps) == unit.key
}

/// Every unit reachable from `roots`, plus the keys that could not be found.
pub fn closure(roots: &[RegistryKey], store: &dyn SourceStore) -> (Vec<MethodUnit>, Vec<RegistryKey>) {
    let mut seen = HashSet::new();
    let mut found = Vec::new();
    let mut missing = Vec::new();
    let mut stack: Vec<RegistryKey> = roots.to_vec();
    while let Some(key) = stack.pop() {
        if !seen.insert(key.clone()) {
            continue;
        }
        match store.unit(&key) {
            Some(u) => {
                stack.extend(u.deps.iter().cloned());
                found.push(u);
            }
            None => missing.push(key),
        }
    }
    missing.sort();
    (found, missing)
}

/// Digest identifying a request independently of its id.
pub fn request_digest(req: &CompileRequest) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(match req.kind {
        UnitKind::Method => b"method\n",
        UnitKind::Logic => b"logic\n\n",
    });
    h.update((req.source.len() as u64).to_be_bytes());
    h.update(req.source.as_bytes());
    for d in &req.deps {
        h.update(b"\n");
        h.update(d.0.as_bytes());
    }
    h.finalize().into()
}

fn dependency_error(message: String) -> Diagnostic {
    Diagnostic::error(codes::UNKNOWN_DEPENDENCY, message, Span::default())
}

fn load(
    key: &RegistryKey,
    units: &HashMap<RegistryKey, MethodUnit>,
    scratch: &mut MethodRegistry,
    visiting: &mut HashSet<RegistryKey>,
) -> Result<(), Diagnostic> {
    if scratch.contains_key(key) {
        return Ok(());
    }
    let unit = units
        .get(key)
        .ok_or_else(|| dependency_error(format!("dependency {key} is not available")))?;
    if !visiting.insert(key.clone()) {
        return Err(dependency_error(format!("dependency {key} depends on itself")));
    }
    for d in &unit.deps {
        load(d, units, scratch, visiting)?;
    }
    let def = pdl::parse_method(&unit.source)
        .map_err(|_| dependency_error(format!("dependency {key} does not parse")))?;
    let keys = scratch
        .register_methods(std::slice::from_ref(&def))
        .map_err(|d| dependency_error(format!("dependency {key} does not register: {}", d[0].message)))?;
    if keys[0] != *key {
        return Err(dependency_error(format!("dependency {key} does not match its source")));
    }
    Ok(())
}

/// Compiles one unit against the method sources in `store`. Both deployment modes call
/// this, so their responses agree byte for byte.
pub fn compile_unit(req: &CompileRequest, store: &dyn SourceStore) -> Compiled {
    let fail = |diagnostics| Compiled {
        response: CompileResponse::fail(req.id, diagnostics),
        unit: None,
    };
    let (found, missing) = closure(&req.deps, store);
    if let Some(key) = missing.first() {
        return fail(vec![dependency_error(format!("dependency {key} is not available"))]);
    }
    let units: HashMap<RegistryKey, MethodUnit> = found.into_iter().map(|u| (u.key.clone(), u)).collect();
    let mut scratch = MethodRegistry::new();
    for key in &req.deps {
        if let Err(d) = load(key, &units, &mut scratch, &mut HashSet::new()) {
            return fail(vec![d]);
        }
    }

    match req.kind {
        UnitKind::Method => {
            let def = match pdl::parse_method(&req.source) {
                Ok(def) => def,
                Err(diags) => return fail(diags),
            };
            match scratch.register_methods(std::slice::from_ref(&def)) {
                Ok(keys) => {
                    let entry = scratch.by_key(&keys[0]).expect("just registered");
                    Compiled {
                        response: CompileResponse {
                            id: req.id,
                            status: Status::Ok,
                            key: Some(keys[0].clone()),
                            diagnostics: Vec::new(),
                        },
                        unit: Some(MethodUnit {
                            key: entry.key.clone(),
                            source: entry.source.clone(),
                            deps: entry.deps.clone(),
                        }),
                    }
                }
                Err(diags) => fail(diags),
            }
        }
        UnitKind::Logic => {
            let program = match pdl::parse(&req.source) {
                Ok(p) => p,
                Err(diags) => return fail(diags),
            };
            // Logic is checked against its own declarations; session values are bound later.
            let params = ParamSet::from_program(&program).unwrap_or_default();
            let diagnostics = pdl::check(&program, &scratch, &params);
            let status = if has_errors(&diagnostics) {
                Status::Fail
            } else {
                Status::Ok
            };
            Compiled {
                response: CompileResponse {
                    id: req.id,
                    status,
                    key: None,
                    diagnostics,
                },
                unit: None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING: &str = "method ring(c: point, r: number) -> shape { return ellipse(c, r, r); }";

    fn req(kind: UnitKind, source: &str, deps: Vec<RegistryKey>) -> CompileRequest {
        CompileRequest {
            id: 7,
            kind,
            source: source.into(),
            deps,
        }
    }

    #[test]
    fn method_key_matches_local_registration() {
        let out = compile_unit(&req(UnitKind::Method, RING, vec![]), &MethodRegistry::new());
        let mut local = MethodRegistry::new();
        let keys = pdl::register_methods(&[pdl::parse_method(RING).unwrap()], &mut local).unwrap();
        assert_eq!(out.response.key, Some(keys[0].clone()));
        assert!(unit_is_consistent(out.unit.as_ref().unwrap()));
    }

    #[test]
    fn logic_links_against_dependencies() {
        let logic = "logic { emit(ring(point(0, 0, 0), 2)); }";
        let unlinked = compile_unit(&req(UnitKind::Logic, logic, vec![]), &MethodRegistry::new());
        assert_eq!(unlinked.response.status, Status::Fail);
        assert_eq!(unlinked.response.diagnostics[0].code, codes::UNREGISTERED_METHOD);

        let mut reg = MethodRegistry::new();
        let keys = pdl::register_methods(&[pdl::parse_method(RING).unwrap()], &mut reg).unwrap();
        let linked = compile_unit(&req(UnitKind::Logic, logic, keys.clone()), &reg);
        assert!(linked.response.is_ok(), "{:?}", linked.response);

        let empty: HashMap<RegistryKey, MethodUnit> = HashMap::new();
        let missing = compile_unit(&req(UnitKind::Logic, logic, keys), &empty);
        assert_eq!(missing.response.diagnostics[0].code, codes::UNKNOWN_DEPENDENCY);
    }

    #[test]
    fn syntax_errors_match_the_parser() {
        let src = "logic { emit(rect(point(0,0,0), 1, 1); }";
        let out = compile_unit(&req(UnitKind::Logic, src, vec![]), &MethodRegistry::new());
        assert_eq!(out.response.diagnostics, pdl::parse(src).unwrap_err());
    }

    #[test]
    fn forged_units_are_rejected() {
        let mut reg = MethodRegistry::new();
        let keys = pdl::register_methods(&[pdl::parse_method(RING).unwrap()], &mut reg).unwrap();
        let mut forged = reg.unit(&keys[0]).unwrap();
        forged.source = forged.source.replace("r, r", "r, 1");
        assert!(!unit_is_consistent(&forged));
        let store: HashMap<_, _> = [(forged.key.clone(), forged)].into_iter().collect();
        let out = compile_unit(&req(UnitKind::Logic, "logic { }", keys), &store);
        assert_eq!(out.response.diagnostics[0].code, codes::UNKNOWN_DEPENDENCY);
    }
}
