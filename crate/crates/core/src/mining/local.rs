use std::collections::HashSet;

use super::scope::{find_method, methods_of, Scope};
use super::{ApiRef, ApiSource, CalledFunction, GenerationPoint, LocalDependency, MineError};
use crate::source::{ClassKind, ClassRef, ProjectIndex};

/// Function-level dependencies at a generation point.
///
/// Reference APIs are the methods of the receiver's declared type when it is
/// a project class, or of the enclosing class when the call has no receiver.
/// If the receiver cannot be resolved, every public project method is used
/// instead unless `strict` is set. Called functions are the implementations
/// of project methods invoked before the point, deduplicated by qualified
/// name.
pub fn mine_local(point: &GenerationPoint, index: &ProjectIndex, strict: bool) -> Result<LocalDependency, MineError> {
    let unit = point.unit(index)?;
    let method = point.method(index)?;
    let scope = Scope::new(index, unit, point.class_index, method, point.offset);

    let mut reference_apis = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |api: ApiRef, out: &mut Vec<ApiRef>| {
        let key = (api.owner.clone(), api.name.clone(), api.has_params);
        if seen.insert(key) {
            out.push(api);
        }
    };
    if point.receiver_text.trim().is_empty() {
        for (owner, m) in methods_of(index, scope.enclosing()) {
            push(ApiRef::from_method(&owner.class.name, m, ApiSource::InProjectDeclared), &mut reference_apis);
        }
    } else if let Some(r) = scope.resolve_receiver(&point.receiver_text) {
        for (owner, m) in methods_of(index, r.class) {
            push(ApiRef::from_method(&owner.class.name, m, r.source), &mut reference_apis);
        }
    } else if !strict {
        for c in index.classes() {
            for m in c.class.methods.iter().filter(|m| !m.is_constructor() && is_public(c, m)) {
                push(ApiRef::from_method(&c.class.name, m, ApiSource::InProjectDeclared), &mut reference_apis);
            }
        }
    }

    let mut called_functions = Vec::new();
    let mut names = HashSet::new();
    for site in method.call_sites.iter().filter(|s| s.offset < point.offset) {
        let site_scope = Scope::new(index, unit, point.class_index, method, site.offset);
        let owner = if site.receiver_text.trim().is_empty() {
            Some(site_scope.enclosing())
        } else {
            site_scope.resolve_receiver(&site.receiver_text).map(|r| r.class)
        };
        let Some(owner) = owner else { continue };
        let Some((decl, m)) = find_method(index, owner, &site.method_name, Some(site.arg_count)) else { continue };
        if !m.has_body {
            continue;
        }
        let qualified_name = format!("{}.{}", decl.class.name, m.name);
        if names.insert(qualified_name.clone()) {
            called_functions.push(CalledFunction { qualified_name, body_text: m.body_text.clone() });
        }
    }
    Ok(LocalDependency { reference_apis, called_functions })
}

fn is_public(c: ClassRef<'_>, m: &crate::source::MethodInfo) -> bool {
    m.modifiers.iter().any(|x| x == "public")
        || (c.class.kind == ClassKind::Interface && !m.modifiers.iter().any(|x| x == "private"))
}
