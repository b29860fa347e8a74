use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::*;
use super::parser::{parse_unit, ParseError};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate path {0}")]
    DuplicatePath(String),
    #[error("class {package}.{name} declared in both {first} and {second}")]
    DuplicateClass { package: String, name: String, first: String, second: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// Where a class lives: unit path plus index into that unit's `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLocation {
    pub package: String,
    pub name: String,
    pub path: String,
    pub class_index: usize,
}

/// A resolved reference to a class inside the index.
#[derive(Debug, Clone, Copy)]
pub struct ClassRef<'a> {
    pub unit: &'a SourceUnit,
    pub class: &'a ClassInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectIndex {
    pub units: BTreeMap<String, SourceUnit>,
    pub description: String,
    #[serde(with = "lookup_serde")]
    pub class_lookup: BTreeMap<(String, String), ClassLocation>,
}

mod lookup_serde {
    use super::ClassLocation;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(String, String), ClassLocation>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        map.values().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(String, String), ClassLocation>, D::Error> {
        let entries = Vec::<ClassLocation>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| ((e.package.clone(), e.name.clone()), e)).collect())
    }
}

#[derive(Debug, Deserialize)]
struct ProjectMeta {
    #[serde(default)]
    description: String,
}

impl ProjectIndex {
    /// Parses every file (in parallel), then merges in path order and
    /// resolves imports.
    pub fn build(files: Vec<(String, String)>, description: impl Into<String>) -> Result<Self, IndexError> {
        let mut seen = BTreeSet::new();
        for (path, _) in &files {
            if !seen.insert(path.clone()) {
                return Err(IndexError::DuplicatePath(path.clone()));
            }
        }
        let parsed: Vec<SourceUnit> = files
            .par_iter()
            .map(|(path, text)| parse_unit(path, text))
            .collect::<Result<_, _>>()?;
        let units: BTreeMap<String, SourceUnit> = parsed.into_iter().map(|u| (u.path.clone(), u)).collect();

        let mut class_lookup: BTreeMap<(String, String), ClassLocation> = BTreeMap::new();
        for unit in units.values() {
            let package = unit.package_name();
            for (i, class) in unit.classes.iter().enumerate() {
                let key = (package.clone(), class.name.clone());
                if let Some(prev) = class_lookup.get(&key) {
                    return Err(IndexError::DuplicateClass {
                        package,
                        name: class.name.clone(),
                        first: prev.path.clone(),
                        second: unit.path.clone(),
                    });
                }
                class_lookup.insert(
                    key,
                    ClassLocation { package: package.clone(), name: class.name.clone(), path: unit.path.clone(), class_index: i },
                );
            }
        }

        let mut index = ProjectIndex { units, description: description.into(), class_lookup };
        let resolutions: Vec<(String, Vec<ImportResolution>)> = index
            .units
            .values()
            .map(|u| (u.path.clone(), u.imports.iter().map(|d| index.resolve_import(d)).collect()))
            .collect();
        for (path, res) in resolutions {
            let unit = index.units.get_mut(&path).expect("unit present");
            for (decl, r) in unit.imports.iter_mut().zip(res) {
                decl.resolution = r;
            }
        }
        Ok(index)
    }

    /// Loads every `.java` file under `dir` (paths relative to `dir`, `/`
    /// separated) and the optional `project.json` description.
    pub fn from_dir(dir: &Path) -> Result<Self, IndexError> {
        let mut files = Vec::new();
        collect_java(dir, dir, &mut files)?;
        files.sort();
        let meta_path = dir.join("project.json");
        let description = if meta_path.is_file() {
            let text = std::fs::read_to_string(&meta_path).map_err(|source| IndexError::Io {
                path: meta_path.display().to_string(),
                source,
            })?;
            serde_json::from_str::<ProjectMeta>(&text)
                .map_err(|source| IndexError::Json { path: meta_path.display().to_string(), source })?
                .description
        } else {
            String::new()
        };
        Self::build(files, description)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Classifies an import by whether its target exists inside the project.
    ///
    /// A single-type import is Internal when some unit declares the imported
    /// package and its file stem (or a class in it) matches the last segment,
    /// or when the segments joined with `/` plus `.java` name an indexed path.
    /// Wildcards are Internal when any unit declares that package; the target
    /// is then the package directory.
    pub fn resolve_import(&self, decl: &ImportDecl) -> ImportResolution {
        let segs = &decl.segments;
        if segs.is_empty() {
            return ImportResolution::External;
        }
        if decl.wildcard && !decl.is_static {
            let pkg = segs.join(".");
            return match self.units.values().find(|u| u.package_name() == pkg) {
                Some(u) => ImportResolution::Internal(parent_dir(&u.path)),
                None => ImportResolution::External,
            };
        }
        // Static imports name a member (or `*`) of a class; try the class.
        let class_segs: &[String] = if decl.is_static && !decl.wildcard { &segs[..segs.len() - 1] } else { segs };
        // Nested types: `a.b.Outer.Inner` resolves to Outer's file.
        for len in (1..=class_segs.len()).rev() {
            if len < class_segs.len() && !class_segs[len].starts_with(char::is_uppercase) {
                break;
            }
            if let Some(path) = self.file_for_type(&class_segs[..len]) {
                return ImportResolution::Internal(path);
            }
        }
        ImportResolution::External
    }

    fn file_for_type(&self, segs: &[String]) -> Option<String> {
        let (name, pkg) = segs.split_last()?;
        let direct = format!("{}.java", segs.join("/"));
        if self.units.contains_key(&direct) {
            return Some(direct);
        }
        let pkg = pkg.join(".");
        if let Some(loc) = self.class_lookup.get(&(pkg.clone(), name.clone())) {
            return Some(loc.path.clone());
        }
        self.units
            .values()
            .find(|u| u.package_name() == pkg && file_stem(&u.path) == name)
            .map(|u| u.path.clone())
    }

    pub fn unit(&self, path: &str) -> Option<&SourceUnit> {
        self.units.get(path)
    }

    pub fn class(&self, loc: &ClassLocation) -> Option<ClassRef<'_>> {
        let unit = self.units.get(&loc.path)?;
        Some(ClassRef { unit, class: unit.classes.get(loc.class_index)? })
    }

    pub fn class_by_key(&self, package: &str, name: &str) -> Option<ClassRef<'_>> {
        self.class(self.class_lookup.get(&(package.to_string(), name.to_string()))?)
    }

    pub fn class_count(&self) -> usize {
        self.class_lookup.len()
    }

    /// Resolves a type as written in `unit` to a project class, using only
    /// what the unit can see: its own and same-package classes, explicit
    /// Internal imports, Internal wildcard imports, or a fully qualified name.
    pub fn resolve_type<'a>(&'a self, unit: &SourceUnit, type_text: &str) -> Option<ClassRef<'a>> {
        let base = strip_generics(type_text);
        if base.is_empty() || base.ends_with("[]") || base.ends_with("...") {
            return None;
        }
        let segs: Vec<&str> = base.split('.').collect();
        let simple = *segs.last()?;
        if segs.len() > 1 {
            let pkg = segs[..segs.len() - 1].join(".");
            if let Some(c) = self.class_by_key(&pkg, simple) {
                return Some(c);
            }
            // Outer.Inner
            if let Some(c) = self.resolve_type(unit, segs[0]) {
                if let Some(inner) = c.unit.classes.iter().find(|k| k.name == simple) {
                    return Some(ClassRef { unit: c.unit, class: inner });
                }
            }
            return None;
        }
        if let Some(class) = self.units.get(&unit.path).and_then(|u| u.class_named(simple)) {
            return Some(ClassRef { unit: self.units.get(&unit.path)?, class });
        }
        if let Some(c) = self.class_by_key(&unit.package_name(), simple) {
            return Some(c);
        }
        for imp in &unit.imports {
            let ImportResolution::Internal(_) = &imp.resolution else { continue };
            if imp.wildcard && !imp.is_static {
                if let Some(c) = self.class_by_key(&imp.segments.join("."), simple) {
                    return Some(c);
                }
            } else if !imp.is_static && imp.segments.last().is_some_and(|s| s == simple) {
                let pkg = imp.segments[..imp.segments.len() - 1].join(".");
                if let Some(c) = self.class_by_key(&pkg, simple) {
                    return Some(c);
                }
                // Imported nested type: find it in the resolved file.
                if let ImportResolution::Internal(path) = &imp.resolution {
                    if let Some(u) = self.units.get(path) {
                        if let Some(class) = u.class_named(simple) {
                            return Some(ClassRef { unit: u, class });
                        }
                    }
                }
            }
        }
        None
    }

    /// All classes with their units, in path order.
    pub fn classes(&self) -> impl Iterator<Item = ClassRef<'_>> {
        self.units.values().flat_map(|u| u.classes.iter().map(move |c| ClassRef { unit: u, class: c }))
    }
}

/// `Map<String, List<X>>[]` -> `Map[]`; `? extends Foo` -> `Foo`.
pub fn strip_generics(type_text: &str) -> String {
    let mut out = String::new();
    let mut depth = 0;
    for c in type_text.chars() {
        match c {
            '<' => depth += 1,
            '>' => depth -= 1,
            _ if depth == 0 && !c.is_whitespace() => out.push(c),
            _ => {}
        }
    }
    out
}

fn parent_dir(path: &str) -> String {
    path.rsplit_once('/').map(|(d, _)| d.to_string()).unwrap_or_default()
}

fn file_stem(path: &str) -> &str {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.strip_suffix(".java").unwrap_or(name)
}

fn collect_java(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<(), IndexError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| IndexError::Io { path, source }
    };
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .collect::<Result<_, _>>()
        .map_err(io(dir))?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            collect_java(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "java") {
            let text = std::fs::read_to_string(&path).map_err(io(&path))?;
            let rel = path.strip_prefix(root).expect("under root");
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            out.push((rel, text));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn files(list: &[(&str, &str)]) -> Vec<(String, String)> {
        list.iter().map(|(p, t)| (p.to_string(), t.to_string())).collect()
    }

    fn acme() -> ProjectIndex {
        ProjectIndex::build(
            files(&[
                ("com/acme/util/Helper.java", "package com.acme.util; public class Helper { public static int help() { return 1; } }"),
                ("com/acme/App.java", "package com.acme; import com.acme.util.Helper; import java.util.List; public class App { }"),
                ("src/main/java/org/x/Deep.java", "package org.x; public class Deep { public class Inner { } }"),
            ]),
            "demo",
        )
        .unwrap()
    }

    fn decl(s: &str) -> ImportDecl {
        let (body, wildcard) = match s.strip_suffix(".*") {
            Some(b) => (b, true),
            None => (s, false),
        };
        ImportDecl {
            segments: body.split('.').map(String::from).collect(),
            wildcard,
            is_static: false,
            resolution: ImportResolution::Unresolved,
        }
    }

    #[test]
    fn empty_corpus() {
        let index = ProjectIndex::build(Vec::new(), "").unwrap();
        assert!(index.units.is_empty());
        assert!(index.class_lookup.is_empty());
    }

    #[test]
    fn duplicate_path_rejected() {
        let err = ProjectIndex::build(files(&[("A.java", "class A {}"), ("A.java", "class B {}")]), "").unwrap_err();
        assert!(matches!(err, IndexError::DuplicatePath(p) if p == "A.java"));
    }

    #[test]
    fn duplicate_class_lists_both_paths() {
        let err = ProjectIndex::build(
            files(&[("a/One.java", "package p; class Same {}"), ("b/Two.java", "package p; class Same {}")]),
            "",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a/One.java") && msg.contains("b/Two.java"), "{msg}");
    }

    #[test]
    fn import_resolution_rules() {
        let index = acme();
        assert_eq!(index.resolve_import(&decl("java.util.List")), ImportResolution::External);
        assert_eq!(
            index.resolve_import(&decl("com.acme.util.Helper")),
            ImportResolution::Internal("com/acme/util/Helper.java".into())
        );
        assert_eq!(index.resolve_import(&decl("com.acme.util.*")), ImportResolution::Internal("com/acme/util".into()));
        // Package declaration honoured even under a source root.
        assert_eq!(
            index.resolve_import(&decl("org.x.Deep")),
            ImportResolution::Internal("src/main/java/org/x/Deep.java".into())
        );
        assert_eq!(
            index.resolve_import(&decl("org.x.Deep.Inner")),
            ImportResolution::Internal("src/main/java/org/x/Deep.java".into())
        );
        assert_eq!(index.resolve_import(&decl("com.acme.util.Missing")), ImportResolution::External);
        let mut st = decl("com.acme.util.Helper.help");
        st.is_static = true;
        assert_eq!(index.resolve_import(&st), ImportResolution::Internal("com/acme/util/Helper.java".into()));
    }

    #[test]
    fn build_resolves_every_import() {
        let index = acme();
        let app = index.unit("com/acme/App.java").unwrap();
        assert_eq!(app.imports[0].resolution, ImportResolution::Internal("com/acme/util/Helper.java".into()));
        assert_eq!(app.imports[1].resolution, ImportResolution::External);
        assert_eq!(index.class_count(), 4);
    }

    #[test]
    fn type_resolution_respects_visibility() {
        let index = acme();
        let app = index.unit("com/acme/App.java").unwrap();
        assert_eq!(index.resolve_type(app, "Helper").unwrap().class.name, "Helper");
        assert_eq!(index.resolve_type(app, "App").unwrap().class.name, "App");
        assert!(index.resolve_type(app, "Deep").is_none());
        assert!(index.resolve_type(app, "List<Helper>").is_none());
        assert!(index.resolve_type(app, "Helper[]").is_none());
        assert_eq!(index.resolve_type(app, "org.x.Deep").unwrap().class.name, "Deep");
    }

    #[test]
    fn json_round_trip() {
        let index = acme();
        let back = ProjectIndex::from_json(&index.to_json()).unwrap();
        assert_eq!(back, index);
    }

    #[test]
    fn strip_generics_keeps_arrays() {
        assert_eq!(strip_generics("Map<String, List<X>>[]"), "Map[]");
        assert_eq!(strip_generics("a.b.C<T>"), "a.b.C");
    }
}
