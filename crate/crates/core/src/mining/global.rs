use super::skeleton::extract_skeleton;
use super::{GenerationPoint, GlobalDependency, MineError};
use crate::source::{ImportResolution, ProjectIndex};

/// File-level dependencies: the skeleton of the point's file plus one per
/// file reached through an Internal import, in import order. A wildcard
/// import contributes every file of its package directory, in path order.
pub fn mine_global(point: &GenerationPoint, index: &ProjectIndex) -> Result<GlobalDependency, MineError> {
    let unit = point.unit(index)?;
    let mut paths: Vec<&str> = Vec::new();
    for imp in &unit.imports {
        let ImportResolution::Internal(target) = &imp.resolution else { continue };
        if index.unit(target).is_some() {
            paths.push(target);
        } else {
            let prefix = if target.is_empty() { String::new() } else { format!("{target}/") };
            for path in index.units.keys() {
                if path.starts_with(&prefix) && !path[prefix.len()..].contains('/') {
                    paths.push(path);
                }
            }
        }
    }
    let mut related_skeletons = Vec::new();
    for path in paths {
        if path == unit.path || related_skeletons.iter().any(|s: &super::FileSkeleton| s.path == path) {
            continue;
        }
        if let Some(u) = index.unit(path) {
            related_skeletons.push(extract_skeleton(u));
        }
    }
    Ok(GlobalDependency { current_skeleton: extract_skeleton(unit), related_skeletons })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn internal_imports_only_in_order() {
        let files = vec![
            (
                "a/Main.java".to_string(),
                "package a;\nimport b.Z;\nimport java.util.List;\nimport b.Y;\nimport b.*;\nclass Main {\n  void f() {\n    g();\n  }\n}\n".to_string(),
            ),
            ("b/Y.java".to_string(), "package b;\nclass Y { }\n".to_string()),
            ("b/Z.java".to_string(), "package b;\nclass Z { }\n".to_string()),
            ("b/W.java".to_string(), "package b;\nclass W { }\n".to_string()),
        ];
        let idx = ProjectIndex::build(files, "").unwrap();
        let p = GenerationPoint::locate(&idx, "a/Main.java", 8, 4).unwrap();
        let g = mine_global(&p, &idx).unwrap();
        assert_eq!(g.current_skeleton.path, "a/Main.java");
        let paths: Vec<_> = g.related_skeletons.iter().map(|s| s.path.as_str()).collect();
        assert_eq!(paths, vec!["b/Z.java", "b/Y.java", "b/W.java"]);
    }
}
