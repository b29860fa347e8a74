use super::FileSkeleton;
use crate::source::SourceUnit;

const INDENT: &str = "    ";

/// Renders the package, class headers, field declarations and method
/// signatures of a unit, in declaration order, with every body replaced by
/// `;`. Imports and initializers are dropped.
pub fn extract_skeleton(unit: &SourceUnit) -> FileSkeleton {
    let mut parts = Vec::new();
    for (i, c) in unit.classes.iter().enumerate() {
        if c.parent.is_none() {
            let mut s = String::new();
            render_class(unit, i, 0, &mut s);
            parts.push(s);
        }
    }
    let mut rendered_text = String::new();
    if !unit.package.is_empty() {
        rendered_text.push_str(&format!("package {};", unit.package_name()));
        if !parts.is_empty() {
            rendered_text.push_str("\n\n");
        }
    }
    rendered_text.push_str(&parts.join("\n\n"));
    FileSkeleton { path: unit.path.clone(), rendered_text }
}

enum Member {
    Field(usize),
    Method(usize),
    Nested(usize),
}

fn render_class(unit: &SourceUnit, idx: usize, depth: usize, out: &mut String) {
    let class = &unit.classes[idx];
    let mut members: Vec<(usize, Member)> = Vec::new();
    for (i, f) in class.fields_.iter().enumerate() {
        if !f.component {
            members.push((f.line, Member::Field(i)));
        }
    }
    for (i, m) in class.methods.iter().enumerate() {
        members.push((m.body_lines.0, Member::Method(i)));
    }
    for (i, c) in unit.classes.iter().enumerate() {
        if c.parent == Some(idx) {
            members.push((c.line_range.0, Member::Nested(i)));
        }
    }
    members.sort_by_key(|(line, _)| *line);

    out.push_str(&class.header);
    if members.is_empty() && class.enum_constants.is_empty() {
        out.push_str(" { }");
        return;
    }
    out.push_str(" {\n");
    let pad = INDENT.repeat(depth + 1);
    if !class.enum_constants.is_empty() {
        out.push_str(&format!("{pad}{};\n", class.enum_constants.join(", ")));
    }
    for (_, member) in members {
        match member {
            Member::Field(i) => {
                let f = &class.fields_[i];
                out.push_str(&pad);
                for m in &f.modifiers {
                    out.push_str(m);
                    out.push(' ');
                }
                out.push_str(&format!("{} {};\n", f.type_text, f.name));
            }
            Member::Method(i) => out.push_str(&format!("{pad}{};\n", class.methods[i].signature)),
            Member::Nested(i) => {
                out.push_str(&pad);
                render_class(unit, i, depth + 1, out);
                out.push('\n');
            }
        }
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}
