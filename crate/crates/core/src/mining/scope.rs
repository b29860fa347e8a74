use crate::mining::ApiSource;
use crate::source::lexer::{lex, TokenKind, PRIMITIVES};
use crate::source::parser::join_tokens;
use crate::source::{ClassInfo, ClassRef, MethodInfo, ProjectIndex, SourceUnit};

/// Local variable declarations in `text`, in order: `(name, declared type)`.
///
/// Recognises `Type name` followed by `=`, `;`, `:`, `,` or `)`, with
/// qualified, generic and array types. `var x = new T(..)` records `T`.
pub fn declared_locals(text: &str) -> Vec<(String, String)> {
    let Ok(toks) = lex(text) else { return Vec::new() };
    let mut out = Vec::new();
    for i in 1..toks.len().saturating_sub(1) {
        let name = &toks[i];
        if name.kind != TokenKind::Ident || !matches!(toks[i + 1].text.as_str(), "=" | ";" | ":" | "," | ")") {
            continue;
        }
        let Some(start) = type_start(&toks, i) else { continue };
        let mut type_text = join_tokens(&toks[start..i]);
        if type_text == "var" {
            if toks[i + 1].text != "=" || toks.get(i + 2).is_none_or(|t| t.text != "new") {
                continue;
            }
            let from = i + 3;
            let mut end = from;
            while end < toks.len() && (toks[end].kind == TokenKind::Ident || toks[end].text == ".") {
                end += 1;
            }
            if end == from {
                continue;
            }
            type_text = join_tokens(&toks[from..end]);
        }
        out.push((name.text.clone(), type_text));
    }
    out
}

/// Start of a type ending just before token `name`, or `None` when the
/// preceding tokens do not form one.
fn type_start(toks: &[crate::source::lexer::Token], name: usize) -> Option<usize> {
    let mut j = name;
    // Array dimensions.
    while j >= 2 && toks[j - 1].text == "]" && toks[j - 2].text == "[" {
        j -= 2;
    }
    if j == 0 {
        return None;
    }
    if toks[j - 1].text == ">" {
        let mut depth = 0usize;
        let mut k = j;
        loop {
            if k == 0 {
                return None;
            }
            k -= 1;
            let t = &toks[k];
            match t.text.as_str() {
                ">" => depth += 1,
                "<" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                "." | "," | "?" | "extends" | "super" | "&" | "[" | "]" => {}
                _ if t.kind == TokenKind::Ident || PRIMITIVES.contains(&t.text.as_str()) => {}
                _ => return None,
            }
        }
        j = k;
        if j == 0 {
            return None;
        }
    }
    let last = &toks[j - 1];
    let primitive = PRIMITIVES.contains(&last.text.as_str());
    if last.kind != TokenKind::Ident && !primitive {
        return None;
    }
    let mut start = j - 1;
    while !primitive && start >= 2 && toks[start - 1].text == "." && toks[start - 2].kind == TokenKind::Ident {
        start -= 2;
    }
    Some(start)
}

/// Splits an expression at top-level dots.
fn split_dots(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    let mut in_str = None;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if let Some(q) = in_str {
            if c == b'\\' {
                i += 1;
            } else if c == q {
                in_str = None;
            }
        } else {
            match c {
                b'"' | b'\'' => in_str = Some(c),
                b'(' | b'[' => depth += 1,
                b')' | b']' => depth -= 1,
                b'.' if depth == 0 => {
                    out.push(text[last..i].trim());
                    last = i + 1;
                }
                _ => {}
            }
        }
        i += 1;
    }
    out.push(text[last..].trim());
    out
}

fn count_args(args: &str) -> usize {
    if args.trim().is_empty() {
        return 0;
    }
    let mut depth = 0i32;
    let mut n = 1;
    for c in args.chars() {
        match c {
            '(' | '[' | '{' | '<' => depth += 1,
            ')' | ']' | '}' | '>' => depth -= 1,
            ',' if depth == 0 => n += 1,
            _ => {}
        }
    }
    n
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

/// A segment parsed as `name(args)`, `name[..]` or `name`.
enum Segment<'s> {
    Call(&'s str, usize),
    Index(&'s str),
    Name(&'s str),
}

fn segment(s: &str) -> Option<Segment<'_>> {
    if let Some(open) = s.find('(') {
        let name = s[..open].trim();
        let args = s[open + 1..].strip_suffix(')')?;
        return is_identifier(name).then(|| Segment::Call(name, count_args(args)));
    }
    if let Some(open) = s.find('[') {
        let name = s[..open].trim();
        return is_identifier(name).then_some(Segment::Index(name));
    }
    is_identifier(s).then_some(Segment::Name(s))
}

/// What a receiver expression resolved to.
#[derive(Debug, Clone, Copy)]
pub struct Resolved<'a> {
    pub class: ClassRef<'a>,
    pub source: ApiSource,
    /// The receiver names the type itself (a static call).
    pub is_static: bool,
}

/// Declared-type view of one method body up to some offset.
pub struct Scope<'a> {
    index: &'a ProjectIndex,
    unit: &'a SourceUnit,
    class_index: usize,
    method: &'a MethodInfo,
    locals: Vec<(String, String)>,
}

impl<'a> Scope<'a> {
    /// Scope of `method` with locals declared before byte `upto` of the unit.
    pub fn new(
        index: &'a ProjectIndex,
        unit: &'a SourceUnit,
        class_index: usize,
        method: &'a MethodInfo,
        upto: usize,
    ) -> Self {
        let end = upto.saturating_sub(method.body_offset).min(method.body_text.len());
        let locals = declared_locals(&method.body_text[..end]);
        Self { index, unit, class_index, method, locals }
    }

    pub fn enclosing(&self) -> ClassRef<'a> {
        ClassRef { unit: self.unit, class: &self.unit.classes[self.class_index] }
    }

    /// Enclosing class followed by its outer classes.
    fn enclosing_chain(&self) -> Vec<ClassRef<'a>> {
        let mut out = Vec::new();
        let mut idx = Some(self.class_index);
        while let Some(i) = idx {
            out.push(ClassRef { unit: self.unit, class: &self.unit.classes[i] });
            idx = self.unit.classes[i].parent;
        }
        out
    }

    fn resolve_in(&self, unit: &SourceUnit, type_text: &str) -> Option<ClassRef<'a>> {
        self.index.resolve_type(unit, type_text)
    }

    /// Resolves the declared type of a receiver expression to a project class.
    pub fn resolve_receiver(&self, receiver: &str) -> Option<Resolved<'a>> {
        let receiver = receiver.trim();
        if receiver.is_empty() {
            return None;
        }
        let segs = split_dots(receiver);
        let (mut cur, rest) = self.resolve_root(&segs)?;
        for seg in rest {
            let class = self.member_type(cur.class, seg)?;
            cur = Resolved { class, source: cur.source, is_static: false };
        }
        Some(cur)
    }

    /// Resolves the leading segment(s); returns the remaining segments.
    fn resolve_root<'s>(&self, segs: &'s [&'s str]) -> Option<(Resolved<'a>, &'s [&'s str])> {
        let first = segs[0];
        let plain = |class| Resolved { class, source: ApiSource::InProjectDeclared, is_static: false };
        if first == "this" {
            if let Some(Segment::Name(f) | Segment::Index(f)) = segs.get(1).and_then(|s| segment(s)) {
                if let Some(class) = self.field_type(self.enclosing(), f, segs[1].contains('[')) {
                    return Some((Resolved { class, source: ApiSource::FieldTyped, is_static: false }, &segs[2..]));
                }
            }
            return Some((plain(self.enclosing()), &segs[1..]));
        }
        if first == "super" {
            let sup = supertypes(self.index, self.enclosing()).into_iter().nth(1)?;
            return Some((plain(sup), &segs[1..]));
        }
        if let Some(rest) = first.strip_prefix("new ") {
            // `new a.b.Foo(..)` spans several dot segments.
            let mut k = 0;
            while !segs[k].contains('(') {
                k += 1;
                if k == segs.len() {
                    return None;
                }
            }
            let joined = std::iter::once(rest).chain(segs[1..=k].iter().copied()).collect::<Vec<_>>().join(".");
            let ty = joined[..joined.find('(')?].trim();
            let class = self.resolve_in(self.unit, ty)?;
            return Some((plain(class), &segs[k + 1..]));
        }
        match segment(first)? {
            Segment::Call(name, arity) => {
                for owner in self.enclosing_chain() {
                    if let Some(class) = self.call_type(owner.class, name, arity) {
                        return Some((plain(class), &segs[1..]));
                    }
                }
                None
            }
            Segment::Index(name) => {
                let (class, source) = self.variable_type(name, true)?;
                Some((Resolved { class, source, is_static: false }, &segs[1..]))
            }
            Segment::Name(name) => {
                if let Some((class, source)) = self.variable_type(name, false) {
                    return Some((Resolved { class, source, is_static: false }, &segs[1..]));
                }
                // A type name, possibly qualified: the longest prefix that resolves.
                for k in (1..=segs.len()).rev() {
                    if !segs[..k].iter().all(|s| is_identifier(s)) {
                        continue;
                    }
                    if let Some(class) = self.resolve_in(self.unit, &segs[..k].join(".")) {
                        let r = Resolved { class, source: ApiSource::InProjectDeclared, is_static: true };
                        return Some((r, &segs[k..]));
                    }
                }
                None
            }
        }
    }

    /// Type of a local, parameter or field named `name`.
    fn variable_type(&self, name: &str, element: bool) -> Option<(ClassRef<'a>, ApiSource)> {
        let elem = |t: &str| if element { t.trim_end().strip_suffix("[]").unwrap_or(t).to_string() } else { t.to_string() };
        if let Some((_, t)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Some((self.resolve_in(self.unit, &elem(t))?, ApiSource::LocalTyped));
        }
        if let Some(p) = self.method.params.iter().find(|p| p.name == name) {
            return Some((self.resolve_in(self.unit, &elem(&p.type_text))?, ApiSource::LocalTyped));
        }
        for owner in self.enclosing_chain() {
            if let Some(class) = self.field_type(owner, name, element) {
                return Some((class, ApiSource::FieldTyped));
            }
        }
        None
    }

    fn field_type(&self, owner: ClassRef<'a>, name: &str, element: bool) -> Option<ClassRef<'a>> {
        for c in supertypes(self.index, owner) {
            if let Some(f) = c.class.field(name) {
                let t = if element { f.type_text.trim_end_matches("[]") } else { f.type_text.as_str() };
                return self.resolve_in(c.unit, t);
            }
        }
        None
    }

    fn call_type(&self, owner: &'a ClassInfo, name: &str, arity: usize) -> Option<ClassRef<'a>> {
        let owner_ref = self.class_ref(owner)?;
        let (decl, m) = find_method(self.index, owner_ref, name, Some(arity))?;
        self.resolve_in(decl.unit, &m.return_type)
    }

    fn class_ref(&self, class: &'a ClassInfo) -> Option<ClassRef<'a>> {
        self.index
            .classes()
            .find(|c| std::ptr::eq(c.class, class))
    }

    fn member_type(&self, owner: ClassRef<'a>, seg: &str) -> Option<ClassRef<'a>> {
        match segment(seg)? {
            Segment::Call(name, arity) => {
                let (decl, m) = find_method(self.index, owner, name, Some(arity))?;
                self.resolve_in(decl.unit, &m.return_type)
            }
            Segment::Index(name) => self.field_type(owner, name, true),
            Segment::Name(name) => self.field_type(owner, name, false),
        }
    }
}

/// `class` followed by its in-project supertypes, breadth first.
pub fn supertypes<'a>(index: &'a ProjectIndex, class: ClassRef<'a>) -> Vec<ClassRef<'a>> {
    let mut out = vec![class];
    let mut i = 0;
    while i < out.len() && out.len() < 64 {
        let c = out[i];
        for name in super_names(&c.class.header) {
            if let Some(s) = index.resolve_type(c.unit, &name) {
                if !out.iter().any(|o| std::ptr::eq(o.class, s.class)) {
                    out.push(s);
                }
            }
        }
        i += 1;
    }
    out
}

/// Type names after `extends` and `implements` in a class header.
fn super_names(header: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut collecting = false;
    let mut cur = String::new();
    let mut word = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.trim().is_empty() {
            out.push(cur.trim().to_string());
        }
        cur.clear();
    };
    for c in header.chars().chain(std::iter::once(' ')) {
        match c {
            '<' => depth += 1,
            '>' => depth -= 1,
            _ => {}
        }
        if depth == 0 && (c.is_alphanumeric() || c == '_' || c == '$' || c == '.') {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            match word.as_str() {
                "extends" | "implements" if depth == 0 => {
                    flush(&mut cur, &mut out);
                    collecting = true;
                }
                "permits" => {
                    flush(&mut cur, &mut out);
                    collecting = false;
                }
                w if collecting => cur.push_str(w),
                _ => {}
            }
            word.clear();
        }
        if collecting && depth == 0 && c == ',' {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    if !collecting {
        out.clear();
    }
    out
}

/// Methods visible on `class`, own declarations first, then inherited ones
/// not overridden (same name and arity). Constructors excluded.
pub fn methods_of<'a>(index: &'a ProjectIndex, class: ClassRef<'a>) -> Vec<(ClassRef<'a>, &'a MethodInfo)> {
    let mut out: Vec<(ClassRef<'a>, &'a MethodInfo)> = Vec::new();
    for c in supertypes(index, class) {
        for m in &c.class.methods {
            if m.is_constructor() {
                continue;
            }
            if out.iter().any(|(_, o)| o.name == m.name && o.arity() == m.arity()) {
                continue;
            }
            out.push((c, m));
        }
    }
    out
}

/// A method by name, preferring one whose arity matches.
pub fn find_method<'a>(
    index: &'a ProjectIndex,
    class: ClassRef<'a>,
    name: &str,
    arity: Option<usize>,
) -> Option<(ClassRef<'a>, &'a MethodInfo)> {
    let all = methods_of(index, class);
    all.iter()
        .find(|(_, m)| m.name == name && arity.is_none_or(|a| m.arity() == a))
        .or_else(|| all.iter().find(|(_, m)| m.name == name))
        .copied()
}
