//! Recursive-descent parser for the Java subset the pipeline needs.
//!
//! Declarations (package, imports, classes, fields, methods) are modeled.
//! Method bodies are not parsed into statements; they are scanned for
//! invocation sites of the form `receiver.name(args)` or `name(args)`.
//! Generics and annotations are lexed and skipped.

use super::lexer::{lex, Token, TokenKind, PRIMITIVES};
use super::model::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{path}:{line}:{column}: {message}")]
    FatalSyntax { path: String, line: usize, column: usize, message: String },
}

const MODIFIERS: &[&str] = &[
    "public", "private", "protected", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default", "sealed",
];

/// Parses one compilation unit. Only unbalanced braces (or text that cannot be
/// lexed at all) are fatal; anything else unrecognised is skipped and noted in
/// `diagnostics`.
pub fn parse_unit(path: &str, text: &str) -> Result<SourceUnit, ParseError> {
    let fatal = |line, column, message: String| ParseError::FatalSyntax {
        path: path.to_string(),
        line,
        column,
        message,
    };
    let tokens = lex(text).map_err(|e| fatal(e.line, e.column, e.message))?;
    check_braces(&tokens).map_err(|(t, msg)| fatal(t.line, t.column, msg))?;

    let mut p = Parser { toks: &tokens, text, pos: 0, classes: Vec::new(), diagnostics: Vec::new() };
    let (package, imports) = p.preamble();
    p.type_decls();
    Ok(SourceUnit {
        path: path.to_string(),
        package,
        imports,
        classes: p.classes,
        raw_text: text.to_string(),
        diagnostics: p.diagnostics,
    })
}

fn check_braces(tokens: &[Token]) -> Result<(), (&Token, String)> {
    let mut open: Vec<&Token> = Vec::new();
    for t in tokens {
        if t.is("{") {
            open.push(t);
        } else if t.is("}") && open.pop().is_none() {
            return Err((t, "unmatched closing brace".into()));
        }
    }
    match open.pop() {
        Some(t) => Err((t, "unclosed brace".into())),
        None => Ok(()),
    }
}

/// Joins tokens with Java-ish spacing: `Map<String, List<X>> a`, `f(int x)`.
pub(crate) fn join_tokens(toks: &[Token]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Token> = None;
    for t in toks {
        if let Some(p) = prev {
            let tight_before = matches!(t.text.as_str(), "(" | ")" | "," | "." | "[" | "]" | ";" | ">" | "...")
                || (t.is("<") && p.kind != TokenKind::Keyword);
            let tight_after = matches!(p.text.as_str(), "(" | "." | "[" | "<" | "@");
            if !tight_before && !tight_after {
                out.push(' ');
            }
        }
        out.push_str(&t.text);
        prev = Some(t);
    }
    out
}

struct Parser<'a> {
    toks: &'a [Token],
    text: &'a str,
    pos: usize,
    classes: Vec<ClassInfo>,
    diagnostics: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is(s))
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.at(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<&'a Token> {
        let t = self.peek()?;
        if t.is_ident() {
            self.pos += 1;
            Some(t)
        } else {
            None
        }
    }

    fn diag(&mut self, at: usize, message: impl Into<String>) {
        let t = self.toks.get(at).or(self.toks.last());
        let (line, column) = t.map_or((1, 0), |t| (t.line, t.column));
        self.diagnostics.push(Diagnostic { line, column, message: message.into() });
    }

    /// Index of the token closing the bracket opened at `open`.
    fn matching(&self, open: usize) -> Option<usize> {
        matching_forward(self.toks, open)
    }

    fn qualified_name(&mut self) -> Option<Vec<String>> {
        let mut segs = vec![self.ident()?.text.clone()];
        while self.at(".") && self.peek_at(1).is_some_and(|t| t.is_ident()) {
            self.pos += 1;
            segs.push(self.ident()?.text.clone());
        }
        Some(segs)
    }

    /// Skips to just past the next `;` at depth zero, or past a balanced block
    /// if one opens first.
    fn recover(&mut self) {
        while let Some(t) = self.peek() {
            match t.text.as_str() {
                ";" => {
                    self.pos += 1;
                    return;
                }
                "{" | "(" | "[" => {
                    let close = self.matching(self.pos).unwrap_or(self.toks.len() - 1);
                    self.pos = close + 1;
                    if t.is("{") {
                        return;
                    }
                }
                "}" => return,
                _ => self.pos += 1,
            }
        }
    }

    fn preamble(&mut self) -> (Vec<String>, Vec<ImportDecl>) {
        let mut package = Vec::new();
        let mut imports = Vec::new();
        loop {
            let start = self.pos;
            // Package annotations are legal but rare.
            while self.at("@") && !self.peek_at(1).is_some_and(|t| t.is("interface")) {
                self.skip_annotation();
            }
            if self.eat("package") {
                match self.qualified_name() {
                    Some(segs) if self.eat(";") => package = segs,
                    _ => {
                        self.diag(start, "malformed package declaration");
                        self.recover();
                    }
                }
            } else if self.eat("import") {
                let is_static = self.at("static") && {
                    self.pos += 1;
                    true
                };
                let segs = self.qualified_name();
                let wildcard = self.at(".") && self.peek_at(1).is_some_and(|t| t.is("*")) && {
                    self.pos += 2;
                    true
                };
                match segs {
                    Some(segments) if self.eat(";") => imports.push(ImportDecl {
                        segments,
                        wildcard,
                        is_static,
                        resolution: ImportResolution::Unresolved,
                    }),
                    _ => {
                        self.diag(start, "malformed import declaration");
                        self.recover();
                    }
                }
            } else if self.eat(";") {
            } else {
                self.pos = start;
                break;
            }
        }
        (package, imports)
    }

    fn skip_annotation(&mut self) {
        self.pos += 1;
        let _ = self.qualified_name();
        if self.at("(") {
            self.pos = self.matching(self.pos).map_or(self.toks.len(), |c| c + 1);
        }
    }

    /// Annotations and modifier keywords. Returns the modifiers and the index
    /// of the first non-annotation token.
    fn modifiers(&mut self) -> (Vec<String>, usize) {
        let mut mods = Vec::new();
        let mut sig_start = self.pos;
        loop {
            if self.at("@") && !self.peek_at(1).is_some_and(|t| t.is("interface")) {
                self.skip_annotation();
                sig_start = self.pos;
            } else if self.peek().is_some_and(|t| MODIFIERS.contains(&t.text.as_str())) {
                mods.push(self.peek().unwrap().text.clone());
                self.pos += 1;
            } else if self.at("non")
                && self.peek_at(1).is_some_and(|t| t.is("-"))
                && self.peek_at(2).is_some_and(|t| t.is("sealed"))
            {
                mods.push("non-sealed".into());
                self.pos += 3;
            } else {
                return (mods, sig_start);
            }
        }
    }

    fn type_decls(&mut self) {
        while self.pos < self.toks.len() {
            if self.eat(";") {
                continue;
            }
            let start = self.pos;
            let (mods, sig_start) = self.modifiers();
            if self.is_type_keyword() {
                if self.type_decl(mods, sig_start, None).is_none() {
                    self.diag(start, "malformed type declaration");
                    self.recover();
                }
            } else {
                self.diag(start, "unrecognised top-level construct skipped");
                self.pos = self.pos.max(start);
                self.recover();
                if self.at("}") {
                    self.pos += 1;
                }
            }
        }
    }

    fn is_type_keyword(&self) -> bool {
        match self.peek() {
            Some(t) if t.is("class") || t.is("interface") || t.is("enum") => true,
            Some(t) if t.is("@") => self.peek_at(1).is_some_and(|n| n.is("interface")),
            Some(t) if t.is("record") => {
                self.peek_at(1).is_some_and(|n| n.is_ident())
                    && self.peek_at(2).is_some_and(|n| n.is("(") || n.is("<"))
            }
            _ => false,
        }
    }

    fn type_decl(&mut self, mods: Vec<String>, sig_start: usize, parent: Option<usize>) -> Option<()> {
        let _ = mods;
        let kind = match self.peek()?.text.as_str() {
            "class" => ClassKind::Class,
            "interface" => ClassKind::Interface,
            "enum" => ClassKind::Enum,
            "record" => ClassKind::Record,
            "@" => {
                self.pos += 1;
                ClassKind::Interface
            }
            _ => return None,
        };
        self.pos += 1;
        let name = self.ident()?.text.clone();

        // Header runs to the body brace; record components and generic
        // bounds are skipped as balanced groups.
        let mut record_components = None;
        while !self.at("{") {
            let t = self.peek()?;
            if t.is("(") || t.is("<") {
                let close = self.matching(self.pos)?;
                if t.is("(") && kind == ClassKind::Record && record_components.is_none() {
                    record_components = Some((self.pos + 1, close));
                }
                self.pos = close + 1;
            } else if t.is(";") || t.is("}") {
                return None;
            } else {
                self.pos += 1;
            }
        }
        let header = join_tokens(&self.toks[sig_start..self.pos]);
        let open = self.pos;
        let close = self.matching(open)?;

        let idx = self.classes.len();
        self.classes.push(ClassInfo {
            name: name.clone(),
            kind,
            header,
            fields_: Vec::new(),
            methods: Vec::new(),
            enum_constants: Vec::new(),
            parent,
            line_range: (self.toks[sig_start].line, self.toks[close].line),
        });
        if let Some((l, r)) = record_components {
            for group in split_top_level(&self.toks[l..r]) {
                if let Some((type_text, pname)) = param_parts(group) {
                    self.classes[idx].fields_.push(FieldInfo {
                        name: pname,
                        type_text,
                        modifiers: vec!["private".into(), "final".into()],
                        line: group.last().map_or(0, |t| t.line),
                        component: true,
                    });
                }
            }
        }

        self.pos = open + 1;
        if kind == ClassKind::Enum {
            self.enum_constants(idx, close);
        }
        self.class_body(idx, &name, close);
        self.pos = close + 1;
        Some(())
    }

    fn enum_constants(&mut self, idx: usize, close: usize) {
        let mut expect_name = true;
        while self.pos < close {
            let t = &self.toks[self.pos];
            match t.text.as_str() {
                ";" => {
                    self.pos += 1;
                    return;
                }
                "(" | "{" => self.pos = self.matching(self.pos).map_or(close, |c| c + 1),
                "," => {
                    expect_name = true;
                    self.pos += 1;
                }
                "@" => self.skip_annotation(),
                _ => {
                    if expect_name && t.is_ident() {
                        self.classes[idx].enum_constants.push(t.text.clone());
                        expect_name = false;
                    }
                    self.pos += 1;
                }
            }
        }
    }

    fn class_body(&mut self, idx: usize, class_name: &str, close: usize) {
        while self.pos < close {
            if self.eat(";") {
                continue;
            }
            let start = self.pos;
            if self.at("{") || (self.at("static") && self.peek_at(1).is_some_and(|t| t.is("{"))) {
                if self.at("static") {
                    self.pos += 1;
                }
                self.pos = self.matching(self.pos).map_or(close, |c| c + 1);
                continue;
            }
            let (mods, sig_start) = self.modifiers();
            if self.is_type_keyword() {
                if self.type_decl(mods, sig_start, Some(idx)).is_none() {
                    self.diag(start, "malformed nested type declaration");
                    self.pos = start;
                    self.recover();
                }
                continue;
            }
            if self.member(idx, class_name, mods, start, sig_start, close).is_none() {
                self.diag(start, "unrecognised class member skipped");
                self.pos = start;
                self.recover();
                if self.pos <= start {
                    self.pos = start + 1;
                }
            }
        }
    }

    fn member(
        &mut self,
        idx: usize,
        class_name: &str,
        modifiers: Vec<String>,
        decl_start: usize,
        sig_start: usize,
        close: usize,
    ) -> Option<()> {
        if self.at("<") {
            self.pos = self.matching(self.pos)? + 1;
        }
        let is_ctor = self.peek()?.is(class_name) && self.peek_at(1)?.is("(");
        let return_type = if is_ctor {
            String::new()
        } else if self.peek()?.is(class_name)
            && self.classes[idx].kind == ClassKind::Record
            && self.peek_at(1)?.is("{")
        {
            // Compact canonical constructor.
            self.pos = self.matching(self.pos + 1)? + 1;
            return Some(());
        } else {
            let (l, r) = self.type_ref()?;
            join_tokens(&self.toks[l..r])
        };
        let name_tok = self.ident()?;
        if self.at("(") {
            self.method(idx, name_tok, return_type, modifiers, decl_start, sig_start, close)
        } else if !is_ctor {
            self.fields(idx, name_tok, return_type, modifiers, close)
        } else {
            None
        }
    }

    /// A type reference: qualified name or primitive, generic arguments,
    /// array dimensions. Returns the token range.
    fn type_ref(&mut self) -> Option<(usize, usize)> {
        let start = self.pos;
        let first = self.peek()?;
        let primitive = PRIMITIVES.contains(&first.text.as_str());
        if !(first.is_ident() || primitive) {
            return None;
        }
        self.pos += 1;
        loop {
            if self.at("<") {
                self.pos = self.matching(self.pos)? + 1;
            } else if self.at(".") && self.peek_at(1).is_some_and(|t| t.is_ident()) {
                self.pos += 2;
            } else if self.at("@") {
                self.skip_annotation();
            } else {
                break;
            }
        }
        while self.at("[") && self.peek_at(1).is_some_and(|t| t.is("]")) {
            self.pos += 2;
        }
        if self.at("...") {
            self.pos += 1;
        }
        Some((start, self.pos))
    }

    #[allow(clippy::too_many_arguments)]
    fn method(
        &mut self,
        idx: usize,
        name_tok: &Token,
        return_type: String,
        modifiers: Vec<String>,
        decl_start: usize,
        sig_start: usize,
        close: usize,
    ) -> Option<()> {
        let popen = self.pos;
        let pclose = self.matching(popen)?;
        let params = split_top_level(&self.toks[popen + 1..pclose])
            .into_iter()
            .filter_map(param_parts)
            .map(|(type_text, name)| Param { name, type_text })
            .collect();
        self.pos = pclose + 1;
        while self.at("[") {
            self.pos += 2;
        }
        let mut sig_end = None;
        while !self.at(";") && !(self.at("{") && sig_end.is_none()) {
            let t = self.peek()?;
            if self.pos >= close {
                return None;
            }
            if t.is("default") && sig_end.is_none() {
                // Annotation element default value.
                sig_end = Some(self.pos);
                self.pos += 1;
            } else if t.is("(") || t.is("<") || t.is("{") {
                self.pos = self.matching(self.pos)? + 1;
            } else {
                self.pos += 1;
            }
        }
        let sig_end = sig_end.unwrap_or(self.pos);
        let signature = join_tokens(&self.toks[sig_start..sig_end]);
        let start_tok = &self.toks[decl_start];
        let (end_tok, has_body, call_sites) = if self.at("{") {
            let bclose = self.matching(self.pos)?;
            let sites = scan_invocations(self.toks, self.text, self.pos + 1, bclose);
            self.pos = bclose + 1;
            (&self.toks[bclose], true, sites)
        } else {
            let semi = self.pos;
            self.pos += 1;
            (&self.toks[semi], false, Vec::new())
        };
        let body_text = self.text[start_tok.start..end_tok.end].to_string();
        self.classes[idx].methods.push(MethodInfo {
            name: name_tok.text.clone(),
            modifiers,
            params,
            return_type,
            signature,
            body_lines: (start_tok.line, end_tok.line),
            body_offset: start_tok.start,
            body_text: if has_body { body_text } else { String::new() },
            has_body,
            call_sites,
        });
        Some(())
    }

    fn fields(
        &mut self,
        idx: usize,
        first: &Token,
        type_text: String,
        modifiers: Vec<String>,
        close: usize,
    ) -> Option<()> {
        let mut name = first.text.clone();
        let mut line = first.line;
        loop {
            let mut dims = String::new();
            while self.at("[") && self.peek_at(1).is_some_and(|t| t.is("]")) {
                self.pos += 2;
                dims.push_str("[]");
            }
            self.classes[idx].fields_.push(FieldInfo {
                name: name.clone(),
                type_text: format!("{type_text}{dims}"),
                modifiers: modifiers.clone(),
                line,
                component: false,
            });
            if self.eat("=") {
                self.skip_initializer(close)?;
            }
            if self.eat(";") {
                return Some(());
            }
            if !self.eat(",") {
                return None;
            }
            let next = self.ident()?;
            name = next.text.clone();
            line = next.line;
        }
    }

    /// Advances to the `,` or `;` ending a variable initializer.
    fn skip_initializer(&mut self, close: usize) -> Option<()> {
        while self.pos < close {
            let t = self.peek()?;
            match t.text.as_str() {
                "," | ";" => return Some(()),
                "(" | "[" | "{" => self.pos = self.matching(self.pos)? + 1,
                "new" => {
                    self.pos += 1;
                    let _ = self.type_ref();
                }
                _ => self.pos += 1,
            }
        }
        None
    }
}

pub(crate) fn matching_forward(toks: &[Token], open: usize) -> Option<usize> {
    let (o, c) = match toks.get(open)?.text.as_str() {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        "<" => ("<", ">"),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        } else if o == "<" && (t.is(";") || t.is("{") || t.is("}")) {
            return None;
        }
    }
    None
}

fn matching_backward(toks: &[Token], close: usize, lower: usize) -> Option<usize> {
    let (o, c) = match toks.get(close)?.text.as_str() {
        ")" => ("(", ")"),
        "]" => ("[", "]"),
        ">" => ("<", ">"),
        _ => return None,
    };
    let mut depth = 0usize;
    let mut i = close;
    loop {
        let t = &toks[i];
        if t.is(c) {
            depth += 1;
        } else if t.is(o) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
        if i == lower {
            return None;
        }
        i -= 1;
    }
}

/// Splits a token slice at commas outside any bracket pair.
pub(crate) fn split_top_level(toks: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    if toks.is_empty() {
        return out;
    }
    let mut depth = 0i32;
    let mut start = 0;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        match t.text.as_str() {
            "(" | "[" | "{" | "<" => depth += 1,
            ")" | "]" | "}" | ">" => depth -= 1,
            "," if depth == 0 => {
                out.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    out.push(&toks[start..]);
    out
}

/// `final @A Map<K, V> name` -> ("Map<K, V>", "name").
fn param_parts(group: &[Token]) -> Option<(String, String)> {
    let mut toks: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < group.len() {
        let t = &group[i];
        if t.is("@") {
            i += 2;
            while i + 1 < group.len() && group[i].is(".") {
                i += 2;
            }
            if i < group.len() && group[i].is("(") {
                let close = matching_forward(group, i)?;
                i = close + 1;
            }
            continue;
        }
        if !t.is("final") {
            toks.push(t.clone());
        }
        i += 1;
    }
    let mut dims = String::new();
    while toks.len() >= 2 && toks[toks.len() - 1].is("]") && toks[toks.len() - 2].is("[") {
        toks.truncate(toks.len() - 2);
        dims.push_str("[]");
    }
    let name = toks.pop()?;
    if !name.is_ident() || toks.is_empty() {
        return None;
    }
    Some((format!("{}{dims}", join_tokens(&toks)), name.text))
}

fn is_call_name(t: &Token) -> bool {
    t.kind == TokenKind::Ident
}

/// Finds invocation sites among `toks[lo..hi]`.
pub(crate) fn scan_invocations(toks: &[Token], text: &str, lo: usize, hi: usize) -> Vec<InvocationSite> {
    let mut sites = Vec::new();
    for i in lo..hi {
        let t = &toks[i];
        if !is_call_name(t) || !toks.get(i + 1).is_some_and(|n| n.is("(")) {
            continue;
        }
        let Some(pclose) = matching_forward(toks, i + 1) else { continue };
        if pclose > hi {
            continue;
        }
        let receiver_text = if i > lo && toks[i - 1].is(".") {
            if i - 1 == lo {
                continue;
            }
            match receiver_start(toks, i - 2, lo) {
                Some(start) => text[toks[start].start..toks[i - 1].start].trim_end().to_string(),
                None => continue,
            }
        } else {
            if i > lo {
                let p = &toks[i - 1];
                let declaration_like = p.is_ident()
                    || PRIMITIVES.contains(&p.text.as_str())
                    || p.is("new")
                    || p.is("@")
                    || p.is("::");
                if declaration_like {
                    continue;
                }
            }
            // `void run() {` inside an anonymous class.
            if toks.get(pclose + 1).is_some_and(|n| n.is("{") || n.is("throws")) {
                continue;
            }
            String::new()
        };
        sites.push(InvocationSite {
            receiver_text,
            method_name: t.text.clone(),
            arg_count: count_args(&toks[i + 2..pclose]),
            line: t.line,
            column: t.column,
            offset: t.start,
            call_end: toks[pclose].end,
        });
    }
    sites
}

/// Walks left from `end` (the token just before a `.`) over one postfix
/// expression and returns the index of its first token.
fn receiver_start(toks: &[Token], end: usize, lo: usize) -> Option<usize> {
    let mut j = end;
    loop {
        let (start, call_piece) = piece_start(toks, j, lo)?;
        if start > lo && toks[start - 1].is("new") {
            return if call_piece { Some(start - 1) } else { None };
        }
        if start > lo + 1 && toks[start - 1].is(".") {
            j = start - 2;
            continue;
        }
        return Some(start);
    }
}

fn piece_start(toks: &[Token], j: usize, lo: usize) -> Option<(usize, bool)> {
    let t = &toks[j];
    match t.text.as_str() {
        "]" => {
            let open = matching_backward(toks, j, lo)?;
            if open == lo {
                return None;
            }
            piece_start(toks, open - 1, lo)
        }
        ")" => {
            let open = matching_backward(toks, j, lo)?;
            if open > lo && toks[open - 1].is_ident() {
                Some((open - 1, true))
            } else if open > lo && toks[open - 1].is(">") {
                // new Foo<>(...)
                let lt = matching_backward(toks, open - 1, lo)?;
                if lt > lo && toks[lt - 1].is_ident() {
                    Some((lt - 1, true))
                } else {
                    None
                }
            } else {
                Some((open, false))
            }
        }
        "this" | "super" | "class" => Some((j, false)),
        _ if t.is_ident() || t.kind == TokenKind::Literal => Some((j, false)),
        _ => None,
    }
}

fn count_args(args: &[Token]) -> usize {
    if args.is_empty() {
        return 0;
    }
    let mut depth = 0i32;
    let mut commas = 0;
    let mut i = 0;
    while i < args.len() {
        let t = &args[i];
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "," if depth == 0 => commas += 1,
            "new" => {
                // Skip the instantiated type so `new HashMap<A, B>()` is one argument.
                let mut k = i + 1;
                while k < args.len() && (args[k].is_ident() || args[k].is(".")) {
                    k += 1;
                }
                if k < args.len() && args[k].is("<") {
                    if let Some(close) = matching_forward(args, k) {
                        i = close;
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    commas + 1
}
