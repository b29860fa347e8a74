//! Tokenizer for the Java subset understood by the source parser.
//!
//! Comments and whitespace are dropped. Every token keeps its byte span and a
//! 1-based line / 0-based byte column so later stages can slice verbatim text.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword,
    /// Numeric, string, char and text-block literals.
    Literal,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "true", "false", "null",
];

pub const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short", "void",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

// Longest first.
const PUNCT: &[&str] = &[
    ">>>=", "<<=", ">>=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", "(", ")", "{", "}", "[", "]", ";", ",", ".",
    "@", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Splits `text` into tokens. `>>` and `>>>` are emitted as separate `>`
/// tokens so generic argument lists close cleanly.
pub fn lex(text: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(text).run()
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0, line: 1, line_start: 0, tokens: Vec::new() }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>, line: usize, column: usize) -> LexError {
        LexError { message: message.into(), line, column }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: usize, column: usize) {
        self.tokens.push(Token {
            kind,
            text: self.text[start..self.pos].to_string(),
            start,
            end: self.pos,
            line,
            column,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            let line = self.line;
            let column = self.pos - self.line_start;
            if c.is_whitespace() {
                self.bump();
            } else if c == '/' && self.peek_at(1) == Some('/') {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c == '/' && self.peek_at(1) == Some('*') {
                self.bump();
                self.bump();
                loop {
                    match self.bump() {
                        Some('*') if self.peek() == Some('/') => {
                            self.bump();
                            break;
                        }
                        Some(_) => {}
                        None => return Err(self.error("unterminated block comment", line, column)),
                    }
                }
            } else if c == '"' {
                if self.text[self.pos..].starts_with("\"\"\"") {
                    self.text_block(line, column)?;
                } else {
                    self.quoted('"', line, column)?;
                }
                self.push(TokenKind::Literal, start, line, column);
            } else if c == '\'' {
                self.quoted('\'', line, column)?;
                self.push(TokenKind::Literal, start, line, column);
            } else if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
                self.number(start);
                self.push(TokenKind::Literal, start, line, column);
            } else if is_ident_start(c) {
                while self.peek().is_some_and(is_ident_part) {
                    self.bump();
                }
                let kind = if is_keyword(&self.text[start..self.pos]) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Ident
                };
                self.push(kind, start, line, column);
            } else {
                let rest = &self.text[self.pos..];
                let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
                    return Err(self.error(format!("unexpected character {c:?}"), line, column));
                };
                for _ in 0..p.chars().count() {
                    self.bump();
                }
                self.push(TokenKind::Punct, start, line, column);
            }
        }
        Ok(self.tokens)
    }

    fn quoted(&mut self, quote: char, line: usize, column: usize) -> Result<(), LexError> {
        self.bump();
        loop {
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some(c) if c == quote => return Ok(()),
                Some('\n') | None => return Err(self.error("unterminated literal", line, column)),
                Some(_) => {}
            }
        }
    }

    fn text_block(&mut self, line: usize, column: usize) -> Result<(), LexError> {
        for _ in 0..3 {
            self.bump();
        }
        loop {
            if self.text[self.pos..].starts_with("\"\"\"") {
                for _ in 0..3 {
                    self.bump();
                }
                return Ok(());
            }
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some(_) => {}
                None => return Err(self.error("unterminated text block", line, column)),
            }
        }
    }

    fn number(&mut self, start: usize) {
        let hex = self.text[start..].starts_with("0x") || self.text[start..].starts_with("0X");
        let exponent: &[char] = if hex { &['p', 'P'] } else { &['e', 'E'] };
        while let Some(c) = self.peek() {
            let signed_exponent =
                (c == '+' || c == '-') && self.text[start..self.pos].ends_with(exponent);
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || signed_exponent {
                self.bump();
            } else {
                break;
            }
        }
    }
}
