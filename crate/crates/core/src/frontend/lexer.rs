//! Solidity lexer.
//!
//! Comments and whitespace are consumed silently. Malformed input never stops
//! the lexer: unterminated strings and block comments produce a diagnostic and
//! lexing resumes at the start of the following line.

use serde::{Deserialize, Serialize};

use super::ast::{Diagnostic, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    NumberLiteral,
    StringLiteral,
    HexLiteral,
    AddressLiteral,
    Punctuator,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexToken {
    pub kind: TokenKind,
    pub lexeme: String,
    pub line: u32,
    pub col: u32,
}

impl LexToken {
    pub fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    /// Position of the last character of the lexeme.
    pub fn end(&self) -> Pos {
        let mut line = self.line;
        let mut col = self.col;
        let mut first = true;
        for ch in self.lexeme.chars() {
            if first {
                first = false;
                continue;
            }
            if ch == '\n' {
                line += 1;
                col = 0;
            } else {
                col += 1;
            }
        }
        Pos::new(line, col.max(1))
    }

    pub fn is(&self, lexeme: &str) -> bool {
        self.lexeme == lexeme
    }
}

/// Number of hex digits that make a `0x` literal an address.
pub const ADDRESS_HEX_DIGITS: usize = 40;

const KEYWORDS: &[&str] = &[
    "abstract",
    "anonymous",
    "as",
    "assembly",
    "break",
    "calldata",
    "constant",
    "constructor",
    "continue",
    "contract",
    "delete",
    "do",
    "else",
    "emit",
    "enum",
    "event",
    "external",
    "false",
    "for",
    "function",
    "hex",
    "if",
    "import",
    "indexed",
    "interface",
    "internal",
    "is",
    "library",
    "mapping",
    "memory",
    "modifier",
    "new",
    "payable",
    "pragma",
    "private",
    "public",
    "pure",
    "return",
    "returns",
    "storage",
    "struct",
    "throw",
    "true",
    "using",
    "var",
    "view",
    "while",
    // elementary types
    "address",
    "bool",
    "string",
    "byte",
    "bytes",
    "int",
    "uint",
    "fixed",
    "ufixed",
    // units
    "wei",
    "gwei",
    "szabo",
    "finney",
    "ether",
    "seconds",
    "minutes",
    "hours",
    "days",
    "weeks",
    "years",
];

/// Sized elementary types such as `uint256`, `bytes32`, `int8`.
pub fn is_sized_type(word: &str) -> bool {
    let sized = |prefix: &str, ok: &dyn Fn(u32) -> bool| {
        word.strip_prefix(prefix)
            .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|rest| rest.parse::<u32>().ok())
            .is_some_and(ok)
    };
    sized("uint", &|n| n % 8 == 0 && (8..=256).contains(&n))
        || sized("int", &|n| n % 8 == 0 && (8..=256).contains(&n))
        || sized("bytes", &|n| (1..=32).contains(&n))
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word) || is_sized_type(word)
}

pub fn is_elementary_type(word: &str) -> bool {
    matches!(
        word,
        "address"
            | "bool"
            | "string"
            | "byte"
            | "bytes"
            | "int"
            | "uint"
            | "fixed"
            | "ufixed"
            | "var"
    ) || is_sized_type(word)
}

pub fn is_unit(word: &str) -> bool {
    matches!(
        word,
        "wei"
            | "gwei"
            | "szabo"
            | "finney"
            | "ether"
            | "seconds"
            | "minutes"
            | "hours"
            | "days"
            | "weeks"
            | "years"
    )
}

const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "**", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!",
    "~", "&", "|", "^", "?", ":",
];

const PUNCTUATORS: &[&str] = &["=>", "{", "}", "(", ")", "[", "]", ";", ",", "."];

struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: u32,
    col: u32,
    tokens: Vec<LexToken>,
    diagnostics: Vec<Diagnostic>,
}

impl Lexer {
    fn new(text: &str) -> Self {
        Self {
            chars: text.chars().collect(),
            i: 0,
            line: 1,
            col: 1,
            tokens: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.i + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.chars.get(self.i).copied()?;
        self.i += 1;
        if ch == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(ch)
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn skip_to_next_line(&mut self) {
        while let Some(ch) = self.bump() {
            if ch == '\n' {
                break;
            }
        }
    }

    fn push(&mut self, kind: TokenKind, lexeme: String, at: Pos) {
        self.tokens.push(LexToken {
            kind,
            lexeme,
            line: at.line,
            col: at.col,
        });
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(k, c)| self.peek(k) == Some(c))
    }

    fn run(mut self) -> (Vec<LexToken>, Vec<Diagnostic>) {
        while let Some(ch) = self.peek(0) {
            let start = self.pos();
            if ch.is_whitespace() {
                self.bump();
            } else if self.starts_with("//") {
                self.skip_to_next_line();
            } else if self.starts_with("/*") {
                self.block_comment(start);
            } else if ch == '"' || ch == '\'' {
                if let Some(lex) = self.quoted(start) {
                    self.push(TokenKind::StringLiteral, lex, start);
                }
            } else if ch.is_ascii_digit()
                || (ch == '.' && self.peek(1).is_some_and(|c| c.is_ascii_digit()))
            {
                self.number(start);
            } else if is_ident_start(ch) {
                self.word(start);
            } else if let Some(op) = self.symbol() {
                self.push(op.0, op.1, start);
            } else {
                self.bump();
                self.diagnostics.push(Diagnostic::error(
                    format!("unexpected character {:?}", ch),
                    start,
                ));
            }
        }
        (self.tokens, self.diagnostics)
    }

    fn block_comment(&mut self, start: Pos) {
        let save = (self.i, self.line, self.col);
        self.bump();
        self.bump();
        while self.peek(0).is_some() {
            if self.starts_with("*/") {
                self.bump();
                self.bump();
                return;
            }
            self.bump();
        }
        self.diagnostics
            .push(Diagnostic::error("unterminated block comment", start));
        (self.i, self.line, self.col) = save;
        self.skip_to_next_line();
    }

    /// Lexes a quoted literal including its quotes. On a missing closing quote
    /// a diagnostic is emitted and the rest of the line is dropped.
    fn quoted(&mut self, start: Pos) -> Option<String> {
        let quote = self.bump()?;
        let mut lex = String::from(quote);
        loop {
            match self.peek(0) {
                None | Some('\n') => {
                    self.diagnostics
                        .push(Diagnostic::error("unterminated string literal", start));
                    self.skip_to_next_line();
                    return None;
                }
                Some('\\') => {
                    lex.push(self.bump()?);
                    match self.peek(0) {
                        Some('\n') | None => {}
                        Some(_) => lex.push(self.bump()?),
                    }
                }
                Some(c) if c == quote => {
                    lex.push(self.bump()?);
                    return Some(lex);
                }
                Some(_) => lex.push(self.bump()?),
            }
        }
    }

    fn number(&mut self, start: Pos) {
        let mut lex = String::new();
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('x') | Some('X')) {
            lex.push(self.bump().unwrap());
            lex.push(self.bump().unwrap());
            let mut digits = 0;
            while let Some(c) = self.peek(0) {
                if c.is_ascii_hexdigit() {
                    digits += 1;
                } else if c != '_' {
                    break;
                }
                lex.push(c);
                self.bump();
            }
            let kind = if digits == ADDRESS_HEX_DIGITS {
                TokenKind::AddressLiteral
            } else {
                TokenKind::HexLiteral
            };
            self.push(kind, lex, start);
            return;
        }
        let digits = |this: &mut Self, lex: &mut String| {
            while let Some(c) = this.peek(0) {
                if c.is_ascii_digit() || c == '_' {
                    lex.push(c);
                    this.bump();
                } else {
                    break;
                }
            }
        };
        digits(self, &mut lex);
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            lex.push(self.bump().unwrap());
            digits(self, &mut lex);
        }
        if matches!(self.peek(0), Some('e') | Some('E')) {
            let sign = usize::from(self.peek(1) == Some('-'));
            if self.peek(1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                for _ in 0..=sign {
                    lex.push(self.bump().unwrap());
                }
                digits(self, &mut lex);
            }
        }
        self.push(TokenKind::NumberLiteral, lex, start);
    }

    fn word(&mut self, start: Pos) {
        let mut lex = String::new();
        while let Some(c) = self.peek(0) {
            if is_ident_continue(c) {
                lex.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if lex == "hex" && matches!(self.peek(0), Some('"') | Some('\'')) {
            if let Some(body) = self.quoted(start) {
                lex.push_str(&body);
                self.push(TokenKind::HexLiteral, lex, start);
            }
            return;
        }
        let kind = if is_keyword(&lex) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, lex, start);
    }

    fn symbol(&mut self) -> Option<(TokenKind, String)> {
        for p in PUNCTUATORS {
            if self.starts_with(p) {
                for _ in 0..p.chars().count() {
                    self.bump();
                }
                return Some((TokenKind::Punctuator, p.to_string()));
            }
        }
        for op in OPERATORS {
            if self.starts_with(op) {
                for _ in 0..op.chars().count() {
                    self.bump();
                }
                return Some((TokenKind::Operator, op.to_string()));
            }
        }
        None
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

/// Tokenizes `text`, discarding diagnostics.
pub fn tokenize(text: &str) -> Vec<LexToken> {
    tokenize_with_diagnostics(text).0
}

pub fn tokenize_with_diagnostics(text: &str) -> (Vec<LexToken>, Vec<Diagnostic>) {
    Lexer::new(text).run()
}
