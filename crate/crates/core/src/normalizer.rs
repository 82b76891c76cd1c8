//! Fragment serialization and token normalization.
//!
//! Every contract, function/modifier and statement node becomes a fragment whose
//! raw stream is the pre-order walk of its subtree: the node-kind name for every
//! node followed by the lexeme of every leaf. Normalization then erases literal
//! values and drops separator tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::digest::Digest;
use crate::frontend::{self, AstNode, Diagnostic, NodeKind, SourceId, SourceUnit, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Contract,
    Function,
    Statement,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [
        Granularity::Contract,
        Granularity::Function,
        Granularity::Statement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Contract => "contract",
            Granularity::Function => "function",
            Granularity::Statement => "statement",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn of(kind: NodeKind) -> Option<Granularity> {
        match kind {
            NodeKind::ContractDefinition => Some(Granularity::Contract),
            NodeKind::FunctionDefinition | NodeKind::ModifierDefinition => {
                Some(Granularity::Function)
            }
            k if k.is_statement() => Some(Granularity::Statement),
            _ => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contract" => Ok(Granularity::Contract),
            "function" => Ok(Granularity::Function),
            "statement" => Ok(Granularity::Statement),
            other => Err(format!(
                "unknown granularity '{other}' (expected contract, function or statement)"
            )),
        }
    }
}

/// Fragment identifier: source id plus pre-order ordinal within the source.
/// Rendered as `source:ordinal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FragmentId {
    pub source: SourceId,
    pub ordinal: u32,
}

impl FragmentId {
    pub fn new(source: SourceId, ordinal: u32) -> Self {
        Self { source, ordinal }
    }
}

impl fmt::Display for FragmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source.0, self.ordinal)
    }
}

impl FromStr for FragmentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("invalid fragment id '{s}'"))?;
        let source = a
            .parse()
            .map_err(|_| format!("invalid fragment id '{s}'"))?;
        let ordinal = b
            .parse()
            .map_err(|_| format!("invalid fragment id '{s}'"))?;
        Ok(Self::new(SourceId(source), ordinal))
    }
}

impl Serialize for FragmentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FragmentId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream(pub Vec<String>);

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        Self(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digest(&self) -> Digest {
        Digest::of_tokens(&self.0)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenStream {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub fragment_id: FragmentId,
    pub source_id: SourceId,
    pub granularity: Granularity,
    pub span: Span,
    pub parent_id: Option<FragmentId>,
    pub stream: TokenStream,
}

/// One fragment per contract, function/modifier and statement node, in
/// pre-order. Statements are parented to their enclosing function, functions
/// to their contract. Streams are raw (not yet normalized).
pub fn serialize_fragments(root: &AstNode, source_id: SourceId) -> Vec<Fragment> {
    let mut out = Vec::new();
    let mut walker = Walker {
        source_id,
        out: &mut out,
        contract: None,
        function: None,
    };
    walker.visit(root);
    out
}

struct Walker<'a> {
    source_id: SourceId,
    out: &'a mut Vec<Fragment>,
    contract: Option<FragmentId>,
    function: Option<FragmentId>,
}

impl Walker<'_> {
    fn visit(&mut self, node: &AstNode) {
        let Some(granularity) = Granularity::of(node.kind) else {
            for c in &node.children {
                self.visit(c);
            }
            return;
        };
        let id = FragmentId::new(self.source_id, self.out.len() as u32);
        let parent_id = match granularity {
            Granularity::Contract => None,
            Granularity::Function => self.contract,
            Granularity::Statement => self.function.or(self.contract),
        };
        let mut raw = Vec::new();
        raw_stream(node, &mut raw);
        self.out.push(Fragment {
            fragment_id: id,
            source_id: self.source_id,
            granularity,
            span: node.span,
            parent_id,
            stream: TokenStream(raw),
        });
        let saved = (self.contract, self.function);
        match granularity {
            Granularity::Contract => {
                self.contract = Some(id);
                self.function = None;
            }
            Granularity::Function => self.function = Some(id),
            Granularity::Statement => {}
        }
        for c in &node.children {
            self.visit(c);
        }
        (self.contract, self.function) = saved;
    }
}

fn raw_stream(node: &AstNode, out: &mut Vec<String>) {
    out.push(node.kind.name().to_string());
    if let Some(lex) = &node.leaf_lexeme {
        out.push(lex.clone());
    }
    for c in &node.children {
        raw_stream(c, out);
    }
}

pub const NUM: &str = "NUM";
pub const STR: &str = "STR";
pub const HEX: &str = "HEX";
pub const ADDR: &str = "ADDR";

/// Maps one raw token through the normalization table. `None` means the token
/// is a stop token and is removed.
pub fn normalize_token(token: &str) -> Option<&str> {
    let bytes = token.as_bytes();
    let first = *bytes.first()?;
    if token == ";" || token == "," {
        return None;
    }
    if first == b'"' || first == b'\'' {
        return Some(STR);
    }
    if token.starts_with("hex\"") || token.starts_with("hex'") {
        return Some(HEX);
    }
    if let Some(rest) = token
        .strip_prefix("0x")
        .or_else(|| token.strip_prefix("0X"))
    {
        let digits = rest.bytes().filter(u8::is_ascii_hexdigit).count();
        return Some(if digits == frontend::ADDRESS_HEX_DIGITS {
            ADDR
        } else {
            HEX
        });
    }
    if first.is_ascii_digit() || (first == b'.' && bytes.get(1).is_some_and(u8::is_ascii_digit)) {
        return Some(NUM);
    }
    Some(token)
}

/// Applies the normalization table elementwise and deletes stop tokens.
pub fn normalize(stream: &TokenStream) -> TokenStream {
    TokenStream(
        stream
            .0
            .iter()
            .filter_map(|t| normalize_token(t).map(str::to_string))
            .collect(),
    )
}

/// Parse, serialize and normalize a source unit.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub fragments: Vec<Fragment>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn extract_fragments(unit: &SourceUnit) -> Extraction {
    let parsed = frontend::parse(unit);
    let mut fragments = serialize_fragments(&parsed.root, unit.id);
    for f in &mut fragments {
        f.stream = normalize(&f.stream);
    }
    Extraction {
        fragments,
        diagnostics: parsed.diagnostics,
    }
}
