//! Seeded generator of synthetic Solidity contracts with injected clones and
//! planted bug statements, for tests and benchmarks.
//!
//! A contract is kept as lines of text interleaved with literal holes so it can
//! be re-rendered with different literal values and layout while its
//! normalized token streams stay identical.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Num,
    Str,
    Addr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Line {
    depth: usize,
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticContract {
    pub name: String,
    lines: Vec<Line>,
}

/// Layout and literal choices for rendering a contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderStyle {
    /// Seed for literal values; the same seed always yields the same values.
    pub literal_seed: u64,
    /// Alternate indentation, spacing and line breaks.
    pub reformat: bool,
    /// Sprinkle line and block comments.
    pub comments: bool,
}

const STATE_VARS: &[&str] = &[
    "total", "counter", "limit", "rate", "supply", "price", "deadline", "bonus", "fee", "reward",
    "stake", "quota", "level", "cap", "epoch",
];
const MAPPINGS: &[&str] = &[
    "balances", "allowed", "deposits", "scores", "credits", "shares", "votes", "claims",
];
const FUNCTIONS: &[&str] = &[
    "deposit",
    "withdraw",
    "update",
    "compute",
    "settle",
    "claim",
    "register",
    "adjust",
    "collect",
    "refresh",
    "configure",
    "redeem",
    "lock",
    "release",
    "audit",
];
const PARAMS: &[&str] = &[
    "amount", "value", "who", "idx", "count", "delta", "target", "factor",
];
const EVENTS: &[&str] = &["Updated", "Moved", "Logged", "Changed"];

fn text(s: impl Into<String>) -> Piece {
    Piece::Text(s.into())
}

/// Splits a template on `#N`, `#S` and `#A` holes.
fn pieces(template: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(i) = rest.find('#') {
        if i > 0 {
            out.push(text(&rest[..i]));
        }
        out.push(match rest.as_bytes().get(i + 1) {
            Some(b'N') => Piece::Num,
            Some(b'S') => Piece::Str,
            Some(b'A') => Piece::Addr,
            _ => panic!("bad hole in template {template:?}"),
        });
        rest = &rest[i + 2..];
    }
    if !rest.is_empty() {
        out.push(text(rest));
    }
    out
}

impl SyntheticContract {
    /// Renders the contract. Two renderings differ only in literal values,
    /// whitespace and comments.
    pub fn render(&self, style: &RenderStyle) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(style.literal_seed);
        let mut out = String::from("pragma solidity ^0.4.24;\n\n");
        for (n, line) in self.lines.iter().enumerate() {
            if style.comments && n % 3 == 1 {
                if n % 2 == 0 {
                    out.push_str(&format!("{}// step {n}\n", indent(line.depth, style)));
                } else {
                    out.push_str(&format!("{}/* block {n} */\n", indent(line.depth, style)));
                }
            }
            out.push_str(&indent(line.depth, style));
            for p in &line.pieces {
                match p {
                    Piece::Text(t) if style.reformat => out.push_str(&reformat(t)),
                    Piece::Text(t) => out.push_str(t),
                    Piece::Num => out.push_str(&rng.random_range(1..100_000u32).to_string()),
                    Piece::Str => {
                        out.push_str(&format!("\"msg {}\"", rng.random_range(0..1000u32)))
                    }
                    Piece::Addr => {
                        let hex: String = (0..40)
                            .map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap())
                            .collect();
                        out.push_str(&format!("0x{hex}"));
                    }
                }
            }
            out.push('\n');
            if style.reformat && n % 4 == 0 {
                out.push('\n');
            }
        }
        out
    }

    /// Inserts a statement (function-body source) as the first statement of
    /// the `n`-th function, wrapping around.
    pub fn plant_statement(&mut self, statement: &str, n: usize) {
        let heads: Vec<usize> = self
            .lines
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                matches!(l.pieces.first(), Some(Piece::Text(t)) if t.starts_with("function "))
            })
            .map(|(i, _)| i)
            .collect();
        let at = heads[n % heads.len()] + 1;
        self.lines.insert(
            at,
            Line {
                depth: 2,
                pieces: pieces(statement),
            },
        );
    }
}

fn indent(depth: usize, style: &RenderStyle) -> String {
    if style.reformat {
        "\t".repeat(depth)
    } else {
        "    ".repeat(depth)
    }
}

fn reformat(t: &str) -> String {
    t.replace(" = ", "=")
        .replace(", ", " ,\n\t\t\t")
        .replace("{ ", "{\n  ")
}

/// Deterministic contract generator.
pub struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn contract(&mut self, name: &str) -> SyntheticContract {
        let rng = &mut self.rng;
        let mut lines = vec![Line {
            depth: 0,
            pieces: vec![text(format!("contract {name} {{"))],
        }];
        let n_vars = rng.random_range(2..5);
        let vars: Vec<&str> = STATE_VARS.choose_multiple(rng, n_vars).copied().collect();
        let n_maps = rng.random_range(1..3);
        let maps: Vec<&str> = MAPPINGS.choose_multiple(rng, n_maps).copied().collect();
        let event = *EVENTS.choose(rng).unwrap();
        for v in &vars {
            lines.push(Line {
                depth: 1,
                pieces: pieces(&format!("uint256 public {v} = #N;")),
            });
        }
        for m in &maps {
            lines.push(Line {
                depth: 1,
                pieces: pieces(&format!("mapping(address => uint256) {m};")),
            });
        }
        lines.push(Line {
            depth: 1,
            pieces: pieces("address owner = #A;"),
        });
        lines.push(Line {
            depth: 1,
            pieces: pieces("string label = #S;"),
        });
        lines.push(Line {
            depth: 1,
            pieces: pieces(&format!("event {event}(address who, uint256 value);")),
        });

        let n_funcs = rng.random_range(2..6);
        let funcs: Vec<&str> = FUNCTIONS.choose_multiple(rng, n_funcs).copied().collect();
        for f in funcs {
            let p = *PARAMS.choose(rng).unwrap();
            let returns = rng.random_bool(0.4);
            let head = if returns {
                format!("function {f}(uint256 {p}) public returns (uint256) {{")
            } else {
                format!("function {f}(uint256 {p}) public {{")
            };
            lines.push(Line {
                depth: 1,
                pieces: vec![text(head)],
            });
            for _ in 0..rng.random_range(2..6) {
                let v = *vars.choose(rng).unwrap();
                let w = *vars.choose(rng).unwrap();
                let m = *maps.choose(rng).unwrap();
                let stmt = match rng.random_range(0..12) {
                    0 => format!("{v} = {w} + #N;"),
                    1 => format!("require({p} > #N);"),
                    2 => format!("{m}[msg.sender] = {p} * #N;"),
                    3 => format!("if ({p} < #N) {{ {v} = {p}; }} else {{ {v} = #N; }}"),
                    4 => format!("for (uint256 i = #N; i < {p}; i++) {{ {v} += i; }}"),
                    5 => format!("emit {event}(msg.sender, {p});"),
                    6 => format!("{v} = {m}[msg.sender] - {p};"),
                    7 => format!("while ({v} > #N) {{ {v} -= {p}; }}"),
                    8 => "require(msg.sender == owner, #S);".to_string(),
                    9 => format!("{m}[msg.sender] += {w};"),
                    10 => format!("uint256 tmp = {p} / #N;"),
                    _ => format!("{w} = ({v} * {p}) % #N;"),
                };
                lines.push(Line {
                    depth: 2,
                    pieces: pieces(&stmt),
                });
            }
            if returns {
                let v = *vars.choose(rng).unwrap();
                lines.push(Line {
                    depth: 2,
                    pieces: pieces(&format!("return {v} + {p};")),
                });
            }
            lines.push(Line {
                depth: 1,
                pieces: vec![text("}")],
            });
        }
        lines.push(Line {
            depth: 0,
            pieces: vec![text("}")],
        });
        SyntheticContract {
            name: name.to_string(),
            lines,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// A generated source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticFile {
    pub path: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloneKind {
    /// Same literals, different layout and comments.
    Exact,
    /// Different literals and layout.
    LiteralMutated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub original: String,
    pub clone: String,
    pub kind: CloneKind,
}

/// Corpus of `originals` distinct contracts followed by clones of the first
/// `exact + mutated` of them.
pub fn clone_corpus(
    seed: u64,
    originals: usize,
    exact: usize,
    mutated: usize,
) -> (Vec<SyntheticFile>, Vec<Injection>) {
    assert!(exact + mutated <= originals);
    let mut g = Generator::new(seed);
    let contracts: Vec<SyntheticContract> = (0..originals)
        .map(|i| g.contract(&format!("Token{i}")))
        .collect();
    let mut files: Vec<SyntheticFile> = contracts
        .iter()
        .enumerate()
        .map(|(i, c)| SyntheticFile {
            path: format!("c{i:03}.sol"),
            text: c.render(&RenderStyle {
                literal_seed: i as u64,
                ..RenderStyle::default()
            }),
        })
        .collect();
    let mut log = Vec::new();
    for j in 0..exact + mutated {
        let kind = if j < exact {
            CloneKind::Exact
        } else {
            CloneKind::LiteralMutated
        };
        let style = RenderStyle {
            literal_seed: match kind {
                CloneKind::Exact => j as u64,
                CloneKind::LiteralMutated => 1_000_000 + j as u64,
            },
            reformat: true,
            comments: true,
        };
        let path = format!("c{:03}.sol", originals + j);
        files.push(SyntheticFile {
            path: path.clone(),
            text: contracts[j].render(&style),
        });
        log.push(Injection {
            original: files[j].path.clone(),
            clone: path,
            kind,
        });
    }
    (files, log)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    pub path: String,
    pub verbatim: bool,
}

/// `total` contracts; the first `verbatim + mutated` carry `statement` (which
/// may contain `#N` literal holes), rendered with its given literals in the
/// verbatim ones and with other literals in the mutated ones.
pub fn bug_corpus(
    seed: u64,
    total: usize,
    statement: &str,
    literals: &[u32],
    verbatim: usize,
    mutated: usize,
) -> (Vec<SyntheticFile>, Vec<Plant>) {
    let mut g = Generator::new(seed);
    let mut files = Vec::new();
    let mut plants = Vec::new();
    for i in 0..total {
        let mut c = g.contract(&format!("Vault{i}"));
        let path = format!("v{i:03}.sol");
        if i < verbatim + mutated {
            let is_verbatim = i < verbatim;
            let mut lits = literals.iter();
            let mut filled = String::new();
            for p in pieces(statement) {
                match p {
                    Piece::Text(t) => filled.push_str(&t),
                    Piece::Num => {
                        let v = lits.next().copied().unwrap_or(1);
                        let v = if is_verbatim { v } else { v + 7 + i as u32 };
                        filled.push_str(&v.to_string());
                    }
                    Piece::Str => filled.push_str("\"x\""),
                    Piece::Addr => filled.push_str("0x0000000000000000000000000000000000000000"),
                }
            }
            let n = g.rng().random_range(0..8);
            c.plant_statement(&filled, n);
            plants.push(Plant {
                path: path.clone(),
                verbatim: is_verbatim,
            });
        }
        files.push(SyntheticFile {
            path,
            text: c.render(&RenderStyle {
                literal_seed: seed ^ i as u64,
                ..RenderStyle::default()
            }),
        });
    }
    (files, plants)
}

/// Contracts whose statements total roughly `statements`.
pub fn sized_corpus(seed: u64, statements: usize) -> Vec<SyntheticFile> {
    let mut g = Generator::new(seed);
    let mut out = Vec::new();
    let mut count = 0;
    let mut i = 0;
    while count < statements {
        let c = g.contract(&format!("Bulk{i}"));
        let text = c.render(&RenderStyle {
            literal_seed: i as u64,
            ..RenderStyle::default()
        });
        count += crate::normalizer::extract_fragments(&crate::frontend::SourceUnit::new(
            crate::frontend::SourceId(0),
            "",
            text.as_str(),
        ))
        .fragments
        .iter()
        .filter(|f| f.granularity == crate::normalizer::Granularity::Statement)
        .count();
        out.push(SyntheticFile {
            path: format!("b{i:05}.sol"),
            text,
        });
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_text;

    #[test]
    fn generated_contracts_parse_cleanly() {
        let mut g = Generator::new(3);
        for i in 0..30 {
            let c = g.contract(&format!("T{i}"));
            for style in [
                RenderStyle::default(),
                RenderStyle {
                    literal_seed: 9,
                    reformat: true,
                    comments: true,
                },
            ] {
                let text = c.render(&style);
                let (_, diags) = parse_text(&text);
                assert!(diags.is_empty(), "{diags:?}\n{text}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = clone_corpus(5, 10, 2, 2);
        let b = clone_corpus(5, 10, 2, 2);
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 14);
        assert_eq!(a.1.len(), 4);
    }

    #[test]
    fn clones_differ_in_bytes() {
        let (files, log) = clone_corpus(1, 4, 2, 2);
        for inj in log {
            let o = files.iter().find(|f| f.path == inj.original).unwrap();
            let c = files.iter().find(|f| f.path == inj.clone).unwrap();
            assert_ne!(o.text, c.text);
        }
    }

    #[test]
    fn planted_statement_parses() {
        let (files, plants) = bug_corpus(2, 6, "x = y + #N;", &[5], 2, 2);
        assert_eq!(plants.len(), 4);
        for f in &files {
            let (_, diags) = parse_text(&f.text);
            assert!(diags.is_empty(), "{diags:?}\n{}", f.text);
        }
        assert!(files[0].text.contains("x = y + 5;"));
        assert!(!files[2].text.contains("x = y + 5;"));
    }
}
