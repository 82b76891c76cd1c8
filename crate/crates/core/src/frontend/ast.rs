use std::fmt;

use serde::{Deserialize, Serialize};

/// A 1-based line/column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub const START: Pos = Pos { line: 1, col: 1 };

    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

/// Inclusive source range. `end` points at the last character covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: Pos,
    pub end: Pos,
}

impl Span {
    pub fn new(start: Pos, end: Pos) -> Self {
        Self { start, end }
    }

    pub fn point(p: Pos) -> Self {
        Self { start: p, end: p }
    }

    pub fn encloses(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn cover(&self, other: &Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}:{}",
            self.start.line, self.start.col, self.end.line, self.end.col
        )
    }
}

macro_rules! node_kinds {
    ($($name:ident),* $(,)?) => {
        /// The fixed catalog of AST node kinds.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum NodeKind {
            $($name),*
        }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[$(NodeKind::$name),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(NodeKind::$name => stringify!($name)),*
                }
            }
        }
    };
}

node_kinds! {
    SourceUnitNode,
    PragmaDirective,
    ImportDirective,
    ContractDefinition,
    InheritanceSpecifier,
    UsingForDirective,
    FunctionDefinition,
    ModifierDefinition,
    ModifierInvocation,
    StateVariableDeclaration,
    StructDefinition,
    StructMember,
    EnumDefinition,
    EventDefinition,
    ParameterList,
    Parameter,
    Block,
    // statements
    IfStatement,
    ForStatement,
    WhileStatement,
    DoWhileStatement,
    ReturnStatement,
    ExpressionStatement,
    VariableDeclarationStatement,
    EmitStatement,
    PlaceholderStatement,
    BreakStatement,
    ContinueStatement,
    ThrowStatement,
    InlineAssemblyStatement,
    UnknownStatement,
    // expressions
    Assignment,
    BinaryOp,
    UnaryOp,
    ConditionalExpr,
    FunctionCall,
    NewExpr,
    MemberAccess,
    IndexAccess,
    IdentifierExpr,
    LiteralExpr,
    TupleExpr,
    // types and names
    TypeName,
    Mapping,
    ArrayTypeName,
    Identifier,
    Keyword,
    Operator,
}

impl NodeKind {
    /// Leaf kinds never have children; they are the only kinds carrying a lexeme.
    pub fn is_leaf(self) -> bool {
        use NodeKind::*;
        matches!(
            self,
            PragmaDirective
                | ImportDirective
                | PlaceholderStatement
                | BreakStatement
                | ContinueStatement
                | ThrowStatement
                | InlineAssemblyStatement
                | UnknownStatement
                | IdentifierExpr
                | LiteralExpr
                | TypeName
                | Identifier
                | Keyword
                | Operator
        )
    }

    /// Statement kinds that become statement-granularity fragments.
    ///
    /// `Block` and `UnknownStatement` are excluded: a block is a container and an
    /// unknown statement carries no content after recovery.
    pub fn is_statement(self) -> bool {
        use NodeKind::*;
        matches!(
            self,
            IfStatement
                | ForStatement
                | WhileStatement
                | DoWhileStatement
                | ReturnStatement
                | ExpressionStatement
                | VariableDeclarationStatement
                | EmitStatement
                | PlaceholderStatement
                | BreakStatement
                | ContinueStatement
                | ThrowStatement
                | InlineAssemblyStatement
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub children: Vec<AstNode>,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_lexeme: Option<String>,
}

impl AstNode {
    pub fn leaf(kind: NodeKind, lexeme: Option<String>, span: Span) -> Self {
        debug_assert!(kind.is_leaf());
        Self {
            kind,
            children: Vec::new(),
            span,
            leaf_lexeme: lexeme,
        }
    }

    /// Interior node; the span is widened to cover every child.
    pub fn branch(kind: NodeKind, children: Vec<AstNode>, span: Span) -> Self {
        let span = children.iter().fold(span, |acc, c| acc.cover(&c.span));
        Self {
            kind,
            children,
            span,
            leaf_lexeme: None,
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a AstNode)) {
        visit(self);
        for c in &self.children {
            c.walk(visit);
        }
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        let mut n = 0;
        self.walk(&mut |node| {
            if node.kind == kind {
                n += 1
            }
        });
        n
    }

    /// Indented `kind@line:col [lexeme]` dump, one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(0, &mut out);
        out
    }

    fn dump_into(&self, depth: usize, out: &mut String) {
        use std::fmt::Write;
        for _ in 0..depth {
            out.push_str("  ");
        }
        let _ = write!(
            out,
            "{}@{}:{}",
            self.kind, self.span.start.line, self.span.start.col
        );
        if let Some(lex) = &self.leaf_lexeme {
            let _ = write!(out, " [{}]", lex);
        }
        out.push('\n');
        for c in &self.children {
            c.dump_into(depth + 1, out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, at: Pos) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            line: at.line,
            col: at.col,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.col, sev, self.message)
    }
}
