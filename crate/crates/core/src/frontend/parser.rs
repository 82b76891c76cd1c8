//! Hand-written recursive-descent parser for the 0.4.x/0.5.x Solidity surface.
//!
//! Expressions use precedence climbing. The parser never aborts: a failing
//! statement or member is skipped up to the next `;` (or the `}` matching a
//! brace opened during the skip) and replaced by an `UnknownStatement` leaf.

use super::ast::{AstNode, Diagnostic, NodeKind, Pos, Span};
use super::lexer::{is_elementary_type, is_unit, tokenize_with_diagnostics, LexToken, TokenKind};

const MAX_DEPTH: usize = 200;

/// Marker for a failure whose diagnostic has already been recorded.
#[derive(Debug)]
struct Failed;

type PResult<T> = Result<T, Failed>;

pub(crate) struct Parser {
    toks: Vec<LexToken>,
    pos: usize,
    diags: Vec<Diagnostic>,
    eof: Pos,
    depth: usize,
}

pub fn parse_text(text: &str) -> (AstNode, Vec<Diagnostic>) {
    let (toks, mut diags) = tokenize_with_diagnostics(text);
    let eof = toks.last().map(|t| t.end()).unwrap_or(Pos::START);
    let mut p = Parser {
        toks,
        pos: 0,
        diags: Vec::new(),
        eof,
        depth: 0,
    };
    let root = p.source_unit();
    diags.append(&mut p.diags);
    (root, diags)
}

impl Parser {
    // ---- token helpers ----

    fn peek(&self) -> Option<&LexToken> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&LexToken> {
        self.toks.get(self.pos + k)
    }

    fn at(&self, lexeme: &str) -> bool {
        self.peek().is_some_and(|t| t.is(lexeme))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> Pos {
        self.peek().map(|t| t.pos()).unwrap_or(self.eof)
    }

    fn prev_end(&self) -> Pos {
        if self.pos == 0 {
            Pos::START
        } else {
            self.toks[self.pos - 1].end()
        }
    }

    fn bump(&mut self) -> LexToken {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn eat(&mut self, lexeme: &str) -> bool {
        if self.at(lexeme) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error<T>(&mut self, msg: impl Into<String>) -> PResult<T> {
        let at = self.here();
        let found = match self.peek() {
            Some(t) => format!("'{}'", t.lexeme),
            None => "end of input".to_string(),
        };
        self.diags.push(Diagnostic::error(
            format!("{}, found {}", msg.into(), found),
            at,
        ));
        Err(Failed)
    }

    fn expect(&mut self, lexeme: &str) -> PResult<LexToken> {
        if self.at(lexeme) {
            Ok(self.bump())
        } else {
            self.error(format!("expected '{}'", lexeme))
        }
    }

    fn span_from(&self, start: Pos) -> Span {
        let end = self.prev_end().max(start);
        Span::new(start, end)
    }

    fn leaf_tok(&self, kind: NodeKind, tok: &LexToken) -> AstNode {
        AstNode::leaf(
            kind,
            Some(tok.lexeme.clone()),
            Span::new(tok.pos(), tok.end()),
        )
    }

    fn take_leaf(&mut self, kind: NodeKind) -> AstNode {
        let tok = self.bump();
        self.leaf_tok(kind, &tok)
    }

    fn ident(&mut self) -> PResult<AstNode> {
        if self.at_kind(TokenKind::Identifier) {
            Ok(self.take_leaf(NodeKind::Identifier))
        } else {
            self.error("expected identifier")
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return self.error("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Skips to the next `;` (consumed) or to the `}` closing a brace opened during
    /// the skip (consumed). A `}` belonging to an enclosing construct is left in place.
    fn recover(&mut self) {
        let mut braces = 0usize;
        while let Some(t) = self.peek() {
            match t.lexeme.as_str() {
                ";" if braces == 0 => {
                    self.pos += 1;
                    return;
                }
                "{" => braces += 1,
                "}" => {
                    if braces == 0 {
                        return;
                    }
                    braces -= 1;
                    if braces == 0 {
                        self.pos += 1;
                        return;
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn unknown_since(&self, start_idx: usize) -> AstNode {
        let span = if self.pos > start_idx {
            Span::new(self.toks[start_idx].pos(), self.prev_end())
        } else {
            Span::point(self.here().min(self.eof))
        };
        AstNode::leaf(NodeKind::UnknownStatement, None, span)
    }

    /// Runs `f`; on failure recovers and yields an `UnknownStatement`.
    fn guarded(&mut self, f: impl FnOnce(&mut Self) -> PResult<AstNode>) -> AstNode {
        let start_idx = self.pos;
        let depth = self.depth;
        match f(self) {
            Ok(node) => node,
            Err(Failed) => {
                self.depth = depth;
                self.recover();
                self.unknown_since(start_idx)
            }
        }
    }

    // ---- top level ----

    fn source_unit(&mut self) -> AstNode {
        let mut children = Vec::new();
        while !self.at_eof() {
            let before = self.pos;
            let node = self.guarded(|p| p.top_level_item());
            children.push(node);
            if self.pos == before {
                // stray closing brace at top level
                self.pos += 1;
            }
        }
        AstNode::branch(NodeKind::SourceUnitNode, children, Span::point(Pos::START))
    }

    fn top_level_item(&mut self) -> PResult<AstNode> {
        let tok = self.peek().cloned().expect("not at eof");
        match tok.lexeme.as_str() {
            "pragma" => self.directive(NodeKind::PragmaDirective),
            "import" => self.directive(NodeKind::ImportDirective),
            "contract" | "interface" | "library" | "abstract" => self.contract(),
            "struct" => self.struct_def(),
            "enum" => self.enum_def(),
            _ => self.error("expected pragma, import or contract definition"),
        }
    }

    /// `pragma name ...;` and `import ...;` are kept as leaves: the pragma name,
    /// or the first string literal (the import path).
    fn directive(&mut self, kind: NodeKind) -> PResult<AstNode> {
        let start = self.bump().pos();
        let mut lexeme = None;
        while !self.at(";") {
            let Some(t) = self.peek() else {
                return self.error("expected ';'");
            };
            if kind == NodeKind::PragmaDirective && (t.is("{") || t.is("}")) {
                return self.error("expected ';'");
            }
            let take = match kind {
                NodeKind::PragmaDirective => lexeme.is_none(),
                _ => lexeme.is_none() && t.kind == TokenKind::StringLiteral,
            };
            if take {
                lexeme = Some(t.lexeme.clone());
            }
            self.pos += 1;
        }
        self.bump();
        Ok(AstNode::leaf(kind, lexeme, self.span_from(start)))
    }

    fn contract(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let mut children = Vec::new();
        if self.at("abstract") {
            children.push(self.take_leaf(NodeKind::Keyword));
        }
        match self.peek() {
            Some(t) if matches!(t.lexeme.as_str(), "contract" | "interface" | "library") => {
                children.push(self.take_leaf(NodeKind::Keyword));
            }
            _ => return self.error("expected 'contract', 'interface' or 'library'"),
        }
        if self.at_kind(TokenKind::Identifier) {
            children.push(self.take_leaf(NodeKind::Identifier));
        } else {
            // keep going without a name so the body is still analysed
            let _ = self.error::<()>("expected contract name");
        }
        if self.eat("is") {
            loop {
                children.push(self.inheritance_specifier()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("{")?;
        while !self.at("}") && !self.at_eof() {
            let node = self.guarded(|p| p.contract_member());
            children.push(node);
        }
        if !self.eat("}") {
            let _ = self.error::<()>("expected '}' to close contract");
        }
        Ok(AstNode::branch(
            NodeKind::ContractDefinition,
            children,
            self.span_from(start),
        ))
    }

    fn inheritance_specifier(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let mut children = vec![self.user_type_path()?];
        if self.at("(") {
            children.extend(self.call_arguments()?);
        }
        Ok(AstNode::branch(
            NodeKind::InheritanceSpecifier,
            children,
            self.span_from(start),
        ))
    }

    fn contract_member(&mut self) -> PResult<AstNode> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected contract member");
        };
        match tok.lexeme.as_str() {
            "function" | "constructor" => self.function(),
            "modifier" => self.modifier_def(),
            "event" => self.event_def(),
            "struct" => self.struct_def(),
            "enum" => self.enum_def(),
            "using" => self.using_for(),
            _ => self.state_variable(),
        }
    }

    fn function(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let mut children = Vec::new();
        if self.at("constructor") {
            children.push(self.take_leaf(NodeKind::Keyword));
        } else {
            self.expect("function")?;
            if self.at_kind(TokenKind::Identifier) {
                children.push(self.take_leaf(NodeKind::Identifier));
            }
        }
        children.push(self.parameter_list(false)?);
        while let Some(t) = self.peek().cloned() {
            match (t.kind, t.lexeme.as_str()) {
                (
                    TokenKind::Keyword,
                    "public" | "private" | "internal" | "external" | "pure" | "view" | "payable"
                    | "constant",
                ) => children.push(self.take_leaf(NodeKind::Keyword)),
                (TokenKind::Identifier, _) => children.push(self.modifier_invocation()?),
                (TokenKind::Keyword, "returns") => {
                    children.push(self.take_leaf(NodeKind::Keyword));
                    children.push(self.parameter_list(false)?);
                }
                _ => break,
            }
        }
        if !self.eat(";") {
            children.push(self.block()?);
        }
        Ok(AstNode::branch(
            NodeKind::FunctionDefinition,
            children,
            self.span_from(start),
        ))
    }

    fn modifier_invocation(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let mut children = vec![self.ident()?];
        while self.at(".")
            && self
                .peek_at(1)
                .is_some_and(|t| t.kind == TokenKind::Identifier)
        {
            self.bump();
            children.push(self.take_leaf(NodeKind::Identifier));
        }
        if self.at("(") {
            children.extend(self.call_arguments()?);
        }
        Ok(AstNode::branch(
            NodeKind::ModifierInvocation,
            children,
            self.span_from(start),
        ))
    }

    fn modifier_def(&mut self) -> PResult<AstNode> {
        let start = self.bump().pos();
        let mut children = vec![self.ident()?];
        if self.at("(") {
            children.push(self.parameter_list(false)?);
        }
        // `virtual` / `override` and friends
        while self.at_kind(TokenKind::Identifier) {
            self.bump();
        }
        if !self.eat(";") {
            children.push(self.block()?);
        }
        Ok(AstNode::branch(
            NodeKind::ModifierDefinition,
            children,
            self.span_from(start),
        ))
    }

    fn event_def(&mut self) -> PResult<AstNode> {
        let start = self.bump().pos();
        let mut children = vec![self.ident()?, self.parameter_list(true)?];
        if self.at("anonymous") {
            children.push(self.take_leaf(NodeKind::Keyword));
        }
        self.expect(";")?;
        Ok(AstNode::branch(
            NodeKind::EventDefinition,
            children,
            self.span_from(start),
        ))
    }

    fn struct_def(&mut self) -> PResult<AstNode> {
        let start = self.bump().pos();
        let mut children = vec![self.ident()?];
        self.expect("{")?;
        while !self.at("}") && !self.at_eof() {
            let member = self.guarded(|p| {
                let start = p.here();
                let ty = p.type_name()?;
                let name = p.ident()?;
                p.expect(";")?;
                Ok(AstNode::branch(
                    NodeKind::StructMember,
                    vec![ty, name],
                    p.span_from(start),
                ))
            });
            children.push(member);
        }
        self.expect("}")?;
        Ok(AstNode::branch(
            NodeKind::StructDefinition,
            children,
            self.span_from(start),
        ))
    }

    fn enum_def(&mut self) -> PResult<AstNode> {
        let start = self.bump().pos();
        let mut children = vec![self.ident()?];
        self.expect("{")?;
        while !self.at("}") {
            children.push(self.ident()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(AstNode::branch(
            NodeKind::EnumDefinition,
            children,
            self.span_from(start),
        ))
    }

    fn using_for(&mut self) -> PResult<AstNode> {
        let start = self.bump().pos();
        let mut children = vec![self.user_type_path()?];
        self.expect("for")?;
        if self.at("*") {
            children.push(self.take_leaf(NodeKind::Operator));
        } else {
            children.push(self.type_name()?);
        }
        self.expect(";")?;
        Ok(AstNode::branch(
            NodeKind::UsingForDirective,
            children,
            self.span_from(start),
        ))
    }

    fn state_variable(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let mut children = vec![self.type_name()?];
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Keyword
                && matches!(
                    t.lexeme.as_str(),
                    "public" | "private" | "internal" | "constant"
                )
            {
                children.push(self.take_leaf(NodeKind::Keyword));
            } else {
                break;
            }
        }
        children.push(self.ident()?);
        if self.eat("=") {
            children.push(self.expression()?);
        }
        self.expect(";")?;
        Ok(AstNode::branch(
            NodeKind::StateVariableDeclaration,
            children,
            self.span_from(start),
        ))
    }

    /// `(type [location|indexed] [name], ...)`
    fn parameter_list(&mut self, allow_indexed: bool) -> PResult<AstNode> {
        let start = self.expect("(")?.pos();
        let mut children = Vec::new();
        if !self.at(")") {
            loop {
                let pstart = self.here();
                let mut param = vec![self.type_name()?];
                while let Some(t) = self.peek() {
                    let is_qual = matches!(t.lexeme.as_str(), "memory" | "storage" | "calldata")
                        || (allow_indexed && t.is("indexed"));
                    if is_qual {
                        param.push(self.take_leaf(NodeKind::Keyword));
                    } else {
                        break;
                    }
                }
                if self.at_kind(TokenKind::Identifier) {
                    param.push(self.take_leaf(NodeKind::Identifier));
                }
                children.push(AstNode::branch(
                    NodeKind::Parameter,
                    param,
                    self.span_from(pstart),
                ));
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(AstNode::branch(
            NodeKind::ParameterList,
            children,
            self.span_from(start),
        ))
    }

    // ---- types ----

    fn user_type_path(&mut self) -> PResult<AstNode> {
        if !self.at_kind(TokenKind::Identifier) {
            return self.error("expected type name");
        }
        let start = self.here();
        let mut node = self.take_leaf(NodeKind::TypeName);
        while self.at(".")
            && self
                .peek_at(1)
                .is_some_and(|t| t.kind == TokenKind::Identifier)
        {
            self.bump();
            let member = self.take_leaf(NodeKind::Identifier);
            node = AstNode::branch(
                NodeKind::MemberAccess,
                vec![node, member],
                self.span_from(start),
            );
        }
        Ok(node)
    }

    fn type_name(&mut self) -> PResult<AstNode> {
        self.enter()?;
        let r = self.type_name_inner();
        self.leave();
        r
    }

    fn type_name_inner(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected type name");
        };
        let mut node = if tok.is("mapping") {
            self.bump();
            self.expect("(")?;
            let key = self.type_name()?;
            self.expect("=>")?;
            let value = self.type_name()?;
            self.expect(")")?;
            AstNode::branch(NodeKind::Mapping, vec![key, value], self.span_from(start))
        } else if tok.is("function") {
            self.function_type()?
        } else if tok.kind == TokenKind::Keyword && is_elementary_type(&tok.lexeme) {
            let node = self.take_leaf(NodeKind::TypeName);
            if tok.is("address") {
                self.eat("payable");
            }
            node
        } else if tok.kind == TokenKind::Identifier {
            self.user_type_path()?
        } else {
            return self.error("expected type name");
        };
        while self.at("[") {
            self.bump();
            let mut children = vec![node];
            if !self.at("]") {
                children.push(self.expression()?);
            }
            self.expect("]")?;
            node = AstNode::branch(NodeKind::ArrayTypeName, children, self.span_from(start));
        }
        Ok(node)
    }

    /// Function types are kept as an opaque `function` type leaf.
    fn function_type(&mut self) -> PResult<AstNode> {
        let tok = self.bump();
        self.skip_balanced("(", ")")?;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Keyword
                && matches!(
                    t.lexeme.as_str(),
                    "internal" | "external" | "pure" | "view" | "payable" | "constant"
                )
            {
                self.bump();
            } else if t.is("returns") {
                self.bump();
                self.skip_balanced("(", ")")?;
            } else {
                break;
            }
        }
        Ok(AstNode::leaf(
            NodeKind::TypeName,
            Some(tok.lexeme.clone()),
            Span::new(tok.pos(), tok.end()),
        ))
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect(open)?;
        let mut depth = 1usize;
        while depth > 0 {
            let Some(t) = self.peek() else {
                return self.error(format!("expected '{}'", close));
            };
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
            }
            self.pos += 1;
        }
        Ok(())
    }

    // ---- declaration lookahead ----

    /// Index just past a type name starting at `i`, without consuming anything.
    fn scan_type(&self, mut i: usize) -> Option<usize> {
        let t = self.toks.get(i)?;
        if t.is("mapping") {
            i = self.scan_balanced(i + 1, "(", ")")?;
        } else if t.is("function") {
            i = self.scan_balanced(i + 1, "(", ")")?;
            while let Some(t) = self.toks.get(i) {
                if matches!(
                    t.lexeme.as_str(),
                    "internal" | "external" | "pure" | "view" | "payable" | "constant"
                ) {
                    i += 1;
                } else if t.is("returns") {
                    i = self.scan_balanced(i + 1, "(", ")")?;
                } else {
                    break;
                }
            }
        } else if t.kind == TokenKind::Keyword && is_elementary_type(&t.lexeme) {
            i += 1;
            if t.is("address") && self.toks.get(i).is_some_and(|t| t.is("payable")) {
                i += 1;
            }
        } else if t.kind == TokenKind::Identifier {
            i += 1;
            while self.toks.get(i).is_some_and(|t| t.is("."))
                && self
                    .toks
                    .get(i + 1)
                    .is_some_and(|t| t.kind == TokenKind::Identifier)
            {
                i += 2;
            }
        } else {
            return None;
        }
        while self.toks.get(i).is_some_and(|t| t.is("[")) {
            i = self.scan_balanced(i, "[", "]")?;
        }
        Some(i)
    }

    fn scan_balanced(&self, i: usize, open: &str, close: &str) -> Option<usize> {
        if !self.toks.get(i)?.is(open) {
            return None;
        }
        let mut depth = 0usize;
        let mut j = i;
        while let Some(t) = self.toks.get(j) {
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
                if depth == 0 {
                    return Some(j + 1);
                }
            }
            j += 1;
        }
        None
    }

    /// `type [location] name` starting at `i`; returns the index past the name.
    fn scan_declaration(&self, i: usize) -> Option<usize> {
        let mut j = self.scan_type(i)?;
        if self
            .toks
            .get(j)
            .is_some_and(|t| matches!(t.lexeme.as_str(), "memory" | "storage" | "calldata"))
        {
            j += 1;
        }
        (self.toks.get(j)?.kind == TokenKind::Identifier).then_some(j + 1)
    }

    fn looks_like_declaration(&self) -> bool {
        let i = self.pos;
        if let Some(j) = self.scan_declaration(i) {
            return self.toks.get(j).is_some_and(|t| t.is("=") || t.is(";"));
        }
        // `var (a, b) = ...` and `(uint a, , bool c) = ...`
        let (k, typed) = if self.toks.get(i).is_some_and(|t| t.is("var")) {
            (i + 1, true)
        } else {
            (i, false)
        };
        if !self.toks.get(k).is_some_and(|t| t.is("(")) {
            return false;
        }
        let mut j = k + 1;
        let mut any_decl = false;
        loop {
            match self.toks.get(j) {
                Some(t) if t.is(",") => j += 1,
                Some(t) if t.is(")") => {
                    return (any_decl || typed) && self.toks.get(j + 1).is_some_and(|t| t.is("="));
                }
                Some(t) if typed && t.kind == TokenKind::Identifier => {
                    any_decl = true;
                    j += 1;
                }
                Some(_) if !typed => match self.scan_declaration(j) {
                    Some(next) => {
                        any_decl = true;
                        j = next;
                    }
                    None => return false,
                },
                _ => return false,
            }
        }
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<AstNode> {
        let start = self.expect("{")?.pos();
        let mut children = Vec::new();
        while !self.at("}") && !self.at_eof() {
            let node = self.guarded(|p| p.statement());
            children.push(node);
        }
        if !self.eat("}") {
            let _ = self.error::<()>("expected '}' to close block");
        }
        Ok(AstNode::branch(
            NodeKind::Block,
            children,
            self.span_from(start),
        ))
    }

    fn statement(&mut self) -> PResult<AstNode> {
        self.enter()?;
        let r = self.statement_inner();
        self.leave();
        r
    }

    fn statement_inner(&mut self) -> PResult<AstNode> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected statement");
        };
        let start = tok.pos();
        let simple = |p: &mut Self, kind: NodeKind| -> PResult<AstNode> {
            p.bump();
            p.expect(";")?;
            Ok(AstNode::leaf(kind, None, p.span_from(start)))
        };
        match tok.lexeme.as_str() {
            "{" => self.block(),
            "if" => {
                self.bump();
                self.expect("(")?;
                let mut children = vec![self.expression()?];
                self.expect(")")?;
                children.push(self.statement()?);
                if self.eat("else") {
                    children.push(self.statement()?);
                }
                Ok(AstNode::branch(
                    NodeKind::IfStatement,
                    children,
                    self.span_from(start),
                ))
            }
            "for" => self.for_statement(),
            "while" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expression()?;
                self.expect(")")?;
                let body = self.statement()?;
                Ok(AstNode::branch(
                    NodeKind::WhileStatement,
                    vec![cond, body],
                    self.span_from(start),
                ))
            }
            "do" => {
                self.bump();
                let body = self.statement()?;
                self.expect("while")?;
                self.expect("(")?;
                let cond = self.expression()?;
                self.expect(")")?;
                self.expect(";")?;
                Ok(AstNode::branch(
                    NodeKind::DoWhileStatement,
                    vec![body, cond],
                    self.span_from(start),
                ))
            }
            "return" => {
                self.bump();
                let mut children = Vec::new();
                if !self.at(";") {
                    children.push(self.expression()?);
                }
                self.expect(";")?;
                Ok(AstNode::branch(
                    NodeKind::ReturnStatement,
                    children,
                    self.span_from(start),
                ))
            }
            "emit" => {
                self.bump();
                let call = self.expression()?;
                self.expect(";")?;
                Ok(AstNode::branch(
                    NodeKind::EmitStatement,
                    vec![call],
                    self.span_from(start),
                ))
            }
            "throw" => simple(self, NodeKind::ThrowStatement),
            "break" => simple(self, NodeKind::BreakStatement),
            "continue" => simple(self, NodeKind::ContinueStatement),
            "_" if self.peek_at(1).is_some_and(|t| t.is(";")) => {
                simple(self, NodeKind::PlaceholderStatement)
            }
            "assembly" => {
                self.bump();
                if self.at_kind(TokenKind::StringLiteral) {
                    self.bump();
                }
                self.skip_balanced("{", "}")?;
                Ok(AstNode::leaf(
                    NodeKind::InlineAssemblyStatement,
                    None,
                    self.span_from(start),
                ))
            }
            _ => self.simple_statement(),
        }
    }

    /// Variable declaration or expression statement, including the trailing `;`.
    fn simple_statement(&mut self) -> PResult<AstNode> {
        let start = self.here();
        if self.looks_like_declaration() {
            let children = self.declaration_parts()?;
            self.expect(";")?;
            return Ok(AstNode::branch(
                NodeKind::VariableDeclarationStatement,
                children,
                self.span_from(start),
            ));
        }
        let expr = self.expression()?;
        self.expect(";")?;
        Ok(AstNode::branch(
            NodeKind::ExpressionStatement,
            vec![expr],
            self.span_from(start),
        ))
    }

    fn declaration_parts(&mut self) -> PResult<Vec<AstNode>> {
        let mut children = Vec::new();
        if self.at("var") && self.peek_at(1).is_some_and(|t| t.is("(")) {
            children.push(self.take_leaf(NodeKind::TypeName));
            self.bump();
            while !self.at(")") {
                if !self.eat(",") {
                    children.push(self.ident()?);
                }
            }
            self.bump();
        } else if self.at("(") {
            self.bump();
            while !self.at(")") {
                if self.eat(",") {
                    continue;
                }
                children.push(self.type_name()?);
                if self.at("memory") || self.at("storage") || self.at("calldata") {
                    children.push(self.take_leaf(NodeKind::Keyword));
                }
                children.push(self.ident()?);
            }
            self.bump();
        } else {
            children.push(self.type_name()?);
            if self.at("memory") || self.at("storage") || self.at("calldata") {
                children.push(self.take_leaf(NodeKind::Keyword));
            }
            children.push(self.ident()?);
        }
        if self.eat("=") {
            children.push(self.expression()?);
        }
        Ok(children)
    }

    fn for_statement(&mut self) -> PResult<AstNode> {
        let start = self.bump().pos();
        self.expect("(")?;
        let mut children = Vec::new();
        if !self.eat(";") {
            children.push(self.simple_statement()?);
        }
        if !self.at(";") {
            children.push(self.expression()?);
        }
        self.expect(";")?;
        if !self.at(")") {
            children.push(self.expression()?);
        }
        self.expect(")")?;
        children.push(self.statement()?);
        Ok(AstNode::branch(
            NodeKind::ForStatement,
            children,
            self.span_from(start),
        ))
    }

    // ---- expressions ----

    fn expression(&mut self) -> PResult<AstNode> {
        self.enter()?;
        let r = self.assignment();
        self.leave();
        r
    }

    fn assignment(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let lhs = self.conditional()?;
        let is_assign = self.peek().is_some_and(|t| {
            t.kind == TokenKind::Operator
                && matches!(
                    t.lexeme.as_str(),
                    "=" | "+="
                        | "-="
                        | "*="
                        | "/="
                        | "%="
                        | "|="
                        | "&="
                        | "^="
                        | "<<="
                        | ">>="
                        | ">>>="
                )
        });
        if !is_assign {
            return Ok(lhs);
        }
        let op = self.take_leaf(NodeKind::Operator);
        let rhs = self.expression()?;
        Ok(AstNode::branch(
            NodeKind::Assignment,
            vec![lhs, op, rhs],
            self.span_from(start),
        ))
    }

    fn conditional(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let cond = self.binary(1)?;
        if !self.eat("?") {
            return Ok(cond);
        }
        let then = self.expression()?;
        self.expect(":")?;
        let otherwise = self.expression()?;
        Ok(AstNode::branch(
            NodeKind::ConditionalExpr,
            vec![cond, then, otherwise],
            self.span_from(start),
        ))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<AstNode> {
        let start = self.here();
        let mut lhs = self.unary()?;
        while let Some((prec, right_assoc)) = self
            .peek()
            .filter(|t| t.kind == TokenKind::Operator)
            .and_then(|t| binary_precedence(&t.lexeme))
        {
            if prec < min_prec {
                break;
            }
            let op = self.take_leaf(NodeKind::Operator);
            self.enter()?;
            let rhs = self.binary(if right_assoc { prec } else { prec + 1 });
            self.leave();
            lhs = AstNode::branch(
                NodeKind::BinaryOp,
                vec![lhs, op, rhs?],
                self.span_from(start),
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let prefix = self.peek().is_some_and(|t| {
            (t.kind == TokenKind::Operator
                && matches!(t.lexeme.as_str(), "!" | "~" | "-" | "+" | "++" | "--"))
                || t.is("delete")
        });
        if prefix {
            let op = self.take_leaf(NodeKind::Operator);
            self.enter()?;
            let operand = self.unary();
            self.leave();
            return Ok(AstNode::branch(
                NodeKind::UnaryOp,
                vec![op, operand?],
                self.span_from(start),
            ));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<AstNode> {
        let start = self.here();
        let mut expr = self.primary()?;
        loop {
            if self.at(".") {
                self.bump();
                let member = match self.peek() {
                    // `.address`, `.balance` etc. may be keywords in some positions
                    Some(t) if matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) => {
                        self.take_leaf(NodeKind::Identifier)
                    }
                    _ => return self.error("expected member name"),
                };
                expr = AstNode::branch(
                    NodeKind::MemberAccess,
                    vec![expr, member],
                    self.span_from(start),
                );
            } else if self.at("[") {
                self.bump();
                let mut children = vec![expr];
                if !self.at("]") {
                    children.push(self.expression()?);
                }
                self.expect("]")?;
                expr = AstNode::branch(NodeKind::IndexAccess, children, self.span_from(start));
            } else if self.at("(") {
                let mut children = vec![expr];
                children.extend(self.call_arguments()?);
                expr = AstNode::branch(NodeKind::FunctionCall, children, self.span_from(start));
            } else if self.at("++") || self.at("--") {
                let op = self.take_leaf(NodeKind::Operator);
                expr = AstNode::branch(NodeKind::UnaryOp, vec![expr, op], self.span_from(start));
            } else {
                break;
            }
        }
        Ok(expr)
    }

    /// `(a, b)` or `({name: value, ...})`; named arguments keep their names as
    /// `Identifier` leaves in front of each value.
    fn call_arguments(&mut self) -> PResult<Vec<AstNode>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat("{") {
            while !self.at("}") {
                args.push(self.ident()?);
                self.expect(":")?;
                args.push(self.expression()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
        } else if !self.at(")") {
            loop {
                args.push(self.expression()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected expression");
        };
        let start = tok.pos();
        match tok.kind {
            TokenKind::Identifier => Ok(self.take_leaf(NodeKind::IdentifierExpr)),
            TokenKind::NumberLiteral => {
                let lit = self.take_leaf(NodeKind::LiteralExpr);
                // unit suffixes scale the value and are erased with it
                if self.peek().is_some_and(|t| is_unit(&t.lexeme)) {
                    self.bump();
                }
                Ok(lit)
            }
            TokenKind::StringLiteral | TokenKind::HexLiteral | TokenKind::AddressLiteral => {
                Ok(self.take_leaf(NodeKind::LiteralExpr))
            }
            TokenKind::Keyword => match tok.lexeme.as_str() {
                "true" | "false" => Ok(self.take_leaf(NodeKind::LiteralExpr)),
                "new" => {
                    self.bump();
                    let ty = self.type_name()?;
                    Ok(AstNode::branch(
                        NodeKind::NewExpr,
                        vec![ty],
                        self.span_from(start),
                    ))
                }
                "payable" => Ok(self.take_leaf(NodeKind::TypeName)),
                w if is_elementary_type(w) => {
                    let mut node = self.take_leaf(NodeKind::TypeName);
                    // `uint[]` in `new`-less positions such as `uint[](n)` is rare; `uint[2]` casts are not Solidity
                    if self.at("[") && self.peek_at(1).is_some_and(|t| t.is("]")) {
                        self.bump();
                        self.bump();
                        node = AstNode::branch(
                            NodeKind::ArrayTypeName,
                            vec![node],
                            self.span_from(start),
                        );
                    }
                    Ok(node)
                }
                _ => self.error("expected expression"),
            },
            TokenKind::Punctuator if tok.is("(") || tok.is("[") => {
                let close = if tok.is("(") { ")" } else { "]" };
                self.bump();
                let mut items = Vec::new();
                let mut commas = 0;
                while !self.at(close) {
                    if self.eat(",") {
                        commas += 1;
                        continue;
                    }
                    items.push(self.expression()?);
                    if !self.at(close) {
                        self.expect(",")?;
                        commas += 1;
                    }
                }
                self.bump();
                if tok.is("(") && commas == 0 && items.len() == 1 {
                    return Ok(items.pop().expect("one item"));
                }
                Ok(AstNode::branch(
                    NodeKind::TupleExpr,
                    items,
                    self.span_from(start),
                ))
            }
            _ => self.error("expected expression"),
        }
    }
}

/// Binding power of a binary operator and whether it associates to the right.
fn binary_precedence(op: &str) -> Option<(u8, bool)> {
    Some(match op {
        "||" => (1, false),
        "&&" => (2, false),
        "==" | "!=" => (3, false),
        "<" | ">" | "<=" | ">=" => (4, false),
        "|" => (5, false),
        "^" => (6, false),
        "&" => (7, false),
        "<<" | ">>" | ">>>" => (8, false),
        "+" | "-" => (9, false),
        "*" | "/" | "%" => (10, false),
        "**" => (11, true),
        _ => return None,
    })
}
