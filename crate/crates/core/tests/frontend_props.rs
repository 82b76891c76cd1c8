use proptest::prelude::*;
use solembed::frontend::{parse_text, AstNode, NodeKind};

const WORDS: &[&str] = &[
    "contract",
    "library",
    "interface",
    "function",
    "modifier",
    "event",
    "struct",
    "enum",
    "pragma",
    "solidity",
    "^0.4.24",
    "import",
    "returns",
    "return",
    "if",
    "else",
    "for",
    "while",
    "emit",
    "public",
    "private",
    "internal",
    "external",
    "view",
    "payable",
    "uint256",
    "address",
    "mapping",
    "=>",
    "bool",
    "string",
    "msg",
    ".",
    "sender",
    "value",
    "require",
    "(",
    ")",
    "{",
    "}",
    "[",
    "]",
    ";",
    ",",
    "=",
    "+=",
    "==",
    "+",
    "-",
    "*",
    "/",
    "%",
    "!",
    "&&",
    "x",
    "y",
    "balances",
    "owner",
    "1",
    "0x10",
    "\"s\"",
    "true",
    "now",
    "_;",
    "//c\n",
    "/*c*/",
];

fn soup() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..80).prop_map(|w| w.join(" "))
}

fn nested(node: &AstNode) -> bool {
    node.children
        .iter()
        .all(|c| node.span.encloses(&c.span) && nested(c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,400}") {
        let (root, _) = parse_text(&text);
        prop_assert_eq!(root.kind, NodeKind::SourceUnitNode);
    }

    #[test]
    fn parsing_is_deterministic(text in soup()) {
        prop_assert_eq!(parse_text(&text), parse_text(&text));
    }

    #[test]
    fn child_spans_nest_in_parent(text in soup()) {
        let (root, _) = parse_text(&text);
        prop_assert!(nested(&root), "{}", root.dump());
    }

    #[test]
    fn token_soup_inside_a_function_never_panics(body in soup()) {
        let text = format!("contract C {{ function f() public {{ {body} }} }}");
        let (root, _) = parse_text(&text);
        prop_assert!(nested(&root));
    }
}

#[test]
fn well_formed_contract_has_no_diagnostics() {
    let src = r#"
pragma solidity ^0.4.24;
contract Bank {
    mapping(address => uint256) balances;
    event Deposit(address indexed who, uint256 amount);
    function deposit() public payable {
        balances[msg.sender] += msg.value;
        emit Deposit(msg.sender, msg.value);
    }
}
"#;
    let (root, diags) = parse_text(src);
    assert!(diags.is_empty(), "{diags:?}");
    assert_eq!(root.count(NodeKind::ContractDefinition), 1);
    assert_eq!(root.count(NodeKind::FunctionDefinition), 1);
    assert_eq!(root.count(NodeKind::EmitStatement), 1);
}
