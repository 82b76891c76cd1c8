use proptest::prelude::*;
use solembed::frontend::{SourceId, SourceUnit};
use solembed::normalizer::{extract_fragments, normalize, TokenStream};
use solembed::synthetic::{Generator, RenderStyle};

fn streams(text: &str) -> Vec<(solembed::normalizer::Granularity, TokenStream)> {
    extract_fragments(&SourceUnit::new(SourceId(1), "c.sol", text))
        .fragments
        .into_iter()
        .map(|f| (f.granularity, f.stream))
        .collect()
}

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(";".to_string()),
        Just(",".to_string()),
        "[0-9]{1,6}",
        "0x[0-9a-f]{40}",
        "0x[0-9a-f]{1,8}",
        "\"[a-z ]{0,6}\"",
        "'[a-z]{0,4}'",
        "hex\"[0-9a-f]{2,6}\"",
        "[A-Za-z_][A-Za-z0-9_]{0,8}",
        Just("NUM".to_string()),
        Just("ADDR".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_is_idempotent(tokens in prop::collection::vec(token(), 0..40)) {
        let s: TokenStream = tokens.iter().map(String::as_str).collect();
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once.clone());
        prop_assert!(once.tokens().iter().all(|t| t != ";" && t != ","));
    }

    #[test]
    fn literal_values_and_layout_are_invisible(seed in 0u64..1_000, a in 0u64..1_000, b in 0u64..1_000) {
        let c = Generator::new(seed).contract("Probe");
        let plain = c.render(&RenderStyle { literal_seed: a, reformat: false, comments: false });
        let varied = c.render(&RenderStyle { literal_seed: b, reformat: true, comments: true });
        prop_assert_eq!(streams(&plain), streams(&varied));
    }
}

#[test]
fn literal_classes() {
    let s: TokenStream = [
        "x",
        "=",
        "42",
        "+",
        "0x1234567890123456789012345678901234567890",
        ";",
        "\"a\"",
        "0xff",
    ]
    .into_iter()
    .collect();
    let n = normalize(&s);
    assert_eq!(n.tokens(), ["x", "=", "NUM", "+", "ADDR", "STR", "HEX"]);
}
