use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::normalizer::TokenStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub token: String,
    pub frequency: u64,
}

/// Token vocabulary with dense ids ordered by (frequency desc, token asc).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    pub fn build<'a, I>(streams: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = &'a TokenStream>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for s in streams {
            for t in s.tokens() {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let min_count = min_count.max(1);
        let mut entries: Vec<VocabEntry> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_count)
            .map(|(t, n)| VocabEntry {
                token: t.to_string(),
                frequency: n,
            })
            .collect();
        entries.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.token.cmp(&b.token)));
        Self::from_entries(entries, min_count)
    }

    pub(crate) fn from_entries(entries: Vec<VocabEntry>, min_count: u64) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.token.clone(), i as u32))
            .collect();
        Self {
            entries,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.entries[id as usize].token
    }

    pub fn frequency(&self, id: u32) -> u64 {
        self.entries[id as usize].frequency
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(tokens: &[&str]) -> TokenStream {
        tokens.iter().copied().collect()
    }

    #[test]
    fn empty() {
        let v = Vocabulary::build(std::iter::empty(), 1);
        assert!(v.is_empty());
    }

    #[test]
    fn counting_and_order() {
        let streams = [ts(&["A", "B", "A"])];
        let v = Vocabulary::build(&streams, 1);
        assert_eq!(v.len(), 2);
        assert_eq!(v.id("A"), Some(0));
        assert_eq!(v.id("B"), Some(1));
        assert_eq!(v.frequency(0), 2);
        assert_eq!(v.frequency(1), 1);

        let v = Vocabulary::build(&streams, 2);
        assert_eq!(v.len(), 1);
        assert_eq!(v.id("A"), Some(0));
        assert_eq!(v.id("B"), None);
    }

    #[test]
    fn ties_break_lexicographically() {
        let streams = [ts(&["b", "a"]), ts(&["c"])];
        let v = Vocabulary::build(&streams, 1);
        let order: Vec<_> = v.entries().iter().map(|e| e.token.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }
}
