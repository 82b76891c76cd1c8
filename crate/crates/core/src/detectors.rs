//! Corpus clone detection, corpus bug scanning and single-contract validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::embedding::embed_fragment;
use crate::error::Result;
use crate::frontend::{Diagnostic, Pos, SourceId, SourceUnit, Span};
use crate::normalizer::{extract_fragments, Fragment, FragmentId, Granularity};
use crate::similarity::{
    batch_query, batch_query_filtered, check_threshold, MatrixCache, QueryOptions, ResidentMatrix,
    SimilarityScore, Thresholds,
};
use crate::store::Snapshot;

/// Source id given to submitted contracts; stored sources start at 1.
pub const SUBMISSION_SOURCE: SourceId = SourceId(0);

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClonePair {
    pub fragment_a: FragmentId,
    pub fragment_b: FragmentId,
    pub score: SimilarityScore,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneReport {
    pub pairs: Vec<ClonePair>,
    pub clusters: Vec<Vec<FragmentId>>,
    pub clone_ratio: f64,
    pub granularity: Granularity,
    pub clone_threshold: f64,
    pub corpus_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugHit {
    pub fragment_id: FragmentId,
    pub span: Span,
    pub bug_id: String,
    pub category: String,
    pub score: SimilarityScore,
    pub function_id: Option<FragmentId>,
    pub contract_id: Option<FragmentId>,
}

/// A submitted fragment matched against a corpus fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneHit {
    pub fragment_id: FragmentId,
    pub span: Span,
    pub target_id: FragmentId,
    pub target_path: String,
    pub target_span: Span,
    pub score: SimilarityScore,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    pub clone_hits: BTreeMap<Granularity, Vec<CloneHit>>,
    pub bug_hits: Vec<BugHit>,
    pub oov_rate: f64,
    pub corpus_version: u64,
    pub clone_threshold: f64,
    pub bug_threshold: f64,
    pub top_k: usize,
}

impl ValidationReport {
    fn empty(snapshot: &Snapshot, thresholds: Thresholds, k: usize) -> Self {
        Self {
            diagnostics: Vec::new(),
            clone_hits: Granularity::ALL.iter().map(|&g| (g, Vec::new())).collect(),
            bug_hits: Vec::new(),
            oov_rate: 0.0,
            corpus_version: snapshot.version(),
            clone_threshold: thresholds.clone_threshold,
            bug_threshold: thresholds.bug_threshold,
            top_k: k,
        }
    }

    pub fn hit_count(&self) -> usize {
        self.clone_hits.values().map(Vec::len).sum::<usize>() + self.bug_hits.len()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// All fragment pairs at one granularity scoring at least `threshold`.
pub fn detect_corpus_clones(
    snapshot: &Snapshot,
    cache: &MatrixCache,
    granularity: Granularity,
    threshold: f64,
) -> Result<CloneReport> {
    check_threshold(threshold)?;
    let matrix = cache.get(snapshot, granularity)?;
    let mut pairs: BTreeMap<(FragmentId, FragmentId), ClonePair> = BTreeMap::new();

    for members in snapshot.exact_index(granularity).values() {
        let live: Vec<FragmentId> = members
            .iter()
            .copied()
            .filter(|&id| snapshot.fragment(id).is_some_and(|(f, _)| !f.degenerate))
            .collect();
        for (i, &a) in live.iter().enumerate() {
            for &b in &live[i + 1..] {
                pairs.insert(
                    (a, b),
                    ClonePair {
                        fragment_a: a,
                        fragment_b: b,
                        score: SimilarityScore::ONE,
                        exact: true,
                    },
                );
            }
        }
    }

    let opts = QueryOptions::threshold(threshold);
    let hits = batch_query_filtered(&matrix, &matrix, &opts, |q, r| {
        r > q && !matrix.is_degenerate(q)
    })?;
    for (q, row_hits) in hits.into_iter().enumerate() {
        let qa = *matrix.id(q);
        for h in row_hits {
            let key = if qa < h.id { (qa, h.id) } else { (h.id, qa) };
            pairs.entry(key).or_insert(ClonePair {
                fragment_a: key.0,
                fragment_b: key.1,
                score: h.score,
                exact: false,
            });
        }
    }

    let row_of: HashMap<FragmentId, usize> = matrix
        .ids()
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let mut uf = UnionFind::new(matrix.rows());
    let mut in_pair = vec![false; matrix.rows()];
    for &(a, b) in pairs.keys() {
        let (ra, rb) = (row_of[&a], row_of[&b]);
        uf.union(ra, rb);
        in_pair[ra] = true;
        in_pair[rb] = true;
    }
    let mut groups: BTreeMap<usize, Vec<FragmentId>> = BTreeMap::new();
    for (row, _) in in_pair.iter().enumerate().filter(|(_, &p)| p) {
        let root = uf.find(row);
        groups.entry(root).or_default().push(*matrix.id(row));
    }
    let mut clusters: Vec<Vec<FragmentId>> = groups
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    clusters.sort();

    let live = (0..matrix.rows())
        .filter(|&r| !matrix.is_degenerate(r))
        .count();
    let participating = in_pair.iter().filter(|&&p| p).count();
    let clone_ratio = if live == 0 {
        0.0
    } else {
        participating as f64 / live as f64
    };

    Ok(CloneReport {
        pairs: pairs.into_values().collect(),
        clusters,
        clone_ratio,
        granularity,
        clone_threshold: threshold,
        corpus_version: snapshot.version(),
    })
}

/// Corpus statements scoring at least `threshold` against any bug statement.
/// One hit per (statement, bug), carrying the best score over the bug's
/// statements.
pub fn detect_corpus_bugs(
    snapshot: &Snapshot,
    cache: &MatrixCache,
    threshold: f64,
) -> Result<Vec<BugHit>> {
    check_threshold(threshold)?;
    let bugs = snapshot.bug_matrix();
    if bugs.is_empty() {
        return Ok(Vec::new());
    }
    let statements = cache.get(snapshot, Granularity::Statement)?;
    let hits = batch_query(bugs, &statements, &QueryOptions::threshold(threshold))?;
    let mut best: BTreeMap<(FragmentId, String), SimilarityScore> = BTreeMap::new();
    for (b, row_hits) in hits.into_iter().enumerate() {
        let bug_id = &bugs.id(b).bug_id;
        for h in row_hits {
            let e = best.entry((h.id, bug_id.clone())).or_insert(h.score);
            if h.score.value() > e.value() {
                *e = h.score;
            }
        }
    }
    Ok(best
        .into_iter()
        .map(|((fragment_id, bug_id), score)| {
            let (f, _) = snapshot
                .fragment(fragment_id)
                .expect("hit rows are stored fragments");
            let (function_id, contract_id) = snapshot.enclosing(fragment_id);
            BugHit {
                fragment_id,
                span: f.fragment.span,
                category: snapshot
                    .bug(&bug_id)
                    .map(|b| b.category.clone())
                    .unwrap_or_default(),
                bug_id,
                score,
                function_id,
                contract_id,
            }
        })
        .collect())
}

/// Validates a submission given as raw bytes; input that is not UTF-8 yields
/// a report carrying only a diagnostic.
pub fn validate_bytes(
    bytes: &[u8],
    snapshot: &Snapshot,
    cache: &MatrixCache,
    thresholds: Thresholds,
    k: usize,
) -> Result<ValidationReport> {
    match std::str::from_utf8(bytes) {
        Ok(text) => validate_contract(text, snapshot, cache, thresholds, k),
        Err(e) => {
            let mut report = ValidationReport::empty(snapshot, thresholds, k);
            let line = 1 + bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count();
            report.diagnostics.push(Diagnostic::error(
                "input is not valid UTF-8",
                Pos {
                    line: line as u32,
                    col: 1,
                },
            ));
            Ok(report)
        }
    }
}

/// Parses, embeds and queries one submitted contract against the corpus:
/// top-`k` clone hits per submitted fragment at every granularity, and bug
/// hits for every submitted statement.
pub fn validate_contract(
    source_text: &str,
    snapshot: &Snapshot,
    cache: &MatrixCache,
    thresholds: Thresholds,
    k: usize,
) -> Result<ValidationReport> {
    let thresholds = Thresholds::new(thresholds.clone_threshold, thresholds.bug_threshold)?;
    let mut report = ValidationReport::empty(snapshot, thresholds, k);
    let unit = SourceUnit::new(SUBMISSION_SOURCE, "<submitted>", source_text);
    let extraction = extract_fragments(&unit);
    report.diagnostics = extraction.diagnostics;
    let fragments = extraction.fragments;
    let table = snapshot.table();

    let mut per_g: [Vec<&Fragment>; 3] = Default::default();
    let mut queries: [ResidentMatrix<usize>; 3] =
        std::array::from_fn(|_| ResidentMatrix::new(snapshot.dim(), 0));
    let (mut oov, mut total) = (0usize, 0usize);
    for (i, f) in fragments.iter().enumerate() {
        let e = embed_fragment(f, table);
        if f.granularity == Granularity::Contract {
            oov += e.oov_count;
            total += e.token_count;
        }
        if !e.is_degenerate {
            per_g[f.granularity.index()].push(f);
            queries[f.granularity.index()].push(&e.vector, i, false)?;
        }
    }
    report.oov_rate = if total == 0 {
        0.0
    } else {
        oov as f64 / total as f64
    };

    let opts = QueryOptions::threshold(thresholds.clone_threshold).top_k(Some(k));
    for g in Granularity::ALL {
        let q = &queries[g.index()];
        if q.is_empty() {
            continue;
        }
        let corpus = cache.get(snapshot, g)?;
        let hits = batch_query(q, &corpus, &opts)?;
        let out = report.clone_hits.entry(g).or_default();
        for (qi, row_hits) in hits.into_iter().enumerate() {
            let f = per_g[g.index()][qi];
            let digest: Digest = f.stream.digest();
            for h in row_hits {
                let (target, _) = snapshot
                    .fragment(h.id)
                    .expect("hit rows are stored fragments");
                out.push(CloneHit {
                    fragment_id: f.fragment_id,
                    span: f.span,
                    target_id: h.id,
                    target_path: snapshot
                        .source(h.id.source)
                        .map(|s| s.path.clone())
                        .unwrap_or_default(),
                    target_span: target.fragment.span,
                    score: h.score,
                    exact: target.digest == digest,
                });
            }
        }
    }

    let stmts = &queries[Granularity::Statement.index()];
    let bugs = snapshot.bug_matrix();
    if !stmts.is_empty() && !bugs.is_empty() {
        let hits = batch_query(
            stmts,
            bugs,
            &QueryOptions::threshold(thresholds.bug_threshold),
        )?;
        let by_id: HashMap<FragmentId, &Fragment> =
            fragments.iter().map(|f| (f.fragment_id, f)).collect();
        for (qi, row_hits) in hits.into_iter().enumerate() {
            let f = per_g[Granularity::Statement.index()][qi];
            let (function_id, contract_id) = local_enclosing(f, &by_id);
            let mut seen = BTreeSet::new();
            // hits are sorted by score, so the first hit per bug is its best
            for h in row_hits {
                if !seen.insert(h.id.bug_id.clone()) {
                    continue;
                }
                report.bug_hits.push(BugHit {
                    fragment_id: f.fragment_id,
                    span: f.span,
                    category: snapshot
                        .bug(&h.id.bug_id)
                        .map(|b| b.category.clone())
                        .unwrap_or_default(),
                    bug_id: h.id.bug_id,
                    score: h.score,
                    function_id,
                    contract_id,
                });
            }
        }
    }
    Ok(report)
}

fn local_enclosing(
    f: &Fragment,
    by_id: &HashMap<FragmentId, &Fragment>,
) -> (Option<FragmentId>, Option<FragmentId>) {
    let mut function = None;
    let mut contract = None;
    let mut cur = f.parent_id;
    while let Some(p) = cur {
        let Some(parent) = by_id.get(&p) else { break };
        match parent.granularity {
            Granularity::Function if function.is_none() => function = Some(p),
            Granularity::Contract => contract = Some(p),
            _ => {}
        }
        cur = parent.parent_id;
    }
    (function, contract)
}
