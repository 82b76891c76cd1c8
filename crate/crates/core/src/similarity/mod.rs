//! Similarity scoring and batched threshold queries.
//!
//! The default score is `1 - |a - b| / (|a| + |b|)`, defined as 1 when both
//! vectors are zero. Batched queries compute all squared distances through the
//! expansion `|q|^2 + |m|^2 - 2 q.m` with a single matrix product per block of
//! queries, then re-score the surviving candidates exactly so that batch and
//! pairwise results agree.

mod cache;

pub use cache::{MatrixCache, MatrixSource};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Query rows processed per matrix product.
const QUERY_BLOCK: usize = 64;

/// Candidates within this distance below the threshold are re-scored exactly.
const CANDIDATE_SLACK: f64 = 1e-6;

/// Float excursions beyond [0, 1] up to this size are clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    NormalizedEuclidean,
    /// Cosine similarity clipped at 0. Blind to vector magnitude.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ONE: SimilarityScore = SimilarityScore(1.0);

    pub fn new(raw: f64) -> Self {
        debug_assert!(
            (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&raw),
            "score {raw} outside [0, 1]"
        );
        Self(raw.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub clone_threshold: f64,
    pub bug_threshold: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            clone_threshold: 0.95,
            bug_threshold: 0.90,
        }
    }
}

impl Thresholds {
    pub fn new(clone_threshold: f64, bug_threshold: f64) -> Result<Self> {
        Ok(Self {
            clone_threshold: check_threshold(clone_threshold)?,
            bug_threshold: check_threshold(bug_threshold)?,
        })
    }
}

/// Accepts thresholds in (0, 1].
pub fn check_threshold(t: f64) -> Result<f64> {
    if t > 0.0 && t <= 1.0 {
        Ok(t)
    } else {
        Err(Error::InvalidThreshold(t))
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn raw_score(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    let mut na2 = 0.0;
    let mut nb2 = 0.0;
    match metric {
        Metric::NormalizedEuclidean => {
            let mut dist2 = 0.0;
            for (x, y) in a.iter().zip(b) {
                let d = x - y;
                dist2 += d * d;
                na2 += x * x;
                nb2 += y * y;
            }
            let denom = na2.sqrt() + nb2.sqrt();
            if denom == 0.0 {
                1.0
            } else {
                1.0 - dist2.sqrt() / denom
            }
        }
        Metric::Cosine => {
            let mut dot = 0.0;
            for (x, y) in a.iter().zip(b) {
                na2 += x * x;
                nb2 += y * y;
                dot += x * y;
            }
            cosine_from_parts(na2.sqrt(), nb2.sqrt(), dot)
        }
    }
}

fn cosine_from_parts(na: f64, nb: f64, dot: f64) -> f64 {
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (dot / (na * nb)).max(0.0),
    }
}

/// Normalized Euclidean similarity of two equal-length vectors.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<SimilarityScore> {
    similarity_with(Metric::NormalizedEuclidean, a, b)
}

pub fn similarity_with(metric: Metric, a: &[f64], b: &[f64]) -> Result<SimilarityScore> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(SimilarityScore::new(raw_score(metric, a, b)))
}

/// A row-major matrix held in memory together with its row norms.
///
/// The leading eighth of every row is also kept in a contiguous panel, with
/// the norm of the remaining columns, so queries can bound a score before
/// reading the whole row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidentMatrix<Id> {
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
    head: usize,
    panel: Vec<f64>,
    tail_norms: Vec<f64>,
    ids: Vec<Id>,
    /// Rows excluded from every query result (zero vectors of empty fragments).
    degenerate: Vec<bool>,
    version: u64,
}

impl<Id: Clone> ResidentMatrix<Id> {
    pub fn new(dim: usize, version: u64) -> Self {
        Self {
            dim,
            data: Vec::new(),
            norms: Vec::new(),
            head: dim.div_ceil(8),
            panel: Vec::new(),
            tail_norms: Vec::new(),
            ids: Vec::new(),
            degenerate: Vec::new(),
            version,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R], ids: Vec<Id>) -> Result<Self> {
        let mut m = Self::new(dim, 0);
        for (row, id) in rows.iter().zip(ids) {
            m.push(row.as_ref(), id, false)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &[f64], id: Id, degenerate: bool) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        self.push_with_norm(row, l2_norm(row), id, degenerate);
        Ok(())
    }

    /// Appends a row whose norm is already known.
    pub(crate) fn push_with_norm(&mut self, row: &[f64], norm: f64, id: Id, degenerate: bool) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
        self.norms.push(norm);
        self.panel.extend_from_slice(&row[..self.head]);
        self.tail_norms.push(l2_norm(&row[self.head..]));
        self.ids.push(id);
        self.degenerate.push(degenerate);
    }

    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn ids(&self) -> &[Id] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> &Id {
        &self.ids[row]
    }

    pub fn is_degenerate(&self, row: usize) -> bool {
        self.degenerate[row]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.rows(), self.dim), &self.data).expect("row-major layout")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit<Id> {
    pub row: usize,
    pub id: Id,
    pub score: SimilarityScore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOptions {
    /// Minimum score, in [0, 1].
    pub threshold: f64,
    pub top_k: Option<usize>,
    pub metric: Metric,
}

impl QueryOptions {
    pub fn threshold(threshold: f64) -> Self {
        Self {
            threshold,
            top_k: None,
            metric: Metric::NormalizedEuclidean,
        }
    }

    pub fn top_k(mut self, k: Option<usize>) -> Self {
        self.top_k = k;
        self
    }

    pub fn metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }
}

fn check_options(opts: &QueryOptions) -> Result<()> {
    if (0.0..=1.0).contains(&opts.threshold) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(opts.threshold))
    }
}

/// Runs every query row against the corpus. Hits are sorted by (score desc,
/// row asc) and truncated to `top_k`. Degenerate corpus rows never match.
pub fn batch_query<Q: Clone + Sync, Id: Clone + Send + Sync>(
    queries: &ResidentMatrix<Q>,
    corpus: &ResidentMatrix<Id>,
    opts: &QueryOptions,
) -> Result<Vec<Vec<QueryHit<Id>>>> {
    batch_query_filtered(queries, corpus, opts, |_, _| true)
}

/// Like [`batch_query`], keeping only (query, row) pairs accepted by `keep`.
pub fn batch_query_filtered<Q, Id, F>(
    queries: &ResidentMatrix<Q>,
    corpus: &ResidentMatrix<Id>,
    opts: &QueryOptions,
    keep: F,
) -> Result<Vec<Vec<QueryHit<Id>>>>
where
    Q: Clone + Sync,
    Id: Clone + Send + Sync,
    F: Fn(usize, usize) -> bool + Sync,
{
    check_options(opts)?;
    if queries.dim() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: corpus.dim(),
            actual: queries.dim(),
        });
    }
    let head = corpus.head;
    let n = corpus.rows();
    let panel = ArrayView2::from_shape((n, head), &corpus.panel).expect("row-major panel");
    let q_view = queries.view();
    let cutoff = opts.threshold - CANDIDATE_SLACK;

    let blocks: Vec<usize> = (0..queries.rows()).step_by(QUERY_BLOCK).collect();
    let per_block: Vec<Vec<Vec<QueryHit<Id>>>> = blocks
        .into_par_iter()
        .map(|start| {
            let end = (start + QUERY_BLOCK).min(queries.rows());
            let partial: Array2<f64> = if end - start == 1 {
                let q = &queries.row(start)[..head];
                Array2::from_shape_vec((1, n), row_dots(&corpus.panel, head, n, q))
                    .expect("one dot per corpus row")
            } else {
                q_view
                    .slice(ndarray::s![start..end, ..head])
                    .dot(&panel.t())
            };
            (start..end)
                .map(|qi| {
                    let q = queries.row(qi);
                    let q_tail = &q[head..];
                    let qn = queries.norms()[qi];
                    let qt = l2_norm(q_tail);
                    let partial_row = partial.row(qi - start);
                    let mut hits: Vec<QueryHit<Id>> = Vec::new();
                    for (j, &p) in partial_row.iter().enumerate() {
                        if corpus.is_degenerate(j) || !keep(qi, j) {
                            continue;
                        }
                        let mn = corpus.norms[j];
                        // Cauchy-Schwarz on the tail columns
                        if !reaches(opts.metric, qn, mn, p + qt * corpus.tail_norms[j], cutoff) {
                            continue;
                        }
                        let row = corpus.row(j);
                        let dot_full = p + dot(&row[head..], q_tail);
                        if !reaches(opts.metric, qn, mn, dot_full, cutoff) {
                            continue;
                        }
                        let exact = SimilarityScore::new(raw_score(opts.metric, q, row));
                        if exact.value() >= opts.threshold {
                            hits.push(QueryHit {
                                row: j,
                                id: corpus.id(j).clone(),
                                score: exact,
                            });
                        }
                    }
                    finish(&mut hits, opts.top_k);
                    hits
                })
                .collect()
        })
        .collect();
    Ok(per_block.into_iter().flatten().collect())
}

const ROW_CHUNK: usize = 1024;

/// Dot product of `q` with each of the `n` rows of width `width` in `data`,
/// row chunks in parallel.
fn row_dots(data: &[f64], width: usize, n: usize, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if width == 0 {
        return out;
    }
    out.par_chunks_mut(ROW_CHUNK)
        .zip(data.par_chunks(ROW_CHUNK * width))
        .for_each(|(o, rows)| {
            for (d, r) in o.iter_mut().zip(rows.chunks_exact(width)) {
                *d = dot(r, q);
            }
        });
    out
}

/// Whether the score implied by a dot product and the two norms reaches
/// `cutoff`. Monotone in `dot`.
fn reaches(metric: Metric, qn: f64, mn: f64, dot: f64, cutoff: f64) -> bool {
    match metric {
        Metric::NormalizedEuclidean => {
            if cutoff <= 0.0 {
                return true;
            }
            let r = (1.0 - cutoff) * (qn + mn);
            qn * qn + mn * mn - 2.0 * dot <= r * r
        }
        Metric::Cosine => cosine_from_parts(qn, mn, dot) >= cutoff,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

fn finish<Id>(hits: &mut Vec<QueryHit<Id>>, top_k: Option<usize>) {
    hits.sort_by(|a, b| {
        b.score
            .value()
            .total_cmp(&a.score.value())
            .then(a.row.cmp(&b.row))
    });
    if let Some(k) = top_k {
        hits.truncate(k);
    }
}

/// Pairwise scalar loop over every (query, row) pair. Reference baseline for
/// [`batch_query`].
pub fn naive_query<Q: Clone, Id: Clone>(
    queries: &ResidentMatrix<Q>,
    corpus: &ResidentMatrix<Id>,
    opts: &QueryOptions,
) -> Result<Vec<Vec<QueryHit<Id>>>> {
    check_options(opts)?;
    if queries.dim() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: corpus.dim(),
            actual: queries.dim(),
        });
    }
    let mut out = Vec::with_capacity(queries.rows());
    for qi in 0..queries.rows() {
        let mut hits = Vec::new();
        for j in 0..corpus.rows() {
            if corpus.is_degenerate(j) {
                continue;
            }
            let score = similarity_with(opts.metric, queries.row(qi), corpus.row(j))?;
            if score.value() >= opts.threshold {
                hits.push(QueryHit {
                    row: j,
                    id: corpus.id(j).clone(),
                    score,
                });
            }
        }
        finish(&mut hits, opts.top_k);
        out.push(hits);
    }
    Ok(out)
}
