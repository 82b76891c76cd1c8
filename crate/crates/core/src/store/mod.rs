//! Corpus store: per-granularity embedding matrices, the exact-duplicate index
//! and the bug matrix, published as immutable versioned snapshots.
//!
//! One writer at a time builds the next snapshot from a copy of the current
//! one and publishes it atomically; readers hold an `Arc<Snapshot>` and are
//! never blocked. Rows are stored in per-source blocks so a new snapshot
//! shares every existing block with its predecessor.

mod bugs;
mod persist;

pub use bugs::{compile_statements, BugCatalog, BugRecord, BugRowId, CatalogEntry};
pub use persist::{Manifest, FORMAT_VERSION};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::{Mutex, MutexGuard, RwLock};
use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::embedding::{embed_stream, EmbeddingTable, FragmentEmbedding};
use crate::error::{Error, Result};
use crate::frontend::{SourceId, SourceUnit};
use crate::normalizer::{Fragment, FragmentId, Granularity};
use crate::similarity::{l2_norm, MatrixSource, ResidentMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: SourceId,
    pub path: String,
    pub content_hash: Digest,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredFragment {
    pub fragment: Fragment,
    pub digest: Digest,
    pub degenerate: bool,
}

/// Rows contributed by one source at one granularity.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    fragments: Vec<StoredFragment>,
    data: Vec<f64>,
    norms: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Layer {
    blocks: Vec<Arc<Block>>,
    /// First global row of each block.
    starts: Vec<usize>,
    rows: usize,
}

impl Layer {
    fn push(&mut self, block: Block) {
        self.starts.push(self.rows);
        self.rows += block.fragments.len();
        self.blocks.push(Arc::new(block));
    }

    fn locate(&self, row: usize) -> (&Block, usize) {
        let b = self.starts.partition_point(|&s| s <= row) - 1;
        (&self.blocks[b], row - self.starts[b])
    }
}

/// Rows added by one `add_contract` call, per granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Added { rows: [usize; 3] },
    Duplicate { existing: SourceId },
}

/// An immutable view of the corpus at one version.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    version: u64,
    table: Arc<EmbeddingTable>,
    categories: Arc<Vec<String>>,
    sources: Arc<Vec<Arc<SourceRecord>>>,
    by_hash: Arc<HashMap<Digest, SourceId>>,
    layers: [Layer; 3],
    locations: Arc<HashMap<FragmentId, (Granularity, usize)>>,
    exact: [Arc<HashMap<Digest, BTreeSet<FragmentId>>>; 3],
    bugs: Arc<Vec<BugRecord>>,
    bug_matrix: Arc<ResidentMatrix<BugRowId>>,
}

impl Snapshot {
    pub fn new(table: EmbeddingTable, categories: Vec<String>) -> Self {
        let dim = table.dim();
        Self {
            version: 0,
            table: Arc::new(table),
            categories: Arc::new(categories),
            sources: Arc::default(),
            by_hash: Arc::default(),
            layers: Default::default(),
            locations: Arc::default(),
            exact: Default::default(),
            bugs: Arc::default(),
            bug_matrix: Arc::new(ResidentMatrix::new(dim, 0)),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn sources(&self) -> &[Arc<SourceRecord>] {
        &self.sources
    }

    pub fn source(&self, id: SourceId) -> Option<&SourceRecord> {
        // ids are assigned densely from 1 in insertion order
        let i = (id.0 as usize).checked_sub(1)?;
        self.sources
            .get(i)
            .map(|s| s.as_ref())
            .filter(|s| s.id == id)
    }

    pub fn source_by_hash(&self, hash: &Digest) -> Option<SourceId> {
        self.by_hash.get(hash).copied()
    }

    pub fn next_source_id(&self) -> SourceId {
        SourceId(self.sources.len() as u64 + 1)
    }

    pub fn fragment_count(&self, g: Granularity) -> usize {
        self.layers[g.index()].rows
    }

    pub fn counts(&self) -> [usize; 3] {
        Granularity::ALL.map(|g| self.fragment_count(g))
    }

    /// Fragments of one granularity in row order.
    pub fn fragments(&self, g: Granularity) -> impl Iterator<Item = &StoredFragment> {
        self.layers[g.index()]
            .blocks
            .iter()
            .flat_map(|b| b.fragments.iter())
    }

    pub fn row(&self, g: Granularity, row: usize) -> (&StoredFragment, &[f64]) {
        let (block, i) = self.layers[g.index()].locate(row);
        let d = self.dim();
        (&block.fragments[i], &block.data[i * d..(i + 1) * d])
    }

    pub fn row_norm(&self, g: Granularity, row: usize) -> f64 {
        let (block, i) = self.layers[g.index()].locate(row);
        block.norms[i]
    }

    pub fn locate(&self, id: FragmentId) -> Option<(Granularity, usize)> {
        self.locations.get(&id).copied()
    }

    pub fn fragment(&self, id: FragmentId) -> Option<(&StoredFragment, &[f64])> {
        self.locate(id).map(|(g, row)| self.row(g, row))
    }

    /// Fragments of granularity `g` whose normalized stream has this digest.
    pub fn exact_lookup(&self, g: Granularity, digest: &Digest) -> Option<&BTreeSet<FragmentId>> {
        self.exact[g.index()].get(digest)
    }

    pub fn exact_index(&self, g: Granularity) -> &HashMap<Digest, BTreeSet<FragmentId>> {
        &self.exact[g.index()]
    }

    /// Enclosing (function, contract) of a fragment via the parent chain.
    pub fn enclosing(&self, id: FragmentId) -> (Option<FragmentId>, Option<FragmentId>) {
        let mut function = None;
        let mut contract = None;
        let mut cur = self.fragment(id).and_then(|(f, _)| f.fragment.parent_id);
        while let Some(p) = cur {
            let Some((f, _)) = self.fragment(p) else {
                break;
            };
            match f.fragment.granularity {
                Granularity::Function if function.is_none() => function = Some(p),
                Granularity::Contract => contract = Some(p),
                _ => {}
            }
            cur = f.fragment.parent_id;
        }
        (function, contract)
    }

    pub fn bugs(&self) -> &[BugRecord] {
        &self.bugs
    }

    pub fn bug(&self, bug_id: &str) -> Option<&BugRecord> {
        self.bugs.iter().find(|b| b.bug_id == bug_id)
    }

    pub fn bug_matrix(&self) -> &ResidentMatrix<BugRowId> {
        &self.bug_matrix
    }

    /// Copies the rows of one granularity into a contiguous matrix.
    pub fn materialize(&self, g: Granularity) -> ResidentMatrix<FragmentId> {
        let layer = &self.layers[g.index()];
        let d = self.dim();
        let mut m = ResidentMatrix::new(d, self.version);
        for block in &layer.blocks {
            for (i, f) in block.fragments.iter().enumerate() {
                m.push_with_norm(
                    &block.data[i * d..(i + 1) * d],
                    block.norms[i],
                    f.fragment.fragment_id,
                    f.degenerate,
                );
            }
        }
        m
    }

    fn add_contract(
        &mut self,
        unit: &SourceUnit,
        fragments: Vec<Fragment>,
        vectors: Vec<FragmentEmbedding>,
    ) -> Result<AddOutcome> {
        if let Some(existing) = self.source_by_hash(&unit.content_hash) {
            return Ok(AddOutcome::Duplicate { existing });
        }
        if unit.id != self.next_source_id() {
            return Err(Error::Provider(format!(
                "source id {} out of sequence (next is {})",
                unit.id,
                self.next_source_id()
            )));
        }
        if fragments.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: fragments.len(),
                actual: vectors.len(),
            });
        }
        let d = self.dim();
        if let Some(v) = vectors.iter().find(|v| v.vector.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.vector.len(),
            });
        }

        let mut blocks: [Block; 3] = std::array::from_fn(|_| Block {
            fragments: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
        });
        for (f, v) in fragments.into_iter().zip(vectors) {
            if f.source_id != unit.id {
                return Err(Error::Provider(format!(
                    "fragment {} does not belong to source {}",
                    f.fragment_id, unit.id
                )));
            }
            let block = &mut blocks[f.granularity.index()];
            block.norms.push(l2_norm(&v.vector));
            block.data.extend_from_slice(&v.vector);
            block.fragments.push(StoredFragment {
                digest: f.stream.digest(),
                fragment: f,
                degenerate: v.is_degenerate,
            });
        }

        let rows = blocks.each_ref().map(|b| b.fragments.len());
        let locations = Arc::make_mut(&mut self.locations);
        for (g, block) in Granularity::ALL.into_iter().zip(blocks) {
            if block.fragments.is_empty() {
                continue;
            }
            let layer = &mut self.layers[g.index()];
            let exact = Arc::make_mut(&mut self.exact[g.index()]);
            for (i, f) in block.fragments.iter().enumerate() {
                locations.insert(f.fragment.fragment_id, (g, layer.rows + i));
                exact
                    .entry(f.digest)
                    .or_default()
                    .insert(f.fragment.fragment_id);
            }
            layer.push(block);
        }
        Arc::make_mut(&mut self.sources).push(Arc::new(SourceRecord {
            id: unit.id,
            path: unit.path.clone(),
            content_hash: unit.content_hash,
            text: unit.text.clone(),
        }));
        Arc::make_mut(&mut self.by_hash).insert(unit.content_hash, unit.id);
        Ok(AddOutcome::Added { rows })
    }

    fn add_bug(&mut self, record: BugRecord) -> Result<usize> {
        let invalid = |reason: String| Error::InvalidBug {
            bug_id: record.bug_id.clone(),
            reason,
        };
        if record.statement_streams.is_empty() {
            return Err(invalid("no statement streams".into()));
        }
        if !self.categories.contains(&record.category) {
            return Err(invalid(format!("unknown category '{}'", record.category)));
        }
        if self.bug(&record.bug_id).is_some() {
            return Err(invalid("duplicate bug id".into()));
        }
        let mut embedded = Vec::with_capacity(record.statement_streams.len());
        for (i, s) in record.statement_streams.iter().enumerate() {
            let e = embed_stream(s, &self.table);
            if e.is_degenerate {
                return Err(invalid(format!(
                    "statement {i} has no in-vocabulary tokens"
                )));
            }
            embedded.push(e);
        }
        let matrix = Arc::make_mut(&mut self.bug_matrix);
        for (i, e) in embedded.iter().enumerate() {
            matrix.push(
                &e.vector,
                BugRowId {
                    bug_id: record.bug_id.clone(),
                    statement: i,
                },
                false,
            )?;
        }
        Arc::make_mut(&mut self.bugs).push(record);
        Ok(embedded.len())
    }

    /// Corpus counts as reported by the manifest.
    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            version: self.version,
            dim: self.dim(),
            min_count: self.table.vocab().min_count(),
            vocabulary: self.table.len(),
            sources: self.sources.len(),
            granularities: Granularity::ALL
                .iter()
                .map(|&g| (g.name().to_string(), self.fragment_count(g)))
                .collect::<BTreeMap<_, _>>(),
            bugs: self.bugs.len(),
            bug_rows: self.bug_matrix.rows(),
            categories: self.categories.to_vec(),
        }
    }
}

impl MatrixSource for Snapshot {
    fn version(&self) -> u64 {
        self.version
    }

    fn load_matrix(&self, g: Granularity) -> Result<ResidentMatrix<FragmentId>> {
        Ok(self.materialize(g))
    }
}

/// Single-writer, multi-reader corpus store.
#[derive(Debug)]
pub struct CorpusStore {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl CorpusStore {
    pub fn new(table: EmbeddingTable, categories: Vec<String>) -> Self {
        Self::from_snapshot(Snapshot::new(table, categories))
    }

    pub fn from_snapshot(snapshot: Snapshot) -> Self {
        Self {
            current: RwLock::new(Arc::new(snapshot)),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.current.read())
    }

    pub fn version(&self) -> u64 {
        self.current.read().version
    }

    /// Starts a mutation batch. Blocks while another batch is open.
    pub fn begin(&self) -> Batch<'_> {
        let guard = self.writer.lock();
        let next = (**self.current.read()).clone();
        Batch {
            store: self,
            _guard: guard,
            next,
            changed: false,
        }
    }

    /// Publishes a snapshot built elsewhere (e.g. after retraining) as the
    /// next version.
    pub fn replace(&self, mut snapshot: Snapshot) -> u64 {
        let _guard = self.writer.lock();
        let mut cur = self.current.write();
        snapshot.version = cur.version + 1;
        *cur = Arc::new(snapshot);
        cur.version
    }

    pub fn add_contract(
        &self,
        unit: &SourceUnit,
        fragments: Vec<Fragment>,
        vectors: Vec<FragmentEmbedding>,
    ) -> Result<AddOutcome> {
        let mut batch = self.begin();
        let out = batch.add_contract(unit, fragments, vectors)?;
        batch.commit();
        Ok(out)
    }

    pub fn add_bug(&self, record: BugRecord) -> Result<usize> {
        let mut batch = self.begin();
        let rows = batch.add_bug(record)?;
        batch.commit();
        Ok(rows)
    }
}

/// A pending set of mutations. Nothing is visible to readers until
/// [`Batch::commit`]; dropping the batch discards it.
pub struct Batch<'a> {
    store: &'a CorpusStore,
    _guard: MutexGuard<'a, ()>,
    next: Snapshot,
    changed: bool,
}

impl Batch<'_> {
    /// The pending state, including uncommitted additions.
    pub fn pending(&self) -> &Snapshot {
        &self.next
    }

    pub fn add_contract(
        &mut self,
        unit: &SourceUnit,
        fragments: Vec<Fragment>,
        vectors: Vec<FragmentEmbedding>,
    ) -> Result<AddOutcome> {
        let out = self.next.add_contract(unit, fragments, vectors)?;
        if matches!(out, AddOutcome::Added { .. }) {
            self.changed = true;
        }
        Ok(out)
    }

    pub fn add_bug(&mut self, record: BugRecord) -> Result<usize> {
        let rows = self.next.add_bug(record)?;
        self.changed = true;
        Ok(rows)
    }

    /// Publishes the batch. The version increases by one if anything changed.
    pub fn commit(self) -> u64 {
        let Batch {
            store,
            _guard,
            mut next,
            changed,
        } = self;
        let mut cur = store.current.write();
        if changed {
            next.version = cur.version + 1;
            *cur = Arc::new(next);
        }
        cur.version
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed_fragment, train_embeddings, Hyperparams};
    use crate::normalizer::extract_fragments;

    const SRC: &str =
        "contract A { uint x; function f(uint a) public { x = a + 1; if (a > 2) { x = 0; } } }";

    fn table() -> EmbeddingTable {
        let unit = SourceUnit::new(SourceId(1), "a.sol", SRC);
        let ex = extract_fragments(&unit);
        let streams: Vec<_> = ex.fragments.iter().map(|f| f.stream.clone()).collect();
        let hp = Hyperparams {
            dim: 8,
            epochs: 2,
            min_count: 1,
            ..Hyperparams::default()
        };
        train_embeddings(&streams, &hp).unwrap()
    }

    fn add(store: &CorpusStore, path: &str, text: &str) -> AddOutcome {
        let snap = store.snapshot();
        let unit = SourceUnit::new(snap.next_source_id(), path, text);
        let ex = extract_fragments(&unit);
        let vecs = ex
            .fragments
            .iter()
            .map(|f| embed_fragment(f, snap.table()))
            .collect();
        store.add_contract(&unit, ex.fragments, vecs).unwrap()
    }

    #[test]
    fn rows_per_granularity() {
        let store = CorpusStore::new(table(), vec!["reentrancy".into()]);
        let out = add(&store, "a.sol", SRC);
        // 1 contract, 1 function, statements: x = a + 1; if; x = 0;
        assert_eq!(out, AddOutcome::Added { rows: [1, 1, 3] });
        let snap = store.snapshot();
        assert_eq!(snap.counts(), [1, 1, 3]);
        assert_eq!(snap.version(), 1);
        for g in Granularity::ALL {
            for (row, f) in snap.fragments(g).enumerate() {
                assert_eq!(snap.locate(f.fragment.fragment_id), Some((g, row)));
                let set = snap.exact_lookup(g, &f.digest).unwrap();
                assert!(set.contains(&f.fragment.fragment_id));
            }
        }
    }

    #[test]
    fn duplicate_content_is_noop() {
        let store = CorpusStore::new(table(), vec![]);
        add(&store, "a.sol", SRC);
        let out = add(&store, "copy.sol", SRC);
        assert_eq!(
            out,
            AddOutcome::Duplicate {
                existing: SourceId(1)
            }
        );
        assert_eq!(store.version(), 1);
        assert_eq!(store.snapshot().counts(), [1, 1, 3]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let store = CorpusStore::new(table(), vec![]);
        let unit = SourceUnit::new(SourceId(1), "a.sol", SRC);
        let ex = extract_fragments(&unit);
        let vecs = ex
            .fragments
            .iter()
            .map(|_| FragmentEmbedding {
                vector: vec![0.0; 3],
                token_count: 0,
                oov_count: 0,
                is_degenerate: true,
            })
            .collect();
        assert!(matches!(
            store.add_contract(&unit, ex.fragments, vecs),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(store.version(), 0);
    }

    #[test]
    fn readers_keep_their_snapshot() {
        let store = CorpusStore::new(table(), vec![]);
        let before = store.snapshot();
        add(&store, "a.sol", SRC);
        assert_eq!(before.version(), 0);
        assert_eq!(before.counts(), [0, 0, 0]);
        assert_eq!(store.snapshot().version(), 1);
    }

    #[test]
    fn batch_bumps_once() {
        let store = CorpusStore::new(table(), vec![]);
        let mut batch = store.begin();
        for (i, text) in [SRC, "contract B { function g() { x = 1; } }"]
            .iter()
            .enumerate()
        {
            let unit = SourceUnit::new(batch.pending().next_source_id(), format!("{i}.sol"), *text);
            let ex = extract_fragments(&unit);
            let t = batch.pending().table().clone();
            let vecs = ex.fragments.iter().map(|f| embed_fragment(f, &t)).collect();
            batch.add_contract(&unit, ex.fragments, vecs).unwrap();
        }
        assert_eq!(batch.commit(), 1);
        let empty = store.begin();
        assert_eq!(empty.commit(), 1);
    }

    #[test]
    fn enclosing_chain() {
        let store = CorpusStore::new(table(), vec![]);
        add(&store, "a.sol", SRC);
        let snap = store.snapshot();
        let stmt = snap.fragments(Granularity::Statement).last().unwrap();
        let (f, c) = snap.enclosing(stmt.fragment.fragment_id);
        assert_eq!(
            f,
            Some(
                snap.fragments(Granularity::Function)
                    .next()
                    .unwrap()
                    .fragment
                    .fragment_id
            )
        );
        assert_eq!(
            c,
            Some(
                snap.fragments(Granularity::Contract)
                    .next()
                    .unwrap()
                    .fragment
                    .fragment_id
            )
        );
    }
}
