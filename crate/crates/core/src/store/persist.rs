//! Snapshot directory layout:
//!
//! ```text
//! manifest.json           format version, store version, d, counts
//! vocab.txt               `token frequency` per line, token-id order
//! embeddings.txt          word2vec text format
//! sources.jsonl           one source record per line
//! fragments.jsonl         one fragment per line, insertion order
//! matrix_<g>.txt          one row of floats per line, row order
//! bugs.json               array of bug records
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::embedding::{EmbeddingTable, FragmentEmbedding};
use crate::error::{Error, Result};
use crate::frontend::{SourceId, SourceUnit, Span};
use crate::normalizer::{Fragment, FragmentId, Granularity, TokenStream};

use super::{BugRecord, Snapshot, SourceRecord};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const VOCAB: &str = "vocab.txt";
const EMBEDDINGS: &str = "embeddings.txt";
const SOURCES: &str = "sources.jsonl";
const FRAGMENTS: &str = "fragments.jsonl";
const BUGS: &str = "bugs.json";

fn matrix_file(g: Granularity) -> String {
    format!("matrix_{}.txt", g.name())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub version: u64,
    pub dim: usize,
    pub min_count: u64,
    pub vocabulary: usize,
    pub sources: usize,
    pub granularities: BTreeMap<String, usize>,
    pub bugs: usize,
    pub bug_rows: usize,
    pub categories: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FragmentLine {
    fragment_id: FragmentId,
    source_id: SourceId,
    granularity: Granularity,
    span: Span,
    parent_id: Option<FragmentId>,
    digest: Digest,
    degenerate: bool,
    stream: TokenStream,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(dir, name)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(dir.join(name), e))
}

fn json_lines<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(dir, name)?.lines().enumerate() {
        let line = line.map_err(|e| Error::corrupt(name, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::corrupt(name, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

impl Snapshot {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_all(dir, MANIFEST, |w| {
            serde_json::to_writer_pretty(&mut *w, &self.manifest())?;
            writeln!(w)
        })?;
        write_all(dir, VOCAB, |w| {
            for e in self.table.vocab().entries() {
                writeln!(w, "{} {}", e.token, e.frequency)?;
            }
            Ok(())
        })?;
        write_all(dir, EMBEDDINGS, |w| self.table.write_text(w))?;
        write_all(dir, SOURCES, |w| {
            for s in self.sources.iter() {
                serde_json::to_writer(&mut *w, s.as_ref())?;
                writeln!(w)?;
            }
            Ok(())
        })?;

        // fragments in insertion order: per source, pre-order
        let mut by_source: BTreeMap<SourceId, Vec<&super::StoredFragment>> = BTreeMap::new();
        for g in Granularity::ALL {
            for f in self.fragments(g) {
                by_source.entry(f.fragment.source_id).or_default().push(f);
            }
        }
        write_all(dir, FRAGMENTS, |w| {
            for frags in by_source.values_mut() {
                frags.sort_by_key(|f| f.fragment.fragment_id.ordinal);
                for f in frags.iter() {
                    let line = FragmentLine {
                        fragment_id: f.fragment.fragment_id,
                        source_id: f.fragment.source_id,
                        granularity: f.fragment.granularity,
                        span: f.fragment.span,
                        parent_id: f.fragment.parent_id,
                        digest: f.digest,
                        degenerate: f.degenerate,
                        stream: f.fragment.stream.clone(),
                    };
                    serde_json::to_writer(&mut *w, &line)?;
                    writeln!(w)?;
                }
            }
            Ok(())
        })?;

        let d = self.dim();
        for g in Granularity::ALL {
            write_all(dir, &matrix_file(g), |w| {
                let mut line = String::new();
                for block in &self.layers[g.index()].blocks {
                    for row in block.data.chunks(d) {
                        line.clear();
                        for (j, x) in row.iter().enumerate() {
                            if j > 0 {
                                line.push(' ');
                            }
                            let _ = write!(line, "{x}");
                        }
                        line.push('\n');
                        w.write_all(line.as_bytes())?;
                    }
                }
                Ok(())
            })?;
        }
        write_all(dir, BUGS, |w| {
            serde_json::to_writer_pretty(&mut *w, self.bugs.as_ref())?;
            writeln!(w)
        })
    }

    pub fn load(dir: &Path) -> Result<Snapshot> {
        let manifest: serde_json::Value = serde_json::from_reader(open(dir, MANIFEST)?)
            .map_err(|e| Error::corrupt(MANIFEST, e.to_string()))?;
        let found = manifest
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::corrupt(MANIFEST, "missing format_version"))?;
        if found != FORMAT_VERSION as u64 {
            return Err(Error::FormatVersion {
                found: found as u32,
                expected: FORMAT_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(manifest)
            .map_err(|e| Error::corrupt(MANIFEST, e.to_string()))?;

        let mut freqs = Vec::new();
        for (i, line) in open(dir, VOCAB)?.lines().enumerate() {
            let line = line.map_err(|e| Error::corrupt(VOCAB, e.to_string()))?;
            let f = line
                .rsplit_once(' ')
                .and_then(|(_, n)| n.parse::<u64>().ok())
                .ok_or_else(|| {
                    Error::corrupt(VOCAB, format!("line {}: expected `token frequency`", i + 1))
                })?;
            freqs.push(f);
        }
        let table = EmbeddingTable::read_text(open(dir, EMBEDDINGS)?, EMBEDDINGS, Some(&freqs))?
            .with_min_count(manifest.min_count);
        if table.dim() != manifest.dim {
            return Err(Error::corrupt(
                EMBEDDINGS,
                format!(
                    "dimension {} but manifest says {}",
                    table.dim(),
                    manifest.dim
                ),
            ));
        }
        let d = table.dim();

        let sources: Vec<SourceRecord> = json_lines(dir, SOURCES)?;
        if sources.len() != manifest.sources {
            return Err(Error::corrupt(
                SOURCES,
                format!(
                    "{} sources but manifest says {}",
                    sources.len(),
                    manifest.sources
                ),
            ));
        }
        let fragments: Vec<FragmentLine> = json_lines(dir, FRAGMENTS)?;

        let mut rows: [std::vec::IntoIter<Vec<f64>>; 3] = Default::default();
        for g in Granularity::ALL {
            let name = matrix_file(g);
            let expected = manifest.granularities.get(g.name()).copied().unwrap_or(0);
            let mut m = Vec::with_capacity(expected);
            for (i, line) in open(dir, &name)?.lines().enumerate() {
                let line = line.map_err(|e| Error::corrupt(&name, e.to_string()))?;
                let row = line
                    .split(' ')
                    .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| Error::corrupt(&name, format!("line {}: bad float", i + 1)))?;
                if row.len() != d {
                    return Err(Error::corrupt(
                        &name,
                        format!(
                            "line {}: expected {d} components, found {}",
                            i + 1,
                            row.len()
                        ),
                    ));
                }
                m.push(row);
            }
            if m.len() != expected {
                return Err(Error::corrupt(
                    &name,
                    format!("{} rows but manifest says {expected}", m.len()),
                ));
            }
            let count = fragments.iter().filter(|f| f.granularity == g).count();
            if count != expected {
                return Err(Error::corrupt(
                    FRAGMENTS,
                    format!("{count} {g} fragments but manifest says {expected}"),
                ));
            }
            rows[g.index()] = m.into_iter();
        }

        let mut snap = Snapshot::new(table, manifest.categories.clone());
        let mut frags = fragments.into_iter().peekable();
        for s in sources {
            if Digest::of_text(&s.text) != s.content_hash {
                return Err(Error::corrupt(
                    SOURCES,
                    format!("content hash mismatch for source {}", s.id),
                ));
            }
            let mut fs = Vec::new();
            let mut vs = Vec::new();
            while let Some(line) = frags.next_if(|f| f.source_id == s.id) {
                if line.stream.digest() != line.digest {
                    return Err(Error::corrupt(
                        FRAGMENTS,
                        format!("digest mismatch for fragment {}", line.fragment_id),
                    ));
                }
                let vector = rows[line.granularity.index()]
                    .next()
                    .expect("row count checked");
                vs.push(FragmentEmbedding {
                    vector,
                    token_count: line.stream.len(),
                    oov_count: 0,
                    is_degenerate: line.degenerate,
                });
                fs.push(Fragment {
                    fragment_id: line.fragment_id,
                    source_id: line.source_id,
                    granularity: line.granularity,
                    span: line.span,
                    parent_id: line.parent_id,
                    stream: line.stream,
                });
            }
            let unit = SourceUnit {
                id: s.id,
                path: s.path,
                text: s.text,
                content_hash: s.content_hash,
            };
            snap.add_contract(&unit, fs, vs)
                .map_err(|e| Error::corrupt(SOURCES, e.to_string()))?;
        }
        if let Some(f) = frags.next() {
            return Err(Error::corrupt(
                FRAGMENTS,
                format!("fragment {} belongs to no source in order", f.fragment_id),
            ));
        }

        let bugs: Vec<BugRecord> = serde_json::from_reader(open(dir, BUGS)?)
            .map_err(|e| Error::corrupt(BUGS, e.to_string()))?;
        for b in bugs {
            snap.add_bug(b)
                .map_err(|e| Error::corrupt(BUGS, e.to_string()))?;
        }
        if snap.bug_matrix.rows() != manifest.bug_rows {
            return Err(Error::corrupt(
                BUGS,
                "bug row count disagrees with manifest",
            ));
        }
        snap.version = manifest.version;
        Ok(snap)
    }
}
