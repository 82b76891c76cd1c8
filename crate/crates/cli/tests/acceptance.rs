//! One pass/fail line per acceptance criterion. Criteria run one after the
//! other so timings do not interfere.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use solembed::detectors::{detect_corpus_bugs, detect_corpus_clones};
use solembed::embedding::{embed_fragment, train_embeddings, EmbeddingTable, Hyperparams};
use solembed::frontend::{SourceId, SourceUnit};
use solembed::ingestion::{build_store, ingest, MemoryProvider};
use solembed::normalizer::{extract_fragments, FragmentId, Granularity, TokenStream};
use solembed::similarity::{
    batch_query, naive_query, similarity, MatrixCache, QueryHit, QueryOptions,
};
use solembed::store::{BugCatalog, CorpusStore, Snapshot};
use solembed::synthetic::{bug_corpus, clone_corpus, sized_corpus, Generator, RenderStyle};
use solembed_cli::api::{self, AppState, ServiceConfig};
use solembed_cli::bench::{self, BenchConfig};

const INVARIANCE_TOL: f64 = 1e-9;
const INVARIANCE_LIMIT: Duration = Duration::from_secs(10);
const ORACLE_TOL: f64 = 1e-9;
const ANTIPODAL_TOL: f64 = 1e-15;
const EQUIV_SCORE_TOL: f64 = 1e-6;
const SPEEDUP_MIN: f64 = 5.0;
const SPEED_THRESHOLD: f64 = 0.90;
const STUDY_LIMIT: Duration = Duration::from_secs(60);
const CLONE_THRESHOLD: f64 = 0.95;
const CLONE_SWEEP: [f64; 4] = [0.90, 0.95, 0.99, 1.0];
const BUG_THRESHOLD: f64 = 0.90;
const EXACT_TOL: f64 = 1e-9;
const TRAINING_WINS_MIN: usize = 18;
const SLO_P95: Duration = Duration::from_millis(500);
const SLO_REQUESTS: usize = 200;
const SLO_STATEMENTS: usize = 10_000;

const RANDOMNESS: &str =
    "uint256 random = uint256(keccak256(block.blockhash(block.number - #N), now)) % #N;";

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Written straight to the stderr handle so the line shows even when the
/// harness captures test output.
fn report(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    let line = format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    report(&line);
    Outcome { name, pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn contract_streams(texts: &[String]) -> Vec<TokenStream> {
    texts
        .iter()
        .flat_map(|t| {
            extract_fragments(&SourceUnit::new(SourceId(0), "x.sol", t.as_str())).fragments
        })
        .filter(|f| f.granularity == Granularity::Contract)
        .map(|f| f.stream)
        .collect()
}

fn contract_vector(text: &str, table: &EmbeddingTable) -> Vec<f64> {
    let ex = extract_fragments(&SourceUnit::new(SourceId(0), "x.sol", text));
    let f = ex
        .fragments
        .iter()
        .find(|f| f.granularity == Granularity::Contract)
        .expect("one contract");
    embed_fragment(f, table).vector
}

fn files_provider(files: &[solembed::synthetic::SyntheticFile]) -> MemoryProvider {
    MemoryProvider {
        sources: files
            .iter()
            .map(|f| (f.path.clone(), f.text.clone()))
            .collect(),
    }
}

fn normalization_invariance() -> Outcome {
    let t = Instant::now();
    let mut g = Generator::new(2024);
    let pairs: Vec<(String, String)> = (0..20)
        .map(|i| {
            let c = g.contract(&format!("Inv{i}"));
            let plain = c.render(&RenderStyle {
                literal_seed: i,
                reformat: false,
                comments: false,
            });
            let variant = c.render(&RenderStyle {
                literal_seed: 10_000 + i,
                reformat: true,
                comments: true,
            });
            (plain, variant)
        })
        .collect();
    let originals: Vec<String> = pairs.iter().map(|p| p.0.clone()).collect();
    let table = train_embeddings(&contract_streams(&originals), &Hyperparams::default()).unwrap();
    let mut exact = 0;
    let mut changed_text = 0;
    let mut worst: f64 = 1.0;
    for (plain, variant) in &pairs {
        if plain != variant {
            changed_text += 1;
        }
        let s = similarity(
            &contract_vector(plain, &table),
            &contract_vector(variant, &table),
        )
        .unwrap()
        .value();
        worst = worst.min(s);
        if (s - 1.0).abs() <= INVARIANCE_TOL {
            exact += 1;
        }
    }
    let took = t.elapsed();
    outcome(
        "normalization_invariance",
        exact == 20 && changed_text == 20 && took < INVARIANCE_LIMIT,
        format!(
            "{exact}/20 variants at 1.0 (tol {INVARIANCE_TOL:e}), min score {worst}, {changed_text}/20 texts differ, {} (limit {})",
            secs(took),
            secs(INVARIANCE_LIMIT)
        ),
    )
}

/// Double-double arithmetic for the extended-precision score oracle.
#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd(s, b - (s - a))
}

impl Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }

    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.0, o.0);
        let t = two_sum(self.1, o.1);
        let Dd(hi, lo) = quick_two_sum(s.0, s.1 + t.0);
        quick_two_sum(hi, lo + t.1)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        quick_two_sum(p, e + (self.0 * o.1 + self.1 * o.0))
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.0 / o.0;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.0 / o.0;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn sqrt(self) -> Dd {
        if self.0 <= 0.0 {
            return Dd::from(0.0);
        }
        let x = 1.0 / self.0.sqrt();
        let ax = self.0 * x;
        let diff = self.add(Dd::from(ax).mul(Dd::from(ax)).neg());
        two_sum(ax, diff.0 * x * 0.5)
    }
}

fn oracle_score(a: &[f64], b: &[f64]) -> f64 {
    let (mut d2, mut na, mut nb) = (Dd::from(0.0), Dd::from(0.0), Dd::from(0.0));
    for (&x, &y) in a.iter().zip(b) {
        let d = two_sum(x, -y);
        d2 = d2.add(d.mul(d));
        na = na.add(Dd::from(x).mul(Dd::from(x)));
        nb = nb.add(Dd::from(y).mul(Dd::from(y)));
    }
    let denom = na.sqrt().add(nb.sqrt());
    if denom.0 == 0.0 {
        return 1.0;
    }
    let s = Dd::from(1.0).add(d2.sqrt().div(denom).neg());
    s.0.clamp(0.0, 1.0)
}

fn metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut vec =
        |scale: f64| -> Vec<f64> { (0..100).map(|_| rng.random_range(-scale..scale)).collect() };
    let (mut symmetric, mut in_range, mut self_one, mut antipodal, mut agree) = (0, 0, 0, 0, 0);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_antipodal: f64 = 0.0;
    for i in 0..1000 {
        let scale = [1e-3, 1.0, 1e3][i % 3];
        let a = vec(scale);
        let b = if i % 10 == 0 {
            a.iter().map(|x| x * 1.000_001).collect()
        } else {
            vec(scale)
        };
        let ab = similarity(&a, &b).unwrap().value();
        let ba = similarity(&b, &a).unwrap().value();
        symmetric += usize::from(ab.to_bits() == ba.to_bits());
        in_range += usize::from((0.0..=1.0).contains(&ab));
        self_one += usize::from(similarity(&a, &a).unwrap().value() == 1.0);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let anti = similarity(&a, &neg).unwrap().value();
        worst_antipodal = worst_antipodal.max(anti);
        antipodal += usize::from(anti <= ANTIPODAL_TOL);
        let err = (ab - oracle_score(&a, &b)).abs();
        worst_oracle = worst_oracle.max(err);
        agree += usize::from(err <= ORACLE_TOL);
    }
    outcome(
        "metric_properties",
        [symmetric, in_range, self_one, antipodal, agree].iter().all(|&n| n == 1000),
        format!(
            "1000 pairs d=100: symmetric {symmetric}, in [0,1] {in_range}, s(v,v)=1 {self_one}, s(v,-v)<={ANTIPODAL_TOL:e} {antipodal} (max {worst_antipodal:e}), oracle within {ORACLE_TOL:e} {agree} (max err {worst_oracle:e})"
        ),
    )
}

fn same_hits(a: &[Vec<QueryHit<usize>>], b: &[Vec<QueryHit<usize>>]) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    let mut same = a.len() == b.len();
    for (x, y) in a.iter().zip(b) {
        let rx: BTreeSet<usize> = x.iter().map(|h| h.row).collect();
        let ry: BTreeSet<usize> = y.iter().map(|h| h.row).collect();
        same &= rx == ry;
        let sy: HashMap<usize, f64> = y.iter().map(|h| (h.row, h.score.value())).collect();
        for h in x {
            if let Some(s) = sy.get(&h.row) {
                worst = worst.max((h.score.value() - s).abs());
            }
        }
    }
    (same, worst)
}

fn batch_naive() -> Outcome {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (q, m, d, seed) in [(50, 200, 16, 1u64), (100, 1000, 128, 2)] {
        let queries = bench::random_matrix(q, d, seed);
        let corpus = bench::random_matrix(m, d, seed + 100);
        let mut hits = 0;
        let mut worst: f64 = 0.0;
        for th in [0.0, 0.25, 0.3, 0.35, 0.9] {
            let opts = QueryOptions::threshold(th);
            let fast = batch_query(&queries, &corpus, &opts).unwrap();
            let slow = naive_query(&queries, &corpus, &opts).unwrap();
            let (same, w) = same_hits(&fast, &slow);
            ok &= same && w <= EQUIV_SCORE_TOL;
            worst = worst.max(w);
            hits += fast.iter().map(Vec::len).sum::<usize>();
        }
        details.push(format!(
            "{q}x{d} vs {m}x{d}: {hits} hits, max score diff {worst:e}"
        ));
    }
    let cfg = BenchConfig {
        rows: 10_000,
        dim: 100,
        queries: 1,
        repeats: 60,
        threshold: SPEED_THRESHOLD,
        seed: 7,
    };
    let runs: Vec<f64> = (0..5)
        .map(|_| {
            let r = bench::run(&cfg).unwrap();
            r[0].millis / r[1].millis
        })
        .collect();
    let mut sorted = runs.clone();
    sorted.sort_by(f64::total_cmp);
    let speedup = sorted[sorted.len() / 2];
    let took = t.elapsed();
    let pass = ok && speedup >= SPEEDUP_MIN && took < STUDY_LIMIT;
    outcome(
        "batch_naive_equivalence_and_speed",
        pass,
        format!(
            "{}; N=10000 d=100 single query at threshold {SPEED_THRESHOLD}: median speedup {speedup:.2}x over 5 rounds {:?} (min {SPEEDUP_MIN}x), {} (limit {})",
            details.join("; "),
            runs.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>(),
            secs(took),
            secs(STUDY_LIMIT)
        ),
    )
}

fn contract_ids(snapshot: &Snapshot) -> HashMap<String, FragmentId> {
    let by_source: HashMap<_, _> = snapshot
        .fragments(Granularity::Contract)
        .map(|f| (f.fragment.source_id, f.fragment.fragment_id))
        .collect();
    snapshot
        .sources()
        .iter()
        .map(|s| (s.path.clone(), by_source[&s.id]))
        .collect()
}

fn clone_study() -> Outcome {
    let t = Instant::now();
    let (files, log) = clone_corpus(7, 70, 15, 15);
    let (store, _) = build_store(
        &files_provider(&files),
        &Hyperparams::default(),
        vec![],
        vec![],
    )
    .unwrap();
    let snap = store.snapshot();
    let cache = MatrixCache::new();
    let ids = contract_ids(&snap);
    let report =
        detect_corpus_clones(&snap, &cache, Granularity::Contract, CLONE_THRESHOLD).unwrap();
    let pairs: BTreeSet<(FragmentId, FragmentId)> = report
        .pairs
        .iter()
        .map(|p| (p.fragment_a, p.fragment_b))
        .collect();
    let found = log
        .iter()
        .filter(|inj| {
            let (a, b) = (ids[&inj.original], ids[&inj.clone]);
            pairs.contains(&(a.min(b), a.max(b)))
        })
        .count();
    let ratios: Vec<f64> = CLONE_SWEEP
        .iter()
        .map(|&th| {
            detect_corpus_clones(&snap, &cache, Granularity::Contract, th)
                .unwrap()
                .clone_ratio
        })
        .collect();
    let monotone = ratios.windows(2).all(|w| w[0] >= w[1]);
    let took = t.elapsed();
    outcome(
        "seeded_clone_study",
        files.len() == 100 && log.len() == 30 && found == 30 && monotone && took < STUDY_LIMIT,
        format!(
            "{} contracts, recall {found}/{} at threshold {CLONE_THRESHOLD}; clone_ratio over {CLONE_SWEEP:?} = {:?} (non-increasing: {monotone}); {} incl. training d=100, 10 epochs (limit {})",
            files.len(),
            log.len(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            secs(took),
            secs(STUDY_LIMIT)
        ),
    )
}

fn bug_study() -> Outcome {
    let t = Instant::now();
    let (files, plants) = bug_corpus(11, 100, RANDOMNESS, &[1, 100], 5, 5);
    let catalog = BugCatalog::builtin();
    let (store, summary) = build_store(
        &files_provider(&files),
        &Hyperparams::default(),
        catalog.categories.clone(),
        catalog.compile().unwrap(),
    )
    .unwrap();
    let snap = store.snapshot();
    let hits = detect_corpus_bugs(&snap, &MatrixCache::new(), BUG_THRESHOLD).unwrap();
    let path_of: HashMap<_, _> = snap
        .sources()
        .iter()
        .map(|s| (s.id, s.path.clone()))
        .collect();
    let planted: BTreeSet<&str> = plants.iter().map(|p| p.path.as_str()).collect();
    let mut true_hits = BTreeSet::new();
    let mut false_positives = 0;
    let mut other_in_planted = 0;
    for h in &hits {
        let path = path_of[&h.fragment_id.source].as_str();
        if !planted.contains(path) {
            false_positives += 1;
        } else if h.bug_id == "bad-randomness-blockhash"
            && (h.score.value() - 1.0).abs() <= EXACT_TOL
        {
            true_hits.insert(path);
        } else {
            other_in_planted += 1;
        }
    }
    let took = t.elapsed();
    outcome(
        "seeded_bug_study",
        plants.len() == 10
            && true_hits.len() == 10
            && false_positives == 0
            && summary.bugs_added == catalog.bugs.len()
            && took < STUDY_LIMIT,
        format!(
            "{} contracts, {} bug records; planted statements hit at 1.0: {}/10 (5 verbatim, 5 literal-mutated) at threshold {BUG_THRESHOLD}; false positives in {} clean contracts: {false_positives}; other hits in planted contracts: {other_in_planted}; {} (limit {})",
            files.len(),
            summary.bugs_added,
            true_hits.len(),
            files.len() - plants.len(),
            secs(took),
            secs(STUDY_LIMIT)
        ),
    )
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn training_sanity() -> Outcome {
    let ts = |t: &[&str]| t.iter().copied().collect::<TokenStream>();
    let mut streams = vec![ts(&["a", "b"]); 1000];
    streams.extend(std::iter::repeat_n(ts(&["c"]), 1000));
    let wins = (0..20u64)
        .filter(|&seed| {
            let t = train_embeddings(
                &streams,
                &Hyperparams {
                    seed,
                    ..Hyperparams::default()
                },
            )
            .unwrap();
            let (a, b, c) = (
                t.get("a").unwrap(),
                t.get("b").unwrap(),
                t.get("c").unwrap(),
            );
            cosine(a, b) > cosine(a, c)
        })
        .count();
    let dump = |seed| {
        let t = train_embeddings(
            &streams,
            &Hyperparams {
                seed,
                ..Hyperparams::default()
            },
        )
        .unwrap();
        let mut out = Vec::new();
        t.write_text(&mut out).unwrap();
        out
    };
    let reproducible = dump(3) == dump(3);
    outcome(
        "training_sanity",
        wins >= TRAINING_WINS_MIN && reproducible,
        format!("cos(a,b) > cos(a,c) in {wins}/20 seeds (min {TRAINING_WINS_MIN}); fixed-seed retraining byte-identical: {reproducible}"),
    )
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn bits(snapshot: &Snapshot) -> Vec<u64> {
    let mut out = Vec::new();
    for g in Granularity::ALL {
        for i in 0..snapshot.fragment_count(g) {
            out.extend(snapshot.row(g, i).1.iter().map(|x| x.to_bits()));
            out.push(snapshot.row_norm(g, i).to_bits());
        }
    }
    let t = snapshot.table();
    for id in 0..t.len() as u32 {
        out.extend(t.vector(id).iter().map(|x| x.to_bits()));
    }
    out.extend(snapshot.bug_matrix().data().iter().map(|x| x.to_bits()));
    out
}

fn persistence() -> Outcome {
    // five contracts of one function and eight statements each: 50 fragments
    let texts: Vec<(String, String)> = (0..5)
        .map(|i| {
            let body: String = (0..8)
                .map(|k| format!("        x{k} = x{k} + {};\n", i * 10 + k))
                .collect();
            (
                format!("p{i}.sol"),
                format!("contract P{i} {{\n    function f{i}() public {{\n{body}    }}\n}}\n"),
            )
        })
        .collect();
    let streams = contract_streams(&texts.iter().map(|t| t.1.clone()).collect::<Vec<_>>());
    let table = train_embeddings(
        &streams,
        &Hyperparams {
            min_count: 1,
            ..Hyperparams::default()
        },
    )
    .unwrap();
    let catalog = BugCatalog::builtin();
    let store = CorpusStore::new(table, catalog.categories.clone());
    ingest(&MemoryProvider { sources: texts }, &store).unwrap();
    solembed::ingestion::add_bugs(&store, catalog.compile().unwrap());
    let snap = store.snapshot();
    let fragments: usize = snap.counts().iter().sum();

    let root = common::fresh_dir("acceptance-persist");
    let dir = root.join("store");
    snap.save(&dir).unwrap();
    let loaded = Snapshot::load(&dir).unwrap();
    let equal =
        loaded == *snap && bits(&loaded) == bits(&snap) && loaded.version() == snap.version();
    let again = root.join("again");
    loaded.save(&again).unwrap();
    let bytes_equal = files_in(&dir) == files_in(&again);

    let names: Vec<String> = files_in(&dir).into_iter().map(|f| f.0).collect();
    let mut named = 0;
    let mut cases = 0;
    let mut misses = Vec::new();
    for (k, name) in names.iter().enumerate() {
        for mode in ["garbage", "missing"] {
            cases += 1;
            let broken = root.join(format!("broken-{k}-{mode}"));
            std::fs::create_dir_all(&broken).unwrap();
            for (n, data) in files_in(&dir) {
                std::fs::write(broken.join(&n), data).unwrap();
            }
            match mode {
                "garbage" => std::fs::write(broken.join(name), "\u{1}garbage\n").unwrap(),
                _ => std::fs::remove_file(broken.join(name)).unwrap(),
            }
            match Snapshot::load(&broken) {
                Err(e) if e.to_string().contains(name.as_str()) => named += 1,
                other => misses.push(format!("{name} ({mode}): {:?}", other.map(|_| "loaded"))),
            }
        }
    }
    outcome(
        "persistence_round_trip",
        fragments == 50 && equal && bytes_equal && named == cases,
        format!(
            "{fragments}-fragment store: load(save(S)) == S bit-exact: {equal}; re-save byte-identical: {bytes_equal}; load errors naming the file: {named}/{cases} (garbage and missing, each of {} files){}",
            names.len(),
            if misses.is_empty() { String::new() } else { format!("; misses {misses:?}") }
        ),
    )
}

fn percentile(sorted: &[Duration], p: f64) -> Duration {
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

fn service_slo() -> Outcome {
    let build = Instant::now();
    let files = sized_corpus(5, SLO_STATEMENTS);
    let catalog = BugCatalog::builtin();
    let (store, _) = build_store(
        &files_provider(&files),
        &Hyperparams::default(),
        catalog.categories.clone(),
        catalog.compile().unwrap(),
    )
    .unwrap();
    let statements = store.snapshot().fragment_count(Granularity::Statement);
    let build_time = build.elapsed();

    let root = common::fresh_dir("acceptance-slo");
    let incoming = root.join("incoming");
    let mut g = Generator::new(555);
    let batch: Vec<solembed::synthetic::SyntheticFile> = (0..40)
        .map(|i| solembed::synthetic::SyntheticFile {
            path: format!("new{i:03}.sol"),
            text: g.contract(&format!("Fresh{i}")).render(&RenderStyle {
                literal_seed: 9_000 + i,
                ..RenderStyle::default()
            }),
        })
        .collect();
    common::write_files(&incoming, &batch);
    let probe_text = batch[0].text.clone();
    let probe_path = incoming.join(&batch[0].path).display().to_string();

    let mut g = Generator::new(556);
    let mut submissions: Vec<String> = files
        .iter()
        .step_by(files.len() / 20)
        .take(20)
        .map(|f| f.text.clone())
        .collect();
    submissions.extend((0..20).map(|i| {
        g.contract(&format!("Outside{i}")).render(&RenderStyle {
            literal_seed: i,
            reformat: true,
            comments: true,
        })
    }));

    let state = AppState::new(
        store,
        ServiceConfig {
            admin_token: Some("acceptance".into()),
            ..ServiceConfig::default()
        },
    );
    let v0 = state.store().version();
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(api::serve(listener, Arc::clone(&state), async {
            let _ = stop_rx.await;
        }));
        let client = reqwest::Client::new();
        let validate = |source: String| {
            let client = client.clone();
            let url = format!("{base}/api/validate");
            async move {
                let t = Instant::now();
                let resp = client.post(url).json(&json!({ "source": source })).send().await.unwrap();
                let status = resp.status();
                let body: Value = resp.json().await.unwrap();
                (t.elapsed(), status, body)
            }
        };

        // warm the matrix cache, then measure
        let _ = validate(submissions[0].clone()).await;
        let mut latencies = Vec::with_capacity(SLO_REQUESTS);
        let mut non_ok = 0;
        let mut hits = 0usize;
        for i in 0..SLO_REQUESTS {
            let (d, status, body) = validate(submissions[i % submissions.len()].clone()).await;
            latencies.push(d);
            if status != 200 {
                non_ok += 1;
            } else {
                hits += body["clone_hits"].as_object().unwrap().values().map(|v| v.as_array().unwrap().len()).sum::<usize>();
            }
        }
        latencies.sort();
        let p95 = percentile(&latencies, 0.95);
        let p50 = percentile(&latencies, 0.50);

        // validate while an ingest is in flight
        let ingest = {
            let client = client.clone();
            let url = format!("{base}/api/corpus/ingest");
            let dir = incoming.display().to_string();
            tokio::spawn(async move {
                let resp = client
                    .post(url)
                    .header("X-Admin-Token", "acceptance")
                    .json(&json!({ "dir": dir }))
                    .send()
                    .await
                    .unwrap();
                (resp.status(), resp.json::<Value>().await.unwrap())
            })
        };
        let mut seen = (0, 0);
        let mut inconsistent = 0;
        let mut rounds = 0;
        loop {
            let finished = ingest.is_finished();
            let mut wave = Vec::new();
            for _ in 0..4 {
                wave.push(tokio::spawn(validate(probe_text.clone())));
            }
            for w in wave {
                let (_, status, body) = w.await.unwrap();
                let version = body["corpus_version"].as_u64().unwrap_or(u64::MAX);
                let self_hit = body["clone_hits"]["contract"]
                    .as_array()
                    .is_some_and(|h| h.iter().any(|x| x["target_path"] == probe_path.as_str() && x["score"] == 1.0));
                match (status.as_u16(), version, self_hit) {
                    (200, v, false) if v == v0 => seen.0 += 1,
                    (200, v, true) if v == v0 + 1 => seen.1 += 1,
                    _ => inconsistent += 1,
                }
            }
            rounds += 1;
            if finished {
                break;
            }
        }
        let (ingest_status, delta) = ingest.await.unwrap();
        let _ = stop_tx.send(());
        let _ = server.await;

        let pass = p95 < SLO_P95
            && non_ok == 0
            && statements >= SLO_STATEMENTS
            && ingest_status == 200
            && delta["added"] == 40
            && inconsistent == 0
            && seen.1 > 0;
        outcome(
            "service_slo",
            pass,
            format!(
                "{statements} corpus statements (built in {}); {SLO_REQUESTS} POST /api/validate: p50 {:.1} ms, p95 {:.1} ms (limit {} ms), {non_ok} non-200, {hits} clone hits; during ingest of 40 contracts: {} responses at pre-batch version {v0}, {} at post-batch version {}, {inconsistent} inconsistent over {rounds} waves; no web UI built",
                secs(build_time),
                p50.as_secs_f64() * 1e3,
                p95.as_secs_f64() * 1e3,
                SLO_P95.as_millis(),
                seen.0,
                seen.1,
                v0 + 1
            ),
        )
    })
}

#[test]
fn acceptance() {
    let outcomes = [
        normalization_invariance(),
        metric_properties(),
        batch_naive(),
        clone_study(),
        bug_study(),
        training_sanity(),
        persistence(),
        service_slo(),
    ];
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.name)
        .collect();
    report(&format!(
        "{}/{} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    ));
    assert!(
        failed.is_empty(),
        "failed: {failed:?}\n{}",
        outcomes
            .iter()
            .map(|o| format!("{}: {}", o.name, o.detail))
            .collect::<Vec<_>>()
            .join("\n")
    );
}
