mod common;

use common::{fixture, fresh_dir, run, stdout_json, write_files};
use solembed::synthetic::clone_corpus;

fn store() -> String {
    fixture("cli").store.to_str().unwrap().to_string()
}

#[test]
fn train_writes_a_loadable_store() {
    let f = fixture("cli");
    let out = run(&["stats", "--store", &store()]);
    assert!(out.status.success());
    let stats = stdout_json(&out);
    assert_eq!(stats["sources"], f.files.len());
    assert_eq!(stats["dim"], 32);
    assert_eq!(stats["format_version"], 1);
    assert_eq!(stats["bugs"], 12);
    assert_eq!(stats["clone_threshold"], 0.95);
    assert!(f.store.join("manifest.json").is_file());
}

#[test]
fn validate_empty_file_has_no_hits() {
    let f = fixture("cli");
    let empty = f.root.join("empty.sol");
    std::fs::write(&empty, "").unwrap();
    let out = run(&["validate", empty.to_str().unwrap(), "--store", &store()]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert!(r["bug_hits"].as_array().unwrap().is_empty());
    for g in ["contract", "function", "statement"] {
        assert!(r["clone_hits"][g].as_array().unwrap().is_empty(), "{g}");
    }
    assert!(r["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn validate_member_reports_contract_hit_at_one() {
    let f = fixture("cli");
    let member = f.corpus.join(&f.files[3].path);
    let out = run(&["validate", member.to_str().unwrap(), "--store", &store()]);
    assert!(out.status.success());
    let r = stdout_json(&out);
    let hits = r["clone_hits"]["contract"].as_array().unwrap();
    assert!(hits.iter().any(|h| h["score"] == 1.0
        && h["target_path"]
            .as_str()
            .unwrap()
            .ends_with(&f.files[3].path)));
}

#[test]
fn output_is_deterministic() {
    let f = fixture("cli");
    let member = f.corpus.join(&f.files[1].path);
    let args = [
        "validate",
        member.to_str().unwrap(),
        "--store",
        &store(),
        "--clone-threshold",
        "0.8",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["clones", "--store", &store(), "--granularity", "function"]);
    let d = run(&["clones", "--store", &store(), "--granularity", "function"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["clones", "--store", "x", "--threshold", "1.5"],
        vec!["clones", "--store", "x", "--threshold", "0"],
        vec!["bugs", "--store", "x", "--no-such-flag"],
        vec!["frobnicate"],
        vec!["clones", "--store", "x", "--granularity", "module"],
        vec!["train", "corpus", "--store", "s", "--dim", "0"],
        vec![],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn blocking_errors_exit_two() {
    let f = fixture("cli");
    let missing = f.root.join("no-such-store");
    let out = run(&["stats", "--store", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));
    let out = run(&[
        "validate",
        f.root.join("missing.sol").to_str().unwrap(),
        "--store",
        &store(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let corrupt = fresh_dir("cli-corrupt");
    for entry in std::fs::read_dir(&f.store).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, corrupt.join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(corrupt.join("fragments.jsonl"), "{not json\n").unwrap();
    let out = run(&["clones", "--store", corrupt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fragments.jsonl"));
}

#[test]
fn clones_and_bugs_print_reports() {
    let out = run(&["clones", "--store", &store(), "--threshold", "0.95"]);
    assert!(out.status.success());
    let r = stdout_json(&out);
    assert_eq!(r["granularity"], "contract");
    assert!(r["pairs"].as_array().unwrap().len() >= 4);
    let out = run(&["bugs", "--store", &store()]);
    assert!(out.status.success());
    let r = stdout_json(&out);
    assert_eq!(r["bug_threshold"], 0.9);
    assert!(r["hits"].is_array());
}

#[test]
fn ingest_adds_new_sources_once() {
    let f = fixture("cli");
    let work = fresh_dir("cli-ingest");
    let store = work.join("store");
    for entry in std::fs::read_dir(&f.store).unwrap() {
        let p = entry.unwrap().path();
        std::fs::create_dir_all(&store).unwrap();
        std::fs::copy(&p, store.join(p.file_name().unwrap())).unwrap();
    }
    let (files, _) = clone_corpus(99, 3, 0, 0);
    let incoming = work.join("incoming");
    write_files(&incoming, &files);
    let args = [
        "ingest",
        incoming.to_str().unwrap(),
        "--store",
        store.to_str().unwrap(),
    ];
    let first = stdout_json(&run(&args));
    assert_eq!(first["added"], 3);
    assert_eq!(first["new_version"], 3);
    assert!(first["oov_rate"].as_f64().unwrap() >= 0.0);
    let again = stdout_json(&run(&args));
    assert_eq!(again["added"], 0);
    assert_eq!(again["skipped_duplicates"], 3);
    assert_eq!(again["new_version"], 3);
    let stats = stdout_json(&run(&["stats", "--store", store.to_str().unwrap()]));
    assert_eq!(stats["sources"], f.files.len() + 3);
    assert_eq!(stats["version"], 3);
}

#[test]
fn bench_prints_csv() {
    let out = run(&["bench", "--rows", "300", "--dim", "16", "--repeats", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,rows,dim,millis");
    assert!(lines[1].starts_with("naive,300,16,"));
    assert!(lines[2].starts_with("batch,300,16,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn parse_dumps_ast_and_streams() {
    let f = fixture("cli");
    let file = f.root.join("tiny.sol");
    std::fs::write(&file, "contract T { function f() public { x = 1; } }").unwrap();
    let out = run(&["parse", file.to_str().unwrap(), "--emit-ast"]);
    assert!(out.status.success());
    let ast = String::from_utf8(out.stdout).unwrap();
    assert!(ast.starts_with("SourceUnitNode@1:1"));
    assert!(ast.contains("\n  ContractDefinition@1:1"));
    let out = run(&[
        "parse",
        file.to_str().unwrap(),
        "--emit-stream",
        "statement",
    ]);
    let streams = String::from_utf8(out.stdout).unwrap();
    assert_eq!(streams.lines().count(), 1);
    assert!(streams.contains("NUM"));
}
