#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use solembed::synthetic::{clone_corpus, SyntheticFile};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_solembed"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

pub fn write_files(dir: &Path, files: &[SyntheticFile]) {
    std::fs::create_dir_all(dir).unwrap();
    for f in files {
        std::fs::write(dir.join(&f.path), &f.text).unwrap();
    }
}

pub fn fresh_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub struct Fixture {
    pub root: PathBuf,
    pub corpus: PathBuf,
    pub store: PathBuf,
    pub files: Vec<SyntheticFile>,
}

/// A corpus of 16 contracts trained into a store by the binary, once per
/// test process.
pub fn fixture(name: &str) -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let root = fresh_dir(name);
        let corpus = root.join("corpus");
        let store = root.join("store");
        let (files, _) = clone_corpus(21, 12, 2, 2);
        write_files(&corpus, &files);
        let out = run(&[
            "train",
            corpus.to_str().unwrap(),
            "--store",
            store.to_str().unwrap(),
            "--dim",
            "32",
            "--epochs",
            "3",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        Fixture {
            root,
            corpus,
            store,
            files,
        }
    })
}
