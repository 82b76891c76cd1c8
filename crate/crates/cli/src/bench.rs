//! Scalar loop versus matrix kernel on random vectors.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use solembed::similarity::{batch_query, naive_query, QueryOptions, ResidentMatrix};
use solembed::Result;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub rows: usize,
    pub dim: usize,
    pub queries: usize,
    pub repeats: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            rows: 10_000,
            dim: 100,
            queries: 1,
            repeats: 20,
            threshold: 0.9,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    pub rows: usize,
    pub dim: usize,
    pub millis: f64,
}

/// Uniform entries in [-1, 1).
pub fn random_matrix(rows: usize, dim: usize, seed: u64) -> ResidentMatrix<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ResidentMatrix::new(dim, 0);
    let mut row = vec![0.0; dim];
    for i in 0..rows {
        row.iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        m.push(&row, i, false).expect("row has the matrix width");
    }
    m
}

fn median_millis(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(repeats.max(1));
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Median wall time of both methods over `repeats` runs after one warm-up.
/// The scalar loop runs on the calling thread only.
pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let corpus = random_matrix(cfg.rows, cfg.dim, cfg.seed);
    let queries = random_matrix(cfg.queries, cfg.dim, cfg.seed.wrapping_add(1));
    let opts = QueryOptions::threshold(cfg.threshold);
    let naive = median_millis(cfg.repeats, || {
        std::hint::black_box(naive_query(&queries, &corpus, &opts)?);
        Ok(())
    })?;
    let batch = median_millis(cfg.repeats, || {
        std::hint::black_box(batch_query(&queries, &corpus, &opts)?);
        Ok(())
    })?;
    let row = |method, millis| BenchRow {
        method,
        rows: cfg.rows,
        dim: cfg.dim,
        millis,
    };
    Ok(vec![row("naive", naive), row("batch", batch)])
}

pub fn csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("method,rows,dim,millis\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.4}\n",
            r.method, r.rows, r.dim, r.millis
        ));
    }
    out
}
