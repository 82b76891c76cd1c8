//! Skip-gram with negative sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalizer::TokenStream;

use super::table::EmbeddingTable;
use super::vocab::Vocabulary;

/// Final learning rate of the linear decay schedule.
pub const MIN_LEARNING_RATE: f64 = 1e-4;

/// Exponent applied to unigram counts for the noise distribution.
const NOISE_POWER: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 10,
            initial_lr: 0.025,
            min_count: 2,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidHyperparams(format!(
                "{what} must be positive"
            )))
        };
        if self.dim == 0 {
            return bad("dim");
        }
        if self.window == 0 {
            return bad("window");
        }
        if self.negatives == 0 {
            return bad("negatives");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.min_count == 0 {
            return bad("min_count");
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return bad("initial_lr");
        }
        Ok(())
    }
}

/// Trains token vectors on `streams`. Single-threaded and fully determined by
/// `hp.seed`. Returns the input-side vectors. Noise samples equal to the
/// center or the context token are skipped.
pub fn train_embeddings<'a, I>(streams: I, hp: &Hyperparams) -> Result<EmbeddingTable>
where
    I: IntoIterator<Item = &'a TokenStream>,
    I::IntoIter: Clone,
{
    hp.validate()?;
    let streams = streams.into_iter();
    let vocab = Vocabulary::build(streams.clone(), hp.min_count);
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let corpus: Vec<Vec<u32>> = streams
        .map(|s| s.tokens().iter().filter_map(|t| vocab.id(t)).collect())
        .filter(|s: &Vec<u32>| !s.is_empty())
        .collect();

    let d = hp.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let bound = 0.5 / d as f64;
    let mut input: Vec<f64> = (0..v * d)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut output = vec![0.0f64; v * d];

    let weights = (0..v as u32).map(|id| (vocab.frequency(id) as f64).powf(NOISE_POWER));
    let noise = WeightedIndex::new(weights).expect("vocabulary frequencies are positive");

    let words_per_epoch: usize = corpus.iter().map(Vec::len).sum();
    let total = (words_per_epoch * hp.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut grad = vec![0.0f64; d];

    for _ in 0..hp.epochs {
        for sentence in &corpus {
            for (t, &center) in sentence.iter().enumerate() {
                let progress = processed as f64 / total;
                let lr = hp.initial_lr - (hp.initial_lr - MIN_LEARNING_RATE) * progress;
                processed += 1;

                let reach = rng.random_range(1..=hp.window);
                let lo = t.saturating_sub(reach);
                let hi = (t + reach).min(sentence.len() - 1);
                for (c, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if c == t {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let w_in = &mut input[center as usize * d..(center as usize + 1) * d];
                    for k in 0..=hp.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let s = noise.sample(&mut rng) as u32;
                            if s == context || s == center {
                                continue;
                            }
                            (s, 0.0)
                        };
                        let w_out = &mut output[target as usize * d..(target as usize + 1) * d];
                        let dot: f64 = w_in.iter().zip(w_out.iter()).map(|(a, b)| a * b).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for j in 0..d {
                            grad[j] += g * w_out[j];
                            w_out[j] += g * w_in[j];
                        }
                    }
                    for (x, g) in w_in.iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
    }
    Ok(EmbeddingTable::new(vocab, d, input))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
