//! Token embedding learning and fragment vector composition.

mod table;
mod train;
mod vocab;

pub use table::{embed_fragment, embed_stream, EmbeddingTable, FragmentEmbedding};
pub use train::{train_embeddings, Hyperparams, MIN_LEARNING_RATE};
pub use vocab::{VocabEntry, Vocabulary};
