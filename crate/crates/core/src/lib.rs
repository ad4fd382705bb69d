//! Multi-view graph-record embeddings.
//!
//! Each record carries one node-labeled dependency graph per view. Records
//! are embedded with a skipgram whose contexts are Weisfeiler-Lehman rooted
//! subgraphs, whose output layers are per-view hash embeddings, and whose
//! negatives are drawn from the noise distribution of the positive's view.
//! Optional record labels add a second input layer that is trained on the
//! same contexts. `eval` scores embeddings on clustering, classification and
//! link prediction.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hash_embed;
pub mod matrix;
pub mod synth;
pub mod trainer;
pub mod vocab;
pub mod wl;

pub use embedding::EmbeddingSet;
pub use error::{Error, Result};
pub use graph::{default_views, load_dataset, validate, Dataset, DependencyGraph, Record};
pub use hash_embed::HashEmbeddingTable;
pub use synth::{generate_synthetic, SynthConfig, Synthetic};
pub use trainer::{
    concat_single_views, read_checkpoint, train, train_with_report, write_checkpoint, Model, NegativeMode,
    TrainConfig, VocabKind, ViewMode,
};
pub use vocab::{VocabMode, Vocabulary};
pub use wl::{get_subgraphs, wl_subgraph, SubgraphToken};
