//! Semi-supervised multi-view skipgram over rooted-subgraph contexts.
//!
//! Two input layers (record rows and label rows) share one hash-embedding
//! output layer per view. Every context token of a record is predicted from
//! the record row and, when the record is labeled, from each of its label
//! rows, using negative sampling against the view's noise distribution.

mod checkpoint;
mod config;
mod online;
mod sgd;
mod train;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{NegativeMode, TrainConfig, VocabKind, ViewMode};
pub use sgd::{log_sigmoid_loss, InputRow, StepGradients, StepScratch};
pub use train::{concat_single_views, train, train_with_report, EpochStats, TrainReport};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::{Dataset, Record};
use crate::hash_embed::HashEmbeddingTable;
use crate::matrix::Matrix;
use crate::vocab::{NoiseTable, VocabMode, Vocabulary};
use crate::wl::{get_subgraphs, SubgraphToken};

/// RNG streams derived from the run seed. Keeping them apart makes, e.g.,
/// the presence of label rows irrelevant to record initialization.
pub(crate) mod stream {
    pub const RECORD_INIT: u64 = 1;
    pub const LABEL_INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const NEGATIVES: u64 = 4;
    pub const ONLINE: u64 = 5;
}

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Output layer of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub vocab: Vocabulary,
    pub table: HashEmbeddingTable,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: TrainConfig,
    views: Vec<String>,
    record_ids: Vec<String>,
    record_index: HashMap<String, usize>,
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    records: Matrix,
    label_rows: Matrix,
    outputs: Vec<OutputLayer>,
    global_noise: Option<NoiseTable>,
}

/// Rooted-subgraph tokens of a record, one list per requested view.
pub fn record_contexts(record: &Record, views: &[String], max_degree: usize) -> Vec<Vec<SubgraphToken>> {
    views
        .iter()
        .map(|v| record.graph(v).map_or_else(Vec::new, |g| get_subgraphs(g, max_degree)))
        .collect()
}

fn table_seed(seed: u64, view: usize) -> u64 {
    seed ^ (view as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl Model {
    /// An untrained model: vocabularies and output tables built from
    /// `dataset`, every row freshly initialized.
    pub fn new(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
        Model::initialize(dataset, config).map(|(m, _)| m)
    }

    /// Builds vocabularies, output tables and freshly initialized input rows
    /// for a dataset. Returns the model and the token ids of every record's
    /// context (`[record][view]`).
    pub(crate) fn initialize(dataset: &Dataset, config: &TrainConfig) -> Result<(Model, Vec<Vec<Vec<u64>>>)> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::Config("dataset has no records".into()));
        }
        let views = match &config.view_mode {
            ViewMode::Multi => dataset.views.clone(),
            ViewMode::Single(v) => {
                if !dataset.views.contains(v) {
                    return Err(Error::UnknownView(v.clone()));
                }
                vec![v.clone()]
            }
        };
        let contexts: Vec<Vec<Vec<SubgraphToken>>> = dataset
            .records
            .iter()
            .map(|r| record_contexts(r, &views, config.max_degree))
            .collect();

        let mode = match config.vocab {
            VocabKind::Dictionary => VocabMode::Dictionary,
            VocabKind::Online => VocabMode::OnlineHash {
                capacity: config.online_capacity,
            },
        };
        let mut outputs = Vec::with_capacity(views.len());
        for (v, view) in views.iter().enumerate() {
            let vocab = Vocabulary::build(
                contexts.iter().flat_map(|c| c[v].iter()),
                view,
                config.smoothing,
                mode,
            )?;
            if vocab.is_empty() {
                return Err(Error::EmptyVocabulary(view.clone()));
            }
            let buckets = config.buckets_for(view, vocab.observed());
            let online = matches!(mode, VocabMode::OnlineHash { .. });
            let mut table = HashEmbeddingTable::new(
                vocab.capacity(),
                buckets,
                config.dim,
                config.hashes,
                table_seed(config.seed, v),
                online,
            )?;
            if online {
                for &id in vocab.ids() {
                    table.register(id)?;
                }
            }
            outputs.push(OutputLayer { vocab, table });
        }

        let ids: Vec<Vec<Vec<u64>>> = contexts
            .iter()
            .map(|per_view| {
                per_view
                    .iter()
                    .zip(&outputs)
                    .map(|(tokens, out)| {
                        tokens
                            .iter()
                            .map(|t| out.vocab.token_id(t).expect("token is in its own vocabulary"))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let bound = 0.5 / config.dim as f64;
        let records = Matrix::uniform(
            dataset.len(),
            config.dim,
            bound,
            &mut seeded(config.seed, stream::RECORD_INIT),
        );
        let labels: Vec<String> = dataset.label_alphabet.iter().cloned().collect();
        let label_rows = Matrix::uniform(
            labels.len(),
            config.dim,
            bound,
            &mut seeded(config.seed, stream::LABEL_INIT),
        );
        let record_ids: Vec<String> = dataset.records.iter().map(|r| r.id.clone()).collect();
        let model = Model::assemble(config.clone(), views, record_ids, labels, records, label_rows, outputs);
        Ok((model, ids))
    }

    pub(crate) fn assemble(
        config: TrainConfig,
        views: Vec<String>,
        record_ids: Vec<String>,
        labels: Vec<String>,
        records: Matrix,
        label_rows: Matrix,
        outputs: Vec<OutputLayer>,
    ) -> Model {
        let record_index = record_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let label_index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let global_noise = NoiseTable::union(&outputs.iter().map(|o| &o.vocab).collect::<Vec<_>>());
        Model {
            config,
            views,
            record_ids,
            record_index,
            labels,
            label_index,
            records,
            label_rows,
            outputs,
            global_noise,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Views with an output layer, in training order.
    pub fn views(&self) -> &[String] {
        &self.views
    }

    pub fn view_index(&self, view: &str) -> Option<usize> {
        self.views.iter().position(|v| v == view)
    }

    pub fn outputs(&self) -> &[OutputLayer] {
        &self.outputs
    }

    pub fn output(&self, view: usize) -> &OutputLayer {
        &self.outputs[view]
    }

    pub fn global_noise(&self) -> Option<&NoiseTable> {
        self.global_noise.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn record_ids(&self) -> &[String] {
        &self.record_ids
    }

    pub fn record_row(&self, id: &str) -> Option<usize> {
        self.record_index.get(id).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_row(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn record_matrix(&self) -> &Matrix {
        &self.records
    }

    pub fn label_matrix(&self) -> &Matrix {
        &self.label_rows
    }

    pub fn record_vector(&self, id: &str) -> Option<Vec<f64>> {
        self.record_row(id).map(|r| self.records.row(r))
    }

    pub(crate) fn input_matrix(&self, input: InputRow) -> (&Matrix, usize) {
        match input {
            InputRow::Record(r) => (&self.records, r),
            InputRow::Label(l) => (&self.label_rows, l),
        }
    }

    /// Record embeddings in row order; the model's end product.
    pub fn export(&self) -> EmbeddingSet {
        EmbeddingSet::new(self.record_ids.clone(), self.records.to_rows())
            .expect("record ids are unique")
    }

    pub fn is_online(&self) -> bool {
        self.outputs
            .iter()
            .all(|o| matches!(o.vocab.mode(), VocabMode::OnlineHash { .. }))
    }

    /// Total trainable parameters: both input layers plus every output table.
    pub fn param_count(&self) -> u64 {
        (self.records.len() + self.label_rows.len()) as u64
            + self.outputs.iter().map(|o| o.table.param_count()).sum::<u64>()
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.records.all_finite() {
            return Err(Error::NumericFailure("record embeddings".into()));
        }
        if !self.label_rows.all_finite() {
            return Err(Error::NumericFailure("label embeddings".into()));
        }
        for (view, out) in self.views.iter().zip(&self.outputs) {
            if !out.table.all_finite() {
                return Err(Error::NumericFailure(format!("output layer {view}")));
            }
        }
        Ok(())
    }

    /// Folds newly observed records into the noise distributions.
    pub fn rebuild_noise<'a>(&mut self, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
        let mut per_view: Vec<Vec<SubgraphToken>> = vec![Vec::new(); self.views.len()];
        for record in records {
            for (v, tokens) in record_contexts(record, &self.views, self.config.max_degree)
                .into_iter()
                .enumerate()
            {
                per_view[v].extend(tokens);
            }
        }
        for (out, tokens) in self.outputs.iter_mut().zip(&per_view) {
            out.vocab.absorb(tokens)?;
            if matches!(out.vocab.mode(), VocabMode::OnlineHash { .. }) {
                for &id in out.vocab.ids() {
                    out.table.register(id)?;
                }
            }
        }
        self.global_noise = NoiseTable::union(&self.outputs.iter().map(|o| &o.vocab).collect::<Vec<_>>());
        Ok(())
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.views == other.views
            && self.record_ids == other.record_ids
            && self.labels == other.labels
            && self.records == other.records
            && self.label_rows == other.label_rows
            && self.outputs == other.outputs
    }
}
