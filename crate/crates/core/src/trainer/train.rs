use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::sgd::{InputRow, StepScratch};
use super::{seeded, stream, Model, TrainConfig, ViewMode};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean record-branch loss per step, one entry per trained view.
    pub view_loss: Vec<f64>,
    /// Mean label-branch loss per step; `None` when no label step ran.
    pub label_loss: Option<f64>,
    pub learning_rate: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// `(record, view)` pairs whose graph has no nodes and so contributed no
    /// steps.
    pub degenerate_graphs: usize,
    /// Record-branch steps per epoch.
    pub steps_per_epoch: u64,
}

/// Trains on a dataset and returns the model.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    train_with_report(dataset, config, |_| {}).map(|(m, _)| m)
}

#[derive(Default)]
struct Accum {
    view_loss: Vec<f64>,
    view_steps: Vec<u64>,
    label_loss: f64,
    label_steps: u64,
}

impl Accum {
    fn new(views: usize) -> Self {
        Accum {
            view_loss: vec![0.0; views],
            view_steps: vec![0; views],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: Accum) {
        for v in 0..self.view_loss.len() {
            self.view_loss[v] += other.view_loss[v];
            self.view_steps[v] += other.view_steps[v];
        }
        self.label_loss += other.label_loss;
        self.label_steps += other.label_steps;
    }
}

struct Plan<'a> {
    model: &'a Model,
    contexts: &'a [Vec<Vec<u64>>],
    exclusions: Option<Vec<Vec<HashSet<u64>>>>,
    record_labels: Vec<Vec<usize>>,
    progress: AtomicU64,
    total_steps: u64,
}

impl Plan<'_> {
    fn run(&self, records: &[usize], rng: &mut ChaCha8Rng, scratch: &mut StepScratch) -> Result<Accum> {
        let model = self.model;
        let config = &model.config;
        let beta = config.label_weight;
        let mut acc = Accum::new(model.views.len());
        for &r in records {
            for (v, tokens) in self.contexts[r].iter().enumerate() {
                let exclude = self.exclusions.as_ref().map(|e| &e[r][v]);
                for &token in tokens {
                    let done = self.progress.fetch_add(1, Ordering::Relaxed);
                    let lr = config.learning_rate(done, self.total_steps);
                    let loss = model.sgd_step_with(InputRow::Record(r), v, token, lr, true, exclude, rng, scratch)?;
                    acc.view_loss[v] += loss;
                    acc.view_steps[v] += 1;
                }
                // A zero weight leaves every parameter untouched; skipping the
                // branch also keeps the negative-sampling stream unchanged.
                if beta == 0.0 {
                    continue;
                }
                let lr = config.learning_rate(self.progress.load(Ordering::Relaxed), self.total_steps) * beta;
                for &l in &self.record_labels[r] {
                    for &token in tokens {
                        let loss = model.sgd_step_with(InputRow::Label(l), v, token, lr, true, exclude, rng, scratch)?;
                        acc.label_loss += loss;
                        acc.label_steps += 1;
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// Trains on a dataset, calling `on_epoch` after every epoch.
///
/// Records are visited in a freshly shuffled order each epoch. For each view
/// graph of a record, every context token gets one step on the record row,
/// then one step per record label on that label's row with the learning rate
/// scaled by `label_weight`. The learning rate decays linearly from `alpha`
/// to `alpha_min` over all record-branch steps.
pub fn train_with_report(
    dataset: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Model, TrainReport)> {
    let (model, contexts) = Model::initialize(dataset, config)?;
    let degenerate_graphs = contexts
        .iter()
        .flat_map(|per_view| per_view.iter())
        .filter(|ids| ids.is_empty())
        .count();
    if degenerate_graphs > 0 {
        log::info!("{degenerate_graphs} empty view graphs contribute no training steps");
    }
    let steps_per_epoch: u64 = contexts
        .iter()
        .flat_map(|per_view| per_view.iter().map(|ids| ids.len() as u64))
        .sum();
    let exclusions = config.exclude_context.then(|| {
        contexts
            .iter()
            .map(|per_view| per_view.iter().map(|ids| ids.iter().copied().collect()).collect())
            .collect()
    });
    let record_labels = dataset
        .records
        .iter()
        .map(|r| r.labels.iter().filter_map(|l| model.label_row(l)).collect())
        .collect();
    let plan = Plan {
        model: &model,
        contexts: &contexts,
        exclusions,
        record_labels,
        progress: AtomicU64::new(0),
        total_steps: steps_per_epoch * config.epochs as u64,
    };

    let threads = config.threads.min(dataset.len()).max(1);
    if threads > 1 {
        log::warn!("training with {threads} threads; results are not bit-reproducible");
    }
    let mut shuffle_rng = seeded(config.seed, stream::SHUFFLE);
    let mut worker_rngs: Vec<ChaCha8Rng> = (0..threads as u64)
        .map(|w| seeded(config.seed.wrapping_add(w), stream::NEGATIVES))
        .collect();
    let mut scratches: Vec<StepScratch> = (0..threads).map(|_| StepScratch::new()).collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        degenerate_graphs,
        steps_per_epoch,
    };

    for epoch in 0..config.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let acc = if threads == 1 {
            plan.run(&order, &mut worker_rngs[0], &mut scratches[0])?
        } else {
            let chunk = order.len().div_ceil(threads);
            let results: Vec<Result<Accum>> = std::thread::scope(|s| {
                let handles: Vec<_> = order
                    .chunks(chunk)
                    .zip(worker_rngs.iter_mut())
                    .zip(scratches.iter_mut())
                    .map(|((records, rng), scratch)| {
                        let plan = &plan;
                        s.spawn(move || plan.run(records, rng, scratch))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            });
            let mut acc = Accum::new(model.views.len());
            for r in results {
                acc.merge(r?);
            }
            acc
        };
        model.check_finite()?;
        let stats = EpochStats {
            epoch: epoch + 1,
            view_loss: acc
                .view_loss
                .iter()
                .zip(&acc.view_steps)
                .map(|(l, &n)| if n > 0 { l / n as f64 } else { 0.0 })
                .collect(),
            label_loss: (acc.label_steps > 0).then(|| acc.label_loss / acc.label_steps as f64),
            learning_rate: config.learning_rate(plan.progress.load(Ordering::Relaxed), plan.total_steps),
            elapsed: start.elapsed(),
        };
        on_epoch(&stats);
        report.epochs.push(stats);
    }
    drop(plan);
    Ok((model, report))
}

/// Trains one single-view model per dataset view and concatenates the record
/// rows, giving `views * dim` columns in dataset record order.
pub fn concat_single_views(dataset: &Dataset, config: &TrainConfig) -> Result<EmbeddingSet> {
    let mut combined: Option<EmbeddingSet> = None;
    for view in &dataset.views {
        let cfg = TrainConfig {
            view_mode: ViewMode::Single(view.clone()),
            ..config.clone()
        };
        let part = train(dataset, &cfg)?.export();
        combined = Some(match combined {
            None => part,
            Some(acc) => acc.concat(&part)?,
        });
    }
    combined.ok_or_else(|| Error::Config("dataset has no views".into()))
}
