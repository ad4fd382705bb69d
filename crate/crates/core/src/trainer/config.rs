use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::DEFAULT_ONLINE_CAPACITY;

/// Where negative samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// From the noise distribution of the positive token's own view.
    #[default]
    ViewSpecific,
    /// From the union of all view vocabularies.
    Global,
}

/// Which output layers a run trains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    #[default]
    Multi,
    Single(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VocabKind {
    #[default]
    Dictionary,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Maximum rooted-subgraph degree.
    pub max_degree: usize,
    pub dim: usize,
    pub epochs: usize,
    /// Per-view bucket counts; views not listed use `ceil(K / 10)`.
    pub buckets: BTreeMap<String, usize>,
    /// Hash functions per output table.
    pub hashes: usize,
    pub alpha: f64,
    /// Final learning rate; `None` means `alpha * 1e-4`.
    pub alpha_min: Option<f64>,
    /// Negatives per positive.
    pub negatives: usize,
    /// Exponent of the noise distribution.
    pub smoothing: f64,
    /// Weight of the label branch.
    pub label_weight: f64,
    pub negative_mode: NegativeMode,
    /// Reject negatives that occur anywhere in the record's context for that
    /// view, not only the current positive.
    pub exclude_context: bool,
    pub view_mode: ViewMode,
    pub vocab: VocabKind,
    /// Id space per view in online mode.
    pub online_capacity: u64,
    pub seed: u64,
    /// Worker threads. More than one enables unsynchronized parallel updates.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_degree: 2,
            dim: 64,
            epochs: 100,
            buckets: BTreeMap::new(),
            hashes: 2,
            alpha: 0.1,
            alpha_min: None,
            negatives: 2,
            smoothing: 0.75,
            label_weight: 1.0,
            negative_mode: NegativeMode::ViewSpecific,
            exclude_context: false,
            view_mode: ViewMode::Multi,
            vocab: VocabKind::Dictionary,
            online_capacity: DEFAULT_ONLINE_CAPACITY,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.hashes == 0 {
            return fail("hashes must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail("alpha must be positive");
        }
        if let Some(min) = self.alpha_min {
            if !(0.0..=self.alpha).contains(&min) {
                return fail("alpha_min must lie in [0, alpha]");
            }
        }
        if !(0.0..=1.0).contains(&self.label_weight) {
            return fail("label_weight must lie in [0, 1]");
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return fail("smoothing must be non-negative");
        }
        if self.online_capacity == 0 {
            return fail("online_capacity must be positive");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        if self.buckets.values().any(|&b| b == 0) {
            return fail("bucket counts must be positive");
        }
        Ok(())
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min.unwrap_or(self.alpha * 1e-4)
    }

    /// Bucket count for a view with `observed` distinct tokens.
    pub fn buckets_for(&self, view: &str, observed: usize) -> usize {
        self.buckets
            .get(view)
            .copied()
            .unwrap_or_else(|| observed.div_ceil(10).max(1))
    }

    /// Linearly decayed learning rate after `done` of `total` steps.
    pub fn learning_rate(&self, done: u64, total: u64) -> f64 {
        if total == 0 {
            return self.alpha;
        }
        let frac = (done as f64 / total as f64).min(1.0);
        self.alpha - (self.alpha - self.alpha_min()) * frac
    }
}
