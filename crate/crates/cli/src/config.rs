use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use viewvec_core::{default_views, NegativeMode, TrainConfig, VocabKind, ViewMode};

use crate::cli::{NegativeModeArg, TrainArgs, VocabArg};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// k-means runs; the lowest-inertia one is scored.
    pub restarts: usize,
    pub train_fraction: f64,
    pub remove_fraction: f64,
    pub folds: usize,
    pub negative_ratio: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            seed: 0,
            max_iter: 300,
            restarts: 10,
            train_fraction: 0.7,
            remove_fraction: 0.2,
            folds: 5,
            negative_ratio: 1.0,
        }
    }
}

/// Everything that determines a run. Loaded from JSON, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub export: Option<PathBuf>,
    /// Views a dataset record may contain.
    pub views: Vec<String>,
    /// Views to train on; all of `views` when absent.
    pub train_views: Option<Vec<String>>,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            checkpoint: None,
            export: None,
            views: default_views(),
            train_views: None,
            train: TrainConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(RunConfig::default()), read_json)
    }

    pub fn apply(&mut self, args: &TrainArgs) {
        if let Some(p) = &args.dataset {
            self.dataset = Some(p.clone());
        }
        if let Some(p) = &args.checkpoint {
            self.checkpoint = Some(p.clone());
        }
        if let Some(p) = &args.export {
            self.export = Some(p.clone());
        }
        if let Some(v) = &args.views {
            self.train_views = Some(v.clone());
        }
        let t = &mut self.train;
        macro_rules! set {
            ($($field:ident <- $arg:ident),*) => {
                $(if let Some(x) = args.$arg { t.$field = x; })*
            };
        }
        set!(seed <- seed, epochs <- epochs, dim <- dim, max_degree <- max_degree, hashes <- hashes,
             alpha <- alpha, negatives <- negatives, label_weight <- label_weight, threads <- threads);
        if args.alpha_min.is_some() {
            t.alpha_min = args.alpha_min;
        }
        if let Some(m) = args.negative_mode {
            t.negative_mode = match m {
                NegativeModeArg::ViewSpecific => NegativeMode::ViewSpecific,
                NegativeModeArg::Global => NegativeMode::Global,
            };
        }
        if let Some(v) = args.vocab {
            t.vocab = match v {
                VocabArg::Dictionary => VocabKind::Dictionary,
                VocabArg::Online => VocabKind::Online,
            };
        }
        if args.exclude_context {
            t.exclude_context = true;
        }
    }

    /// Resolves `train_views` into the trainer's view mode and the views the
    /// dataset is restricted to.
    pub fn resolve_views(&mut self) -> Result<Vec<String>, CliError> {
        let Some(train_views) = &self.train_views else {
            return Ok(self.views.clone());
        };
        if let Some(v) = train_views.iter().find(|v| !self.views.contains(v)) {
            return Err(CliError::usage(format!(
                "view {v} is not one of the dataset views {:?}",
                self.views
            )));
        }
        if let [single] = train_views.as_slice() {
            self.train.view_mode = ViewMode::Single(single.clone());
            return Ok(self.views.clone());
        }
        Ok(train_views.clone())
    }
}
