//! Downstream tasks on learned record embeddings: clustering scored by the
//! adjusted Rand index, classification scored by precision/recall/F1, and
//! link prediction scored by ROC AUC.

mod classify;
mod cluster;
mod link;

pub use classify::{
    class_prf, classify_eval, confusion_matrix, macro_prf, stratified_split, ClassificationReport, ClassifyOptions,
    LogisticOptions, LogisticRegression, Prf,
};
pub use cluster::{ari, kmeans, kmeans_restarts, KMeans};
pub use link::{auc, link_predict_eval, EdgeOperator, LinkOptions, LinkReport, RecGraph};
