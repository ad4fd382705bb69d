//! Deterministic synthetic multi-view datasets with planted class structure.
//!
//! Each class owns, per view, a preferred subset of node labels and a
//! label-to-label successor map. A node's label is drawn from its class's
//! preferred subset with probability `class_signal_strength` (otherwise
//! uniformly from the view alphabet), and each out-edge follows the class's
//! successor map with the same probability (otherwise it targets a uniform
//! random node). Rooted-subgraph distributions therefore differ across
//! classes, with separation controlled by the strength.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{default_views, Dataset, DependencyGraph, Record};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub records_per_class: usize,
    pub nodes_per_graph: usize,
    /// Size of the node-label alphabet of every view.
    pub alphabet_size: usize,
    /// Out-edges attempted per node.
    pub out_degree: usize,
    pub class_signal_strength: f64,
    /// When set, a view carries only the listed classes' signal.
    pub view_signal_split: Option<BTreeMap<String, Vec<usize>>>,
    /// Fraction of records that carry their class as a record label.
    pub label_fraction: f64,
    pub views: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 3,
            records_per_class: 20,
            nodes_per_graph: 12,
            alphabet_size: 12,
            out_degree: 2,
            class_signal_strength: 0.9,
            view_signal_split: None,
            label_fraction: 0.0,
            views: default_views(),
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_classes", self.num_classes),
            ("records_per_class", self.records_per_class),
            ("nodes_per_graph", self.nodes_per_graph),
            ("alphabet_size", self.alphabet_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, value) in [
            ("class_signal_strength", self.class_signal_strength),
            ("label_fraction", self.label_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if self.views.is_empty() {
            return Err(Error::Config("at least one view is required".into()));
        }
        if let Some(split) = &self.view_signal_split {
            for (view, classes) in split {
                if !self.views.contains(view) {
                    return Err(Error::UnknownView(view.clone()));
                }
                if let Some(c) = classes.iter().find(|&&c| c >= self.num_classes) {
                    return Err(Error::Config(format!(
                        "view_signal_split assigns unknown class {c} to {view}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset together with the ground-truth class of every record.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub classes: Vec<usize>,
}

impl Synthetic {
    pub fn class_name(class: usize) -> String {
        format!("class{class}")
    }

    /// `(record_id, class_name)` pairs in record order.
    pub fn truth(&self) -> Vec<(String, String)> {
        self.dataset
            .records
            .iter()
            .zip(&self.classes)
            .map(|(r, &c)| (r.id.clone(), Self::class_name(c)))
            .collect()
    }
}

struct ClassPlan {
    preferred: Vec<usize>,
    successor: Vec<usize>,
}

/// Records are emitted round-robin over classes so any contiguous slice is
/// close to balanced.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut structure_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    structure_rng.set_stream(1);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_rng.set_stream(2);

    let m = cfg.alphabet_size;
    let per_class = m.div_ceil(cfg.num_classes).max(1);
    // plans[view][class]
    let plans: Vec<Vec<ClassPlan>> = cfg
        .views
        .iter()
        .map(|_| {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut structure_rng);
            (0..cfg.num_classes)
                .map(|c| {
                    let preferred = (0..per_class).map(|j| order[(c * per_class + j) % m]).collect();
                    let mut successor: Vec<usize> = (0..m).collect();
                    successor.shuffle(&mut structure_rng);
                    ClassPlan {
                        preferred,
                        successor,
                    }
                })
                .collect()
        })
        .collect();

    let total = cfg.num_classes * cfg.records_per_class;
    let mut records = Vec::with_capacity(total);
    let mut classes = Vec::with_capacity(total);
    for i in 0..total {
        let class = i % cfg.num_classes;
        let mut graphs = BTreeMap::new();
        for (v, view) in cfg.views.iter().enumerate() {
            let carries = cfg
                .view_signal_split
                .as_ref()
                .map(|split| split.get(view).is_some_and(|cs| cs.contains(&class)))
                .unwrap_or(true);
            let strength = if carries {
                cfg.class_signal_strength
            } else {
                0.0
            };
            let graph = sample_graph(cfg, view, &plans[v][class], strength, &mut sample_rng);
            graphs.insert(view.clone(), graph);
        }
        records.push(Record {
            id: format!("r{i:04}"),
            graphs,
            labels: BTreeSet::new(),
        });
        classes.push(class);
    }

    let labeled = (cfg.label_fraction * total as f64).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut sample_rng);
    for &i in &order[..labeled] {
        records[i].labels.insert(Synthetic::class_name(classes[i]));
    }

    let dataset = Dataset::new(cfg.views.clone(), records)?;
    Ok(Synthetic { dataset, classes })
}

fn sample_graph(
    cfg: &SynthConfig,
    view: &str,
    plan: &ClassPlan,
    strength: f64,
    rng: &mut ChaCha8Rng,
) -> DependencyGraph {
    let n = cfg.nodes_per_graph;
    let m = cfg.alphabet_size;
    let node_labels: Vec<usize> = (0..n)
        .map(|_| {
            if rng.random_bool(strength) {
                plan.preferred[rng.random_range(0..plan.preferred.len())]
            } else {
                rng.random_range(0..m)
            }
        })
        .collect();

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (node, &l) in node_labels.iter().enumerate() {
        by_label[l].push(node);
    }

    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    if n > 1 {
        for src in 0..n {
            for _ in 0..cfg.out_degree {
                let planted = rng.random_bool(strength);
                let candidates: Vec<usize> = if planted {
                    by_label[plan.successor[node_labels[src]]]
                        .iter()
                        .copied()
                        .filter(|&d| d != src)
                        .collect()
                } else {
                    Vec::new()
                };
                let dst = if candidates.is_empty() {
                    let d = rng.random_range(0..n - 1);
                    if d >= src {
                        d + 1
                    } else {
                        d
                    }
                } else {
                    candidates[rng.random_range(0..candidates.len())]
                };
                if seen.insert((src, dst)) {
                    edges.push((src, dst));
                }
            }
        }
    }

    DependencyGraph::new(
        view,
        node_labels.iter().map(|l| format!("{view}_{l}")).collect(),
        edges,
    )
}
