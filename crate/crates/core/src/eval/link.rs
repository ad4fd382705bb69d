use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::classify::{LogisticOptions, LogisticRegression};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

/// Undirected recommendation graph over record ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecGraph {
    nodes: Vec<String>,
    /// `(a, b)` with `a < b`, sorted and unique.
    edges: Vec<(usize, usize)>,
}

impl RecGraph {
    /// Builds a graph from id pairs. Duplicate edges in either direction
    /// collapse; self-loops and ids missing from `embeddings` are errors.
    pub fn new(pairs: &[(String, String)], embeddings: &EmbeddingSet) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Eval(format!("self-loop on {a}")));
            }
            let mut ends = [0; 2];
            for (slot, id) in ends.iter_mut().zip([a, b]) {
                if embeddings.get(id).is_none() {
                    return Err(Error::Eval(format!("edge endpoint {id} has no embedding")));
                }
                *slot = *index.entry(id.as_str()).or_insert_with(|| {
                    nodes.push(id.clone());
                    nodes.len() - 1
                });
            }
            edges.insert((ends[0].min(ends[1]), ends[0].max(ends[1])));
        }
        Ok(RecGraph {
            nodes,
            edges: edges.into_iter().collect(),
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
        count == self.nodes.len()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Area under the ROC curve: the fraction of (positive, negative) pairs
/// ordered correctly, ties counting one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Eval("scores and labels differ in length".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as u64;
    let n_neg = positive.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Eval("AUC needs both positives and negatives".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the number of correctly ordered pairs, so ties stay integral.
    let mut doubled = 0u64;
    let mut neg_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let pos_here = order[i..j].iter().filter(|&&k| positive[k]).count() as u64;
        let neg_here = (j - i) as u64 - pos_here;
        doubled += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        i = j;
    }
    Ok(doubled as f64 / (2 * n_pos * n_neg) as f64)
}

/// Combines two endpoint vectors into an edge feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeOperator {
    #[default]
    Hadamard,
    Average,
    L1,
    L2,
}

impl EdgeOperator {
    pub fn apply(self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| match self {
                EdgeOperator::Hadamard => x * y,
                EdgeOperator::Average => (x + y) / 2.0,
                EdgeOperator::L1 => (x - y).abs(),
                EdgeOperator::L2 => (x - y) * (x - y),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOptions {
    pub folds: usize,
    /// Negatives per removed edge.
    pub negative_ratio: f64,
    pub operator: EdgeOperator,
    pub logistic: LogisticOptions,
}

impl Default for LinkOptions {
    fn default() -> Self {
        LinkOptions {
            folds: 5,
            negative_ratio: 1.0,
            operator: EdgeOperator::Hadamard,
            logistic: LogisticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub auc: f64,
    pub fold_aucs: Vec<f64>,
    pub removed_edges: usize,
    pub negatives: usize,
    pub residual_edges: usize,
}

/// Removes a fraction of edges while keeping the graph connected, pairs the
/// removed edges with sampled non-edges, and scores edge features with a
/// logistic classifier under k-fold cross-validation. Returns the mean AUC.
pub fn link_predict_eval(
    embeddings: &EmbeddingSet,
    graph: &RecGraph,
    remove_fraction: f64,
    seed: u64,
    opts: &LinkOptions,
) -> Result<LinkReport> {
    if !(remove_fraction > 0.0 && remove_fraction < 1.0) {
        return Err(Error::Eval("removal fraction must lie in (0, 1)".into()));
    }
    if !graph.is_connected() {
        return Err(Error::Eval("recommendation graph is not connected".into()));
    }
    if opts.folds < 2 {
        return Err(Error::Eval("at least two folds are required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.nodes.len();

    // Random spanning tree; only edges outside it may be removed.
    let mut shuffled = graph.edges.clone();
    shuffled.shuffle(&mut rng);
    let mut uf = UnionFind((0..n).collect());
    let mut removable = Vec::new();
    for &(a, b) in &shuffled {
        if !uf.union(a, b) {
            removable.push((a, b));
        }
    }
    let to_remove = (remove_fraction * graph.edges.len() as f64).round() as usize;
    if to_remove > removable.len() {
        return Err(Error::Eval(format!(
            "cannot remove {to_remove} edges and stay connected ({} removable)",
            removable.len()
        )));
    }
    if to_remove < opts.folds {
        return Err(Error::Eval(format!(
            "{to_remove} removed edges cannot fill {} folds",
            opts.folds
        )));
    }
    let removed = &removable[..to_remove];

    let edge_set: BTreeSet<(usize, usize)> = graph.edges.iter().copied().collect();
    let max_non_edges = n * (n - 1) / 2 - edge_set.len();
    let wanted = (opts.negative_ratio * to_remove as f64).round() as usize;
    if wanted > max_non_edges || wanted < opts.folds {
        return Err(Error::Eval(format!(
            "cannot sample {wanted} non-edges ({max_non_edges} exist)"
        )));
    }
    let mut negatives = BTreeSet::new();
    let mut negative_list = Vec::with_capacity(wanted);
    while negative_list.len() < wanted {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let pair = (a.min(b), a.max(b));
        if a != b && !edge_set.contains(&pair) && negatives.insert(pair) {
            negative_list.push(pair);
        }
    }

    let feature = |(a, b): (usize, usize)| {
        let va = embeddings.get(&graph.nodes[a]).expect("validated endpoint");
        let vb = embeddings.get(&graph.nodes[b]).expect("validated endpoint");
        opts.operator.apply(va, vb)
    };
    // Folds are assigned round-robin within each class to keep them balanced.
    let mut examples: Vec<(Vec<f64>, bool, usize)> = Vec::with_capacity(to_remove + wanted);
    for (i, &e) in removed.iter().enumerate() {
        examples.push((feature(e), true, i % opts.folds));
    }
    let mut neg_order: Vec<usize> = (0..negative_list.len()).collect();
    neg_order.shuffle(&mut rng);
    for (i, &k) in neg_order.iter().enumerate() {
        examples.push((feature(negative_list[k]), false, i % opts.folds));
    }

    let mut fold_aucs = Vec::with_capacity(opts.folds);
    for fold in 0..opts.folds {
        let (train, test): (Vec<_>, Vec<_>) = examples.iter().partition(|e| e.2 != fold);
        let x: Vec<Vec<f64>> = train.iter().map(|e| e.0.clone()).collect();
        let y: Vec<usize> = train.iter().map(|e| usize::from(e.1)).collect();
        let model = LogisticRegression::fit(&x, &y, 2, &opts.logistic)?;
        let scores: Vec<f64> = test.iter().map(|e| model.predict_proba(&e.0)[1]).collect();
        let labels: Vec<bool> = test.iter().map(|e| e.1).collect();
        fold_aucs.push(auc(&scores, &labels)?);
    }
    Ok(LinkReport {
        auc: fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64,
        fold_aucs,
        removed_edges: to_remove,
        negatives: wanted,
        residual_edges: graph.edges.len() - to_remove,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, prop_assume, proptest};

    fn brute_auc(scores: &[f64], positive: &[bool]) -> f64 {
        let mut doubled = 0u64;
        let mut pairs = 0u64;
        for (i, &pi) in positive.iter().enumerate() {
            for (j, &pj) in positive.iter().enumerate() {
                if pi && !pj {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        doubled += 2;
                    } else if scores[i] == scores[j] {
                        doubled += 1;
                    }
                }
            }
        }
        doubled as f64 / (2 * pairs) as f64
    }

    #[test]
    fn perfect_ranking() {
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert!(auc(&[0.5], &[true]).is_err());
    }

    #[test]
    fn random_scores_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        assert!((auc(&scores, &labels).unwrap() - 0.5).abs() < 0.05);
    }

    fn ring_with_chords(n: usize) -> (EmbeddingSet, Vec<(String, String)>) {
        let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        // Nodes on a circle; edges join near neighbours.
        let vectors = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            pairs.push((ids[i].clone(), ids[(i + 1) % n].clone()));
            pairs.push((ids[i].clone(), ids[(i + 2) % n].clone()));
            pairs.push((ids[i].clone(), ids[(i + 4) % n].clone()));
        }
        (EmbeddingSet::new(ids, vectors).unwrap(), pairs)
    }

    #[test]
    fn link_prediction_end_to_end() {
        let (emb, pairs) = ring_with_chords(40);
        let g = RecGraph::new(&pairs, &emb).unwrap();
        let report = link_predict_eval(&emb, &g, 0.2, 3, &LinkOptions::default()).unwrap();
        assert_eq!(report.removed_edges, 24);
        assert_eq!(report.negatives, 24);
        assert_eq!(report.fold_aucs.len(), 5);
        // The product feature sums to the cosine of the angular gap.
        assert!(report.auc > 0.8, "auc {}", report.auc);
        assert_eq!(report, link_predict_eval(&emb, &g, 0.2, 3, &LinkOptions::default()).unwrap());
    }

    #[test]
    fn removal_keeps_graph_connected_or_fails() {
        // A path has no removable edges.
        let ids: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
        let emb = EmbeddingSet::new(ids.clone(), vec![vec![0.0]; 10]).unwrap();
        let pairs: Vec<_> = (0..9).map(|i| (ids[i].clone(), ids[i + 1].clone())).collect();
        let g = RecGraph::new(&pairs, &emb).unwrap();
        assert!(link_predict_eval(&emb, &g, 0.3, 0, &LinkOptions::default()).is_err());
    }

    #[test]
    fn graph_validation() {
        let (emb, _) = ring_with_chords(4);
        assert!(RecGraph::new(&[("n0".into(), "n0".into())], &emb).is_err());
        assert!(RecGraph::new(&[("n0".into(), "zz".into())], &emb).is_err());
        let g = RecGraph::new(&[("n0".into(), "n1".into()), ("n1".into(), "n0".into())], &emb).unwrap();
        assert_eq!(g.edges().len(), 1);
        let split = RecGraph::new(&[("n0".into(), "n1".into()), ("n2".into(), "n3".into())], &emb).unwrap();
        assert!(!split.is_connected());
    }

    proptest! {
        #[test]
        fn matches_pairwise_definition(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 2..200)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 7.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            prop_assert_eq!(auc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
        }

        #[test]
        fn monotone_transform_invariant(
            data in proptest::collection::vec((-50i32..50, any::<bool>()), 2..100)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let transformed: Vec<f64> = scores.iter().map(|s| (s / 10.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&transformed, &labels).unwrap());
        }
    }
}
