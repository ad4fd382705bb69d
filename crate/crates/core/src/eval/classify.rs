use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Multinomial logistic regression trained by full-batch gradient descent
/// with an L2 penalty. Features are standardized with training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    /// `classes x (dim + 1)`; the last column is the bias.
    weights: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            l2: 1e-3,
            learning_rate: 0.5,
            iterations: 500,
        }
    }
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, opts: &LogisticOptions) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Eval("training set is empty or misaligned".into()));
        }
        if classes < 2 {
            return Err(Error::Eval("classification needs at least two classes".into()));
        }
        let dim = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..dim)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut model = LogisticRegression {
            weights: vec![vec![0.0; dim + 1]; classes],
            mean,
            scale,
        };
        let xs: Vec<Vec<f64>> = x.iter().map(|r| model.standardize(r)).collect();
        let mut grad = vec![vec![0.0; dim + 1]; classes];
        let mut probs = vec![0.0; classes];
        for _ in 0..opts.iterations {
            for g in grad.iter_mut() {
                g.fill(0.0);
            }
            for (row, &label) in xs.iter().zip(y) {
                model.softmax(row, &mut probs);
                for c in 0..classes {
                    let err = probs[c] - if c == label { 1.0 } else { 0.0 };
                    for j in 0..dim {
                        grad[c][j] += err * row[j];
                    }
                    grad[c][dim] += err;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                for (j, (wj, gj)) in w.iter_mut().zip(g).enumerate() {
                    let penalty = if j < dim { opts.l2 * *wj } else { 0.0 };
                    *wj -= opts.learning_rate * (gj / n + penalty);
                }
            }
        }
        Ok(model)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    fn softmax(&self, standardized: &[f64], out: &mut [f64]) {
        let dim = standardized.len();
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w[..dim].iter().zip(standardized).map(|(a, b)| a * b).sum::<f64>() + w[dim];
        }
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        self.softmax(&self.standardize(row), &mut out);
        out
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let p = self.predict_proba(row);
        (0..p.len()).fold(0, |best, c| if p[c] > p[best] { c } else { best })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// From raw counts; empty denominators give 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// `confusion[truth][pred]` counts.
pub fn confusion_matrix(truth: &[usize], pred: &[usize], classes: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t][p] += 1;
    }
    m
}

pub fn class_prf(confusion: &[Vec<u64>], class: usize) -> Prf {
    let tp = confusion[class][class];
    let fp: u64 = (0..confusion.len()).filter(|&t| t != class).map(|t| confusion[t][class]).sum();
    let fn_: u64 = (0..confusion.len()).filter(|&p| p != class).map(|p| confusion[class][p]).sum();
    Prf::from_counts(tp, fp, fn_)
}

/// Unweighted mean of the per-class scores.
pub fn macro_prf(confusion: &[Vec<u64>]) -> Prf {
    let k = confusion.len() as f64;
    let per: Vec<Prf> = (0..confusion.len()).map(|c| class_prf(confusion, c)).collect();
    Prf {
        precision: per.iter().map(|p| p.precision).sum::<f64>() / k,
        recall: per.iter().map(|p| p.recall).sum::<f64>() / k,
        f1: per.iter().map(|p| p.f1).sum::<f64>() / k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `"macro"` or `"binary:<positive class>"`.
    pub averaging: String,
    pub classes: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifyOptions {
    pub logistic: LogisticOptions,
    /// Positive class for binary problems; defaults to the last class in
    /// sorted order.
    pub positive: Option<String>,
}

/// Trains on one labeled set and scores another. Binary problems report the
/// positive class; multiclass problems report macro averages.
pub fn classify_eval(
    train_x: &[Vec<f64>],
    train_y: &[String],
    test_x: &[Vec<f64>],
    test_y: &[String],
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    let train_classes: BTreeSet<&String> = train_y.iter().collect();
    if let Some(missing) = test_y.iter().find(|c| !train_classes.contains(c)) {
        return Err(Error::Eval(format!("class {missing} absent from training set")));
    }
    let classes: Vec<String> = train_classes.into_iter().cloned().collect();
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let y: Vec<usize> = train_y.iter().map(|c| index[c.as_str()]).collect();
    let model = LogisticRegression::fit(train_x, &y, classes.len(), &opts.logistic)?;
    let truth: Vec<usize> = test_y.iter().map(|c| index[c.as_str()]).collect();
    let pred: Vec<usize> = test_x.iter().map(|r| model.predict(r)).collect();
    let confusion = confusion_matrix(&truth, &pred, classes.len());
    let (prf, averaging) = if classes.len() == 2 {
        let positive = match &opts.positive {
            Some(p) => *index
                .get(p.as_str())
                .ok_or_else(|| Error::Eval(format!("positive class {p} not in training set")))?,
            None => 1,
        };
        (class_prf(&confusion, positive), format!("binary:{}", classes[positive]))
    } else {
        (macro_prf(&confusion), "macro".to_string())
    };
    Ok(ClassificationReport {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        averaging,
        classes,
        n_train: train_x.len(),
        n_test: test_x.len(),
    })
}

/// Stratified split with exactly `round(train_fraction * n)` training rows.
///
/// Rows are shuffled within each class and the classes are interleaved, so
/// every prefix of the order is close to the class proportions.
pub fn stratified_split(labels: &[String], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Eval("train fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let n = labels.len();
    // Position of each row within its class, scaled to [0, 1), orders rows.
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(n);
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        let len = rows.len() as f64;
        for (pos, &row) in rows.iter().enumerate() {
            keyed.push(((pos as f64 + 0.5) / len, row));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n_train = (train_fraction * n as f64).round() as usize;
    let train = keyed[..n_train].iter().map(|k| k.1).collect();
    let test = keyed[n_train..].iter().map(|k| k.1).collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn prf_from_fixed_confusion() {
        let p = Prf::from_counts(8, 2, 2);
        assert!((p.precision - 0.8).abs() < 1e-15);
        assert!((p.recall - 0.8).abs() < 1e-15);
        assert!((p.f1 - 0.8).abs() < 1e-15);
        let cm = vec![vec![8, 2], vec![2, 8]];
        assert_eq!(class_prf(&cm, 1), p);
    }

    #[test]
    fn separable_toy_set() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 } + i as f64 * 0.01, 0.3]).collect();
        let y: Vec<String> = (0..20).map(|i| if i % 2 == 0 { "neg" } else { "pos" }.to_string()).collect();
        let report = classify_eval(&x, &y, &x, &y, &ClassifyOptions::default()).unwrap();
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.averaging, "binary:pos");
    }

    #[test]
    fn constant_predictor_degenerate() {
        // Every prediction is "neg": recall of "pos" is 0 and F is 0, not NaN.
        let truth = vec![0, 0, 1, 1];
        let pred = vec![0, 0, 0, 0];
        let cm = confusion_matrix(&truth, &pred, 2);
        let p = class_prf(&cm, 1);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        let q = class_prf(&cm, 0);
        assert_eq!(q.recall, 1.0);
    }

    #[test]
    fn absent_class_is_an_error() {
        let x = vec![vec![0.0], vec![1.0]];
        let err = classify_eval(&x, &s(&["a", "b"]), &x, &s(&["a", "c"]), &ClassifyOptions::default());
        assert!(err.unwrap_err().to_string().contains("absent"));
    }

    #[test]
    fn multiclass_is_macro() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 3.0, 1.0]).collect();
        let y: Vec<String> = (0..30).map(|i| format!("c{}", i % 3)).collect();
        let r = classify_eval(&x, &y, &x, &y, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.averaging, "macro");
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn split_is_exact_and_stratified() {
        let labels: Vec<String> = (0..60).map(|i| format!("c{}", i % 3)).collect();
        let (train, test) = stratified_split(&labels, 0.7, 4).unwrap();
        assert_eq!((train.len(), test.len()), (42, 18));
        for c in 0..3 {
            let in_train = train.iter().filter(|&&i| labels[i] == format!("c{c}")).count();
            assert_eq!(in_train, 14);
        }
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
    }
}
