use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding under the Euclidean metric.
///
/// A cluster that loses all its points keeps its previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::Eval(format!(
            "k = {k} must lie in 1..={} (number of points)",
            points.len()
        )));
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    centroids.push(points[first].clone());
    chosen[first] = true;
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Every point coincides with a centroid; take an unused point.
            let unused: Vec<usize> = (0..points.len()).filter(|&i| !chosen[i]).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen[next] = true;
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().expect("just pushed")));
        }
    }

    let mut assignments = vec![usize::MAX; points.len()];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centroids);
            inertia += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        inertia_history.push(inertia);
        iterations += 1;
        if !changed || iterations >= max_iter.max(1) {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = *inertia_history.last().expect("at least one assignment pass");
    Ok(KMeans {
        assignments,
        centroids,
        inertia,
        inertia_history,
        iterations,
    })
}

/// Runs [`kmeans`] `restarts` times with seeds `seed, seed + 1, ...` and keeps
/// the lowest-inertia result (the earliest on ties).
pub fn kmeans_restarts(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, restarts: usize) -> Result<KMeans> {
    let mut best = kmeans(points, k, seed, max_iter)?;
    for r in 1..restarts as u64 {
        let run = kmeans(points, k, seed.wrapping_add(r), max_iter)?;
        if run.inertia < best.inertia {
            best = run;
        }
    }
    Ok(best)
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two partitions given as per-element cluster
/// labels. Returns 1.0 when the index is undefined (both partitions are all
/// singletons or both a single cluster).
pub fn ari<A: Eq + Hash, B: Eq + Hash>(pred: &[A], truth: &[B]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Eval(format!(
            "partitions differ in size ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len() as u64;
    let mut table: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (a, b) in pred.iter().zip(truth) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_pairs() {
        let pts = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 10.0], vec![10.0, 10.1]];
        let km = kmeans(&pts, 2, 1, 100).unwrap();
        assert_eq!(km.assignments[0], km.assignments[1]);
        assert_eq!(km.assignments[2], km.assignments[3]);
        assert_ne!(km.assignments[0], km.assignments[2]);
    }

    #[test]
    fn k_equals_n() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let km = kmeans(&pts, 6, 3, 100).unwrap();
        let mut a = km.assignments.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 6);
        assert_eq!(km.inertia, 0.0);
    }

    #[test]
    fn k_too_large() {
        assert!(kmeans(&[vec![0.0]], 2, 0, 10).is_err());
    }

    #[test]
    fn seeded_determinism() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        assert_eq!(kmeans(&pts, 4, 9, 100).unwrap(), kmeans(&pts, 4, 9, 100).unwrap());
    }

    #[test]
    fn inertia_never_increases() {
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![((i * 37) % 101) as f64, ((i * 53) % 97) as f64])
            .collect();
        for seed in 0..5 {
            let km = kmeans(&pts, 7, seed, 100).unwrap();
            for w in km.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    #[test]
    fn restarts_never_worse() {
        let pts: Vec<Vec<f64>> = (0..120)
            .map(|i| vec![((i * 37) % 101) as f64, ((i * 53) % 97) as f64])
            .collect();
        let single = kmeans(&pts, 6, 4, 100).unwrap();
        let best = kmeans_restarts(&pts, 6, 4, 100, 8).unwrap();
        assert!(best.inertia <= single.inertia);
        assert_eq!(kmeans_restarts(&pts, 6, 4, 100, 1).unwrap(), single);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0);
        assert!((ari(&["a", "a", "b", "b"], &["x", "y", "x", "y"]).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(ari(&[0, 0, 0, 0, 0], &[1, 1, 2, 2, 3]).unwrap(), 0.0);
        assert!(ari(&[0, 1], &[0]).is_err());
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_relabel_invariant(
            a in proptest::collection::vec(0usize..4, 2..30),
            seed in 0usize..4,
        ) {
            let b: Vec<usize> = a.iter().enumerate().map(|(i, x)| (x + i * seed) % 3).collect();
            let ab = ari(&a, &b).unwrap();
            prop_assert!((ab - ari(&b, &a).unwrap()).abs() < 1e-12);
            let relabeled: Vec<usize> = a.iter().map(|x| 10 - x).collect();
            prop_assert!((ab - ari(&relabeled, &b).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        }
    }
}
