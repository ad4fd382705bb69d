//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to stderr
//! (bypassing output capture) before asserting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewvec_core::eval::{auc, ari, classify_eval, kmeans_restarts, stratified_split, ClassifyOptions};
use viewvec_core::hash_embed::HashEmbeddingTable;
use viewvec_core::trainer::{InputRow, StepScratch};
use viewvec_core::{
    generate_synthetic, get_subgraphs, load_dataset, train, Dataset, DependencyGraph, EmbeddingSet, Model,
    NegativeMode, SynthConfig, Synthetic, TrainConfig, VocabMode, Vocabulary, ViewMode,
};

fn report(criterion: u32, pass: bool, detail: impl AsRef<str>) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[acceptance] {status} criterion {criterion}: {}",
        detail.as_ref()
    );
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_viewvec"))
}

fn run_ok(cmd: &mut Command) -> Vec<u8> {
    let out = cmd.output().expect("spawn viewvec");
    assert!(
        out.status.success(),
        "viewvec failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn criterion_01_wl_isomorphic_pair() {
    let start = Instant::now();
    let d = load_dataset(fixture("isomorphic_pair.jsonl"), &["api".to_string()]).unwrap();
    let a = d.records[0].graph("api").unwrap();
    let b = d.records[1].graph("api").unwrap();
    let mut ok = a.node_count() == 8 && b.node_count() == 8 && a.edges != b.edges;
    for depth in 0..=3 {
        let mut ta: Vec<String> = get_subgraphs(a, depth).iter().map(|t| t.key().into_owned()).collect();
        let mut tb: Vec<String> = get_subgraphs(b, depth).iter().map(|t| t.key().into_owned()).collect();
        ok &= ta.len() == 8 * (depth + 1) && tb.len() == 8 * (depth + 1);
        ta.sort();
        tb.sort();
        ok &= ta == tb;
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    report(1, ok, format!("token multisets equal for D=0..3, |N|(D+1) tokens, {elapsed:?}"));
    assert!(ok);
}

/// Step loss recomputed from the public embedding lookup.
fn oracle_loss(model: &Model, u: &[f64], view: usize, pos: u64, negs: &[u64]) -> f64 {
    let table = &model.output(view).table;
    let dot = |id: u64| -> f64 {
        let e = table.hash_emb(id).unwrap();
        u.iter().zip(&e).map(|(a, b)| a * b).sum()
    };
    let mut loss = (1.0 + (-dot(pos)).exp()).ln();
    for &n in negs {
        loss += (1.0 + dot(n).exp()).ln();
    }
    loss
}

#[test]
fn criterion_02_gradient_oracle() {
    let start = Instant::now();
    let dataset = generate_synthetic(&SynthConfig::default()).unwrap().dataset;
    let dim = 16;
    let h = 1e-5;
    let rel = |fd: f64, an: f64| (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for k in [1, 2, 4] {
        let cfg = TrainConfig {
            dim,
            hashes: k,
            seed: k as u64,
            ..Default::default()
        };
        let model = Model::new(&dataset, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        // Trained-scale parameters rather than the small initial ones.
        for v in 0..model.views().len() {
            let t = &model.output(v).table;
            for b in 0..t.buckets() {
                for c in 0..dim {
                    t.components().set(b, c, rng.random_range(-1.0..1.0));
                }
            }
            for s in 0..t.importances().rows() {
                for i in 0..k {
                    t.importances().set(s, i, rng.random_range(-1.0..1.0));
                }
            }
        }
        for _ in 0..100 {
            let view = rng.random_range(0..model.views().len());
            let layer = model.output(view);
            let ids = layer.vocab.ids();
            let pos = ids[rng.random_range(0..ids.len())];
            let negs = layer.vocab.sample_negatives(&mut rng, 2, Some(pos)).unwrap();
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let neg_pairs: Vec<(usize, u64)> = negs.iter().map(|&n| (view, n)).collect();
            let g = model.step_gradients(&u, view, pos, &neg_pairs).unwrap();
            let loss = |u: &[f64]| oracle_loss(&model, u, view, pos, &negs);

            for j in 0..dim {
                let (mut up, mut dn) = (u.clone(), u.clone());
                up[j] += h;
                dn[j] -= h;
                let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                worst = worst.max(rel(fd, g.input[j]));
                checked += 1;
            }
            let table = &layer.table;
            let mut buckets = HashSet::new();
            let mut slots = HashSet::new();
            for &id in std::iter::once(&pos).chain(&negs) {
                for i in 0..k {
                    buckets.insert(table.bucket(id, i));
                    slots.insert((id, i));
                }
            }
            for &b in &buckets {
                let analytic = g.component_row(view, b, &u);
                for (c, &an) in analytic.iter().enumerate() {
                    let orig = table.components().get(b, c);
                    table.components().set(b, c, orig + h);
                    let lp = loss(&u);
                    table.components().set(b, c, orig - h);
                    let lm = loss(&u);
                    table.components().set(b, c, orig);
                    worst = worst.max(rel((lp - lm) / (2.0 * h), an));
                    checked += 1;
                }
            }
            for &(id, i) in &slots {
                let slot = table.slot(id).unwrap();
                let orig = table.importances().get(slot, i);
                table.importances().set(slot, i, orig + h);
                let lp = loss(&u);
                table.importances().set(slot, i, orig - h);
                let lm = loss(&u);
                table.importances().set(slot, i, orig);
                worst = worst.max(rel((lp - lm) / (2.0 * h), g.importance(view, id, i)));
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst < 1e-4 && elapsed < Duration::from_secs(10);
    report(
        2,
        ok,
        format!("{checked} partials over k=1,2,4, max relative error {worst:.2e}, {elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_03_parameter_count() {
    let t = HashEmbeddingTable::new(1000, 100, 64, 2, 0, false).unwrap();
    let mut ok = t.param_count() == 8400 && t.standard_param_count() == 64000;
    let model = train(
        &generate_synthetic(&SynthConfig::default()).unwrap().dataset,
        &TrainConfig {
            epochs: 1,
            dim: 32,
            ..Default::default()
        },
    )
    .unwrap();
    for layer in model.outputs() {
        let t = &layer.table;
        ok &= t.param_count() == (t.buckets() * t.dim()) as u64 + t.capacity() * t.k() as u64;
    }
    report(
        3,
        ok,
        format!("K=1000 B=100 d=64 k=2 holds {} reals (standard {})", t.param_count(), t.standard_param_count()),
    );
    assert!(ok);
}

/// Cycles over every record's context tokens, calling `step` with
/// `(record, view, token)` until `n` steps have run.
fn token_stream(model: &Model, dataset: &Dataset, n: usize, mut step: impl FnMut(usize, usize, u64)) {
    let contexts: Vec<Vec<(usize, u64)>> = dataset
        .records
        .iter()
        .map(|r| {
            let mut c = Vec::new();
            for (v, view) in model.views().iter().enumerate() {
                for t in get_subgraphs(r.graph(view).unwrap(), model.config().max_degree) {
                    c.push((v, model.output(v).vocab.token_id(&t).unwrap()));
                }
            }
            c
        })
        .collect();
    let mut done = 0;
    'outer: loop {
        for (r, c) in contexts.iter().enumerate() {
            for &(v, t) in c {
                if done == n {
                    break 'outer;
                }
                step(r, v, t);
                done += 1;
            }
        }
    }
}

#[test]
fn criterion_04_view_specific_sampling() {
    let dataset = load_dataset(fixture("synthetic.jsonl"), &viewvec_core::default_views()).unwrap();
    let steps = 100_000;

    let model = Model::new(&dataset, &TrainConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut scratch = StepScratch::new();
    let mut outside = 0u64;
    let mut drawn = 0u64;
    token_stream(&model, &dataset, steps, |r, v, t| {
        model
            .sgd_step(InputRow::Record(r), v, t, 0.05, &mut rng, &mut scratch)
            .unwrap();
        for &(nv, id) in &scratch.negatives {
            drawn += 1;
            if nv != v || !model.output(v).vocab.contains(id) {
                outside += 1;
            }
        }
    });

    let global = Model::new(
        &dataset,
        &TrainConfig {
            negative_mode: NegativeMode::Global,
            ..Default::default()
        },
    )
    .unwrap();
    let noise = global.global_noise().unwrap();
    let mut prob: HashMap<(usize, u64), f64> = HashMap::new();
    let mut view_mass = vec![0.0; global.views().len()];
    for (&e, &p) in noise.entries().iter().zip(noise.probabilities()) {
        prob.insert(e, p);
        view_mass[e.0] += p;
    }
    let (mut cross, mut expected, mut variance) = (0u64, 0.0, 0.0);
    token_stream(&global, &dataset, steps, |r, v, t| {
        global
            .sgd_step(InputRow::Record(r), v, t, 0.05, &mut rng, &mut scratch)
            .unwrap();
        // Draws equal to the positive are redrawn, so condition on that.
        let p = (1.0 - view_mass[v]) / (1.0 - prob[&(v, t)]);
        for &(nv, _) in &scratch.negatives {
            cross += u64::from(nv != v);
            expected += p;
            variance += p * (1.0 - p);
        }
    });
    let sigma = variance.sqrt();
    let z = (cross as f64 - expected) / sigma;
    let ok = outside == 0 && drawn == 2 * steps as u64 && z.abs() <= 3.0;
    report(
        4,
        ok,
        format!(
            "{outside} of {drawn} view-specific negatives outside the view; global cross-view {cross} vs expected {expected:.1} (z = {z:.2})"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_noise_distribution() {
    let counts: Vec<usize> = vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89];
    let labels: Vec<String> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(format!("t{i}"), c))
        .collect();
    let graph = DependencyGraph::new("api", labels, vec![]);
    let tokens = get_subgraphs(&graph, 0);
    let vocab = Vocabulary::build(&tokens, "api", 0.75, VocabMode::Dictionary).unwrap();
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();

    let draws = 1_000_000;
    let noise = vocab.noise().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits: HashMap<u64, usize> = HashMap::new();
    for _ in 0..draws {
        *hits.entry(noise.sample(&mut rng).1).or_default() += 1;
    }
    let mut worst: f64 = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let id = vocab.key_id(&format!("t{i}")).unwrap();
        let empirical = hits.get(&id).copied().unwrap_or(0) as f64 / draws as f64;
        worst = worst.max((empirical - w / total).abs());
    }
    let ok = vocab.observed() == 10 && worst <= 0.005;
    report(5, ok, format!("max |empirical - count^0.75 share| = {worst:.5} over 10^6 draws"));
    assert!(ok);
}

fn cluster_ari(embeddings: &EmbeddingSet, classes: &[usize], seed: u64) -> f64 {
    let km = kmeans_restarts(embeddings.vectors(), 3, seed, 300, 10).unwrap();
    ari(&km.assignments, classes).unwrap()
}

#[test]
fn criterion_06_planted_cluster_recovery() {
    let start = Instant::now();
    let cfg = |seed: u64| TrainConfig {
        dim: 32,
        epochs: 100,
        seed,
        ..Default::default()
    };
    let planted: Vec<f64> = (0..3u64)
        .map(|seed| {
            let s = generate_synthetic(&SynthConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            cluster_ari(&train(&s.dataset, &cfg(seed)).unwrap().export(), &s.classes, seed)
        })
        .collect();
    let planted_mean = planted.iter().sum::<f64>() / 3.0;

    // Each view carries the signal of two classes only.
    let split: BTreeMap<String, Vec<usize>> = [("api", vec![0, 1]), ("perm", vec![1, 2]), ("srcsink", vec![0, 2])]
        .into_iter()
        .map(|(v, c)| (v.to_string(), c))
        .collect();
    let views = viewvec_core::default_views();
    let mut multi = 0.0;
    let mut single = vec![0.0; views.len()];
    for seed in 0..5u64 {
        let s = generate_synthetic(&SynthConfig {
            seed,
            view_signal_split: Some(split.clone()),
            ..Default::default()
        })
        .unwrap();
        multi += cluster_ari(&train(&s.dataset, &cfg(seed)).unwrap().export(), &s.classes, seed) / 5.0;
        for (v, view) in views.iter().enumerate() {
            let c = TrainConfig {
                view_mode: ViewMode::Single(view.clone()),
                ..cfg(seed)
            };
            single[v] += cluster_ari(&train(&s.dataset, &c).unwrap().export(), &s.classes, seed) / 5.0;
        }
    }
    let elapsed = start.elapsed();
    let ok = planted_mean >= 0.8
        && single.iter().all(|&s| s < multi)
        && elapsed < Duration::from_secs(300);
    report(
        6,
        ok,
        format!(
            "planted ARI {planted:.3?} mean {planted_mean:.3}; split-signal multi-view {multi:.3} vs single {:?} {single:.3?}; {elapsed:.1?}",
            views
        ),
    );
    assert!(ok);
}

fn strip_labels(d: &Dataset) -> Dataset {
    let mut records = d.records.clone();
    for r in &mut records {
        r.labels.clear();
    }
    Dataset::new(d.views.clone(), records).unwrap()
}

#[test]
fn criterion_07_semi_supervision() {
    let mut wins = 0;
    let mut lines = Vec::new();
    let mut identical = true;
    for seed in 0..5u64 {
        let s = generate_synthetic(&SynthConfig {
            seed,
            class_signal_strength: 0.5,
            label_fraction: 0.25,
            ..Default::default()
        })
        .unwrap();
        let unlabeled = strip_labels(&s.dataset);
        let cfg = TrainConfig {
            dim: 32,
            seed,
            ..Default::default()
        };
        let names: Vec<String> = s.classes.iter().map(|&c| Synthetic::class_name(c)).collect();
        let (train_rows, test_rows) = stratified_split(&names, 0.7, seed).unwrap();
        // Records whose label the embedding saw are kept out of the test set.
        let test_rows: Vec<usize> = test_rows
            .into_iter()
            .filter(|&i| s.dataset.records[i].labels.is_empty())
            .collect();
        let macro_f = |d: &Dataset| {
            let e = train(d, &cfg).unwrap().export();
            let pick = |rows: &[usize]| -> (Vec<Vec<f64>>, Vec<String>) {
                rows.iter().map(|&i| (e.vectors()[i].clone(), names[i].clone())).unzip()
            };
            let (tx, ty) = pick(&train_rows);
            let (vx, vy) = pick(&test_rows);
            classify_eval(&tx, &ty, &vx, &vy, &ClassifyOptions::default()).unwrap().f1
        };
        let semi = macro_f(&s.dataset);
        let unsup = macro_f(&unlabeled);
        wins += usize::from(semi >= unsup);
        lines.push(format!("{semi:.3}/{unsup:.3}"));

        let zero = TrainConfig {
            label_weight: 0.0,
            ..cfg.clone()
        };
        let a = train(&s.dataset, &zero).unwrap();
        let b = train(&unlabeled, &zero).unwrap();
        identical &= a.record_matrix() == b.record_matrix() && a.export() == b.export();
    }
    let ok = wins >= 4 && identical;
    report(
        7,
        ok,
        format!(
            "semi >= unsupervised macro-F in {wins}/5 seeds (semi/unsup {}); beta=0 bit-identical: {identical}",
            lines.join(", ")
        ),
    );
    assert!(ok);
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn read_truth(path: &Path) -> HashMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (id, label) = l.split_once(',').unwrap();
            (id.to_string(), label.to_string())
        })
        .collect()
}

#[test]
fn criterion_08_online_stability() {
    let extract = || {
        run_ok(
            bin()
                .args(["extract", "--hashed", "--dataset"])
                .arg(fixture("synthetic.jsonl")),
        )
    };
    let (first, second) = (extract(), extract());
    let ids_match = !first.is_empty() && first == second;

    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<String> = std::fs::read_to_string(fixture("synthetic.jsonl"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let half = lines.len() / 2;
    let (batch_path, stream_path) = (dir.path().join("batch.jsonl"), dir.path().join("stream.jsonl"));
    std::fs::write(&batch_path, lines[..half].join("\n")).unwrap();
    std::fs::write(&stream_path, lines[half..].join("\n")).unwrap();
    let ckpt = dir.path().join("online.ckpt");
    let batch_tsv = dir.path().join("batch.tsv");
    run_ok(
        bin()
            .args(["train", "--vocab", "online", "--seed", "3", "--dataset"])
            .arg(&batch_path)
            .arg("--checkpoint")
            .arg(&ckpt)
            .arg("--export")
            .arg(&batch_tsv),
    );
    let streamed = run_ok(bin().args(["embed", "--freeze", "--checkpoint"]).arg(&ckpt).arg("--input").arg(&stream_path));
    let batch = EmbeddingSet::read_tsv(std::fs::File::open(&batch_tsv).map(std::io::BufReader::new).unwrap()).unwrap();
    let online = EmbeddingSet::read_tsv(streamed.as_slice()).unwrap();
    let truth = read_truth(&fixture("synthetic_truth.csv"));

    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for (oid, ov) in online.ids().iter().zip(online.vectors()) {
        for (bid, bv) in batch.ids().iter().zip(batch.vectors()) {
            let c = cosine(ov, bv);
            if truth[oid] == truth[bid] {
                intra = (intra.0 + c, intra.1 + 1);
            } else {
                inter = (inter.0 + c, inter.1 + 1);
            }
        }
    }
    let (intra, inter) = (intra.0 / intra.1 as f64, inter.0 / inter.1 as f64);
    let ok = ids_match && online.len() == lines.len() - half && intra > inter;
    report(
        8,
        ok,
        format!(
            "hashed ids identical across processes: {ids_match}; {} streamed records, intra-class cosine {intra:.4} vs inter-class {inter:.4}",
            online.len()
        ),
    );
    assert!(ok);
}

/// All set partitions of `n` elements as restricted-growth strings.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn grow(cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let next = cur.iter().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            cur.push(b);
            grow(cur, n, out);
            cur.pop();
        }
    }
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// Adjusted Rand index from explicit pair counts.
fn brute_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (both * neither - only_a * only_b) / denom
}

fn brute_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut doubled, mut pairs) = (0u64, 0u64);
    for (i, &pi) in positive.iter().enumerate() {
        for (j, &pj) in positive.iter().enumerate() {
            if pi && !pj {
                pairs += 1;
                doubled += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    doubled as f64 / (2 * pairs) as f64
}

#[test]
fn criterion_09_metric_oracles() {
    let parts = partitions(6);
    let mut worst_ari: f64 = 0.0;
    for a in &parts {
        for b in &parts {
            worst_ari = worst_ari.max((ari(a, b).unwrap() - brute_ari(a, b)).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut auc_mismatches = 0;
    let mut lists = 0;
    while lists < 500 {
        let n = rng.random_range(2..=200);
        // A coarse grid forces ties.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64 / 8.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        lists += 1;
        if auc(&scores, &labels).unwrap() != brute_auc(&scores, &labels) {
            auc_mismatches += 1;
        }
    }
    let ok = parts.len() == 203 && worst_ari < 1e-12 && auc_mismatches == 0;
    report(
        9,
        ok,
        format!(
            "ARI over {} partition pairs max deviation {worst_ari:.1e}; AUC exact on {lists} lists ({auc_mismatches} mismatches)",
            parts.len() * parts.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_reproducible_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let train_to = |name: &str| {
        let path = dir.path().join(name);
        run_ok(
            bin()
                .args(["train", "--seed", "7", "--dataset"])
                .arg(fixture("synthetic.jsonl"))
                .arg("--checkpoint")
                .arg(&path),
        );
        std::fs::read(path).unwrap()
    };
    let (a, b) = (train_to("a.ckpt"), train_to("b.ckpt"));
    let ok = !a.is_empty() && a == b;
    report(10, ok, format!("two `train --seed 7` checkpoints byte-identical ({} bytes)", a.len()));
    assert!(ok);
}
