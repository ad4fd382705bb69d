use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viewvec_core::trainer::{InputRow, StepScratch};
use viewvec_core::{generate_synthetic, get_subgraphs, HashEmbeddingTable, Model, SynthConfig, TrainConfig};

fn wl_extraction(c: &mut Criterion) {
    let dataset = generate_synthetic(&SynthConfig::default()).unwrap().dataset;
    let graph = dataset.records[0].graph("api").unwrap();
    let mut group = c.benchmark_group("wl");
    for depth in [0, 2, 4] {
        group.bench_function(format!("get_subgraphs/D={depth}"), |b| {
            b.iter(|| get_subgraphs(black_box(graph), depth))
        });
    }
    group.finish();
}

fn hash_embedding(c: &mut Criterion) {
    let mut group = c.benchmark_group("hash_emb");
    for k in [1, 2, 4] {
        let table = HashEmbeddingTable::new(100_000, 10_000, 64, k, 0, false).unwrap();
        group.bench_function(format!("lookup/k={k}"), |b| {
            let mut id = 0u64;
            b.iter(|| {
                id = (id + 7919) % 100_000;
                table.hash_emb(black_box(id)).unwrap()
            })
        });
    }
    group.finish();
}

fn sgd(c: &mut Criterion) {
    let dataset = generate_synthetic(&SynthConfig::default()).unwrap().dataset;
    let model = Model::new(&dataset, &TrainConfig::default()).unwrap();
    let tokens: Vec<(usize, u64)> = model
        .views()
        .iter()
        .enumerate()
        .flat_map(|(v, view)| {
            get_subgraphs(dataset.records[0].graph(view).unwrap(), model.config().max_degree)
                .into_iter()
                .map(move |t| (v, t))
        })
        .map(|(v, t)| (v, model.output(v).vocab.token_id(&t).unwrap()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut scratch = StepScratch::new();
    c.bench_function("sgd_step/record_context", |b| {
        b.iter(|| {
            for &(v, t) in &tokens {
                model
                    .sgd_step(InputRow::Record(0), v, t, 1e-3, &mut rng, &mut scratch)
                    .unwrap();
            }
        })
    });
}

criterion_group!(benches, wl_extraction, hash_embedding, sgd);
criterion_main!(benches);
