use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pivotmine::corpus::StopWordList;
use pivotmine::eval::{generate_synthetic, SynthSpec};
use pivotmine::ir::{build_index, Bm25Params, IndexEntry};
use pivotmine::pipeline::{run_extraction, Adapters, PipelineConfig, Resources};

fn extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("extraction");
    group.sample_size(10);
    let synth = generate_synthetic(&SynthSpec {
        n_parallel: 100,
        n_distractors: 900,
        noise_rate: 0.1,
        ..Default::default()
    })
    .unwrap();
    let d = &synth.dictionaries;
    let adapters = Adapters {
        source: &d.source_to_pivot,
        target: &d.target_to_pivot,
        inverse: None,
    };
    let resources = Resources::default();
    for (label, cfg) in [("modified_ir", PipelineConfig::default()), ("plain_ir", PipelineConfig::plain_ir())] {
        group.bench_with_input(BenchmarkId::new(label, 1000), &cfg, |b, cfg| {
            b.iter(|| run_extraction(black_box(&synth.corpus), adapters, &resources, cfg).unwrap())
        });
    }
    group.finish();
}

fn index(c: &mut Criterion) {
    let synth = generate_synthetic(&SynthSpec {
        n_parallel: 0,
        n_distractors: 5000,
        ..Default::default()
    })
    .unwrap();
    let entries: Vec<IndexEntry> = synth
        .corpus
        .target
        .sentences
        .iter()
        .map(|s| IndexEntry {
            id: s.id,
            date: s.date,
            tokens: &s.tokens,
        })
        .collect();
    let stops = StopWordList::default();
    c.bench_function("build_index_5000", |b| {
        b.iter(|| build_index(black_box(&entries), &stops, Bm25Params::default()).unwrap())
    });
    let index = build_index(&entries, &stops, Bm25Params::default()).unwrap();
    let queries: Vec<_> = synth.corpus.target.sentences.iter().take(100).collect();
    c.bench_function("query_window_100", |b| {
        b.iter(|| {
            queries
                .iter()
                .map(|s| index.query_window(&s.tokens, s.date, 7, 10, None).len())
                .sum::<usize>()
        })
    });
}

criterion_group!(benches, extraction, index);
criterion_main!(benches);
