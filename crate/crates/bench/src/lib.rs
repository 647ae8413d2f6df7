//! Criterion benchmarks for pivotmine; see `benches/`.
