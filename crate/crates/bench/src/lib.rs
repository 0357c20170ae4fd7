//! Criterion benchmarks for the construction live in `benches/`.
