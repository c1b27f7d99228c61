//! Criterion benchmarks for the leech simulator live under `benches/`.
