//! Criterion benchmarks for the reconstruction pipeline live under `benches/`.
