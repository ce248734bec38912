//! Criterion benchmarks for the upcr pipeline live under `benches/`.
