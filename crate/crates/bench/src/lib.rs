//! Criterion benchmarks for the irskey pipeline live under `benches/`.
