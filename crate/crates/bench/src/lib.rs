//! Criterion benchmarks for the tuning core; see `benches/`.
