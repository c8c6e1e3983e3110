//! Benchmarks for the solver live in `benches/`.
