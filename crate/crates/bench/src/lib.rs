//! Criterion benchmarks for `ddim-core`; see `benches/`.
