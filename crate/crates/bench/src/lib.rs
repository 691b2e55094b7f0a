//! Criterion benchmarks for the core primitives; see `benches/`.
