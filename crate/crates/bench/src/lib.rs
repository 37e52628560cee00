//! Criterion benchmarks for the compute kernels; see `benches/`.
