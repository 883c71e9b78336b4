//! Criterion benchmarks for the gaugelab kernels live in `benches/kernels.rs`.
