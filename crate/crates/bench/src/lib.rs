//! Criterion benchmarks for the extension pipeline; see `benches/pipeline.rs`.
