//! Benchmark-only crate; see `benches/mining.rs`.
