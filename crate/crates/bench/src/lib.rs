//! Criterion benchmarks for hmvr live under `benches/`.
