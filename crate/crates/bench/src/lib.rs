//! Criterion benchmarks for the bootstrap percolation library; see `benches/`.
