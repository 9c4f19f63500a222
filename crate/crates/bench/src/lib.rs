//! Benchmarks for the tunnelkit solvers live under `benches/`.
