//! Benchmark-only crate; the measurements live in `benches/`.
//!
//! Run with `cargo bench -p flexrec-bench`.
