//! Wall-clock, heap high-water and multiply-count measurements of full
//! training steps across document lengths.

pub mod alloc;
pub mod error;
pub mod harness;

pub use alloc::PeakAlloc;
pub use error::{BenchError, Result};
pub use harness::{
    bench_instance, bench_system, compare_report, measure_once, overlapping_windows, standard_systems, to_tsv,
    BenchConfig, BenchResult, BenchRow, Measurement, SystemSpec, REFERENCE_WINDOW,
};
