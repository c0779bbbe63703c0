"""Experiment harness: snapshots, analysis, validation, benchmark, CLI."""

from .analysis import HistogramSpec, cluster_count, l2_histogram_error, label_fraction_series
from .benchmark import BenchmarkRow, run_benchmark
from .snapshots import CSVSink, MemorySink, SnapshotRecord, read_snapshots, snapshot_header
from .validation import (
    ValidationRow,
    ValidationSpec,
    alignment_steps,
    exact_alignment_reference,
    parse_validation_spec,
    run_validation,
    sample_validation_initial,
)

__all__ = [
    "HistogramSpec",
    "cluster_count",
    "l2_histogram_error",
    "label_fraction_series",
    "BenchmarkRow",
    "run_benchmark",
    "CSVSink",
    "MemorySink",
    "SnapshotRecord",
    "read_snapshots",
    "snapshot_header",
    "ValidationRow",
    "ValidationSpec",
    "alignment_steps",
    "exact_alignment_reference",
    "parse_validation_spec",
    "run_validation",
    "sample_validation_initial",
]
