from .checks import SUITES, SuiteResult, run_suites
from .harness import (
    BENCH_COLUMNS,
    MODES,
    THREADS_ENV,
    VARIANTS,
    BenchRecord,
    BenchSpec,
    CheckFailedError,
    ResourceError,
    append_csv,
    estimate_bytes,
    hash_inputs,
    make_inputs,
    run_bench,
)
