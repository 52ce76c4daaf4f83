from sysacc.bench.resources import ResourceReport, estimate_from_sizes, estimate_resources
from sysacc.bench.suite import (
    SUITE,
    ExperimentResult,
    count_gops,
    efficiency,
    ordering_failures,
    run_experiment,
    run_suite,
    to_csv,
    to_svg,
)

__all__ = [
    "SUITE", "ExperimentResult", "ResourceReport", "count_gops", "efficiency", "estimate_from_sizes",
    "estimate_resources", "ordering_failures", "run_experiment", "run_suite", "to_csv", "to_svg",
]
