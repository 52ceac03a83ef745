"""In-plane visual servoing: search patterns, triangulation and benchmarks."""

import json

from ._ipvs import (
    IpvsError,
    covering_radius,
    error_direction,
    generate_pattern,
    oracle_benchmark_json,
    quadratic_law,
    reconstruct_error,
    run_cli,
)


def oracle_benchmark(seed=0, sigma=0.002, insertions_per_style=10, jobs=1):
    """Benchmark summary as a dict, with perception replaced by a noisy oracle."""
    return json.loads(oracle_benchmark_json(seed, sigma, insertions_per_style, jobs))


__all__ = [
    "IpvsError",
    "covering_radius",
    "error_direction",
    "generate_pattern",
    "oracle_benchmark",
    "quadratic_law",
    "reconstruct_error",
    "run_cli",
]
