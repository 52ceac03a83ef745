import math

import numpy as np
import pytest

import ipvs


def test_pattern_starts_at_center_and_covers():
    p = ipvs.generate_pattern(0.1, 1.0)
    assert p.shape[1] == 2
    assert np.allclose(p[0], 0.0)
    norms = np.linalg.norm(p, axis=1)
    assert np.all(np.diff(norms) >= -1e-12)
    assert ipvs.covering_radius(p, 1.0, 0.005) <= 0.1 + 1e-12


def test_invalid_tolerance_raises():
    with pytest.raises(ipvs.IpvsError):
        ipvs.generate_pattern(0.0, 1.0)


def test_reconstruction_recovers_error():
    l = np.array([0.0, 0.0, -1.0])
    dirs = [ipvs.error_direction(l, np.array([math.cos(a), math.sin(a), -1.0])) for a in (0.3, 1.9)]
    e = np.array([0.4, -0.7, 0.0])
    qs = [float(e @ u) for u in dirs]
    err, rank, ill = ipvs.reconstruct_error(dirs, qs)
    assert rank == 2 and not ill
    assert np.linalg.norm(err - e) < 1e-9


def test_quadratic_law_slope():
    fit = ipvs.quadratic_law([0.3, 0.6, 1.2], seeds_per_level=50)
    assert 1.7 <= fit["slope"] <= 2.3


def test_oracle_benchmark_summary():
    s = ipvs.oracle_benchmark(insertions_per_style=2)
    assert s["overall"]["vs"]["count"] == 10
    assert s["overall"]["vs"]["successes"] == 10


def test_cli_pattern(tmp_path):
    assert ipvs.run_cli(["pattern", "--tolerance", "0.1", "--radius", "0.5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "pattern.csv").read_text().startswith("index,dx_mm,dy_mm\n")
    assert ipvs.run_cli(["pattern", "--tolerance", "-1", "--radius", "0.5", "--out", str(tmp_path)]) != 0
