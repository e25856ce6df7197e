import numpy as np
import pytest

from bandgroup.hsi_core import HsiCube, SyntheticSpec, gen_synthetic

_ACCEPTANCE = []


def record_acceptance(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


@pytest.fixture
def clustered_cube():
    spec = SyntheticSpec(width=16, height=16, cluster_sizes=(3, 3), intra_cluster_corr=0.95, noise_sigma=0.01, seed=11)
    return spec, gen_synthetic(spec)


def cube_from_bands(*bands):
    """Build a cube from 1-D band arrays laid out as a single row."""
    arr = np.array(bands, dtype=float)
    return HsiCube(arr.reshape(arr.shape[0], 1, arr.shape[1]))
