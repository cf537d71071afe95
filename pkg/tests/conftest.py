"""Shared fixtures and samplers.

The four bundled case-study runs (PTZ and fixed-camera for case1/case2) are
session-scoped: they take tens of seconds each and several test modules read
them. Random swarm samplers live here too so every property loop draws from
the same distribution of non-degenerate configurations.
"""
import math
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from ptzcover import (
    AgentLimits,
    AgentState,
    ConvexPolygon,
    load_scenario,
    quality,
    run,
)

# Same workspace the bundled scenarios use: octagon, circumradius 7.
_R = 7.0
_C = _R / math.sqrt(2.0)
OCTAGON_VERTICES = np.array(
    [
        [_R, 0.0],
        [_C, _C],
        [0.0, _R],
        [-_C, _C],
        [-_R, 0.0],
        [-_C, -_C],
        [0.0, -_R],
        [_C, -_C],
    ]
)


def octagon() -> ConvexPolygon:
    return ConvexPolygon(OCTAGON_VERTICES)


def bundled_path(name: str) -> str:
    return str(resources.files("ptzcover") / "scenarios" / f"{name}.yaml")


def sample_limits(rng: np.random.Generator) -> AgentLimits:
    z_min = rng.uniform(0.3, 0.5)
    z_max = rng.uniform(1.6, 3.5)
    d_min = math.radians(rng.uniform(12.0, 18.0))
    d_max = math.radians(rng.uniform(28.0, 40.0))
    r = rng.uniform(0.0, 0.5) * z_min * math.tan(d_min)
    return AgentLimits(z_min=z_min, z_max=z_max, delta_min=d_min, delta_max=d_max, r=r)


# Guaranteed regions smaller than this minor semi-axis are rejected by the
# sampler: a footprint a dozen cells across on the 512^2 oracle grid is pure
# lattice noise, not a test of anything.
MIN_MINOR_AXIS = 0.6


def sample_state(rng: np.random.Generator, lims: AgentLimits, box: float = 4.0) -> AgentState:
    # Margins keep z/delta interior and the tilt well inside both the limit
    # interval and the elliptical regime; none of the tests want to sit on a
    # constraint surface by accident.
    span_z = lims.z_max - lims.z_min
    span_d = lims.delta_max - lims.delta_min
    for _ in range(500):
        z = rng.uniform(lims.z_min + 0.05 * span_z, lims.z_max - 0.02 * span_z)
        delta = rng.uniform(lims.delta_min + 0.05 * span_d, lims.delta_max - 0.05 * span_d)
        # z tan(delta) lower-bounds the minor semi-axis at any tilt
        if z * math.tan(delta) - lims.r >= MIN_MINOR_AXIS:
            return AgentState(
                q=rng.uniform(-box, box, size=2),
                z=z,
                theta=rng.uniform(-math.pi, math.pi),
                h=rng.uniform(-0.7, 0.7) * lims.h_max,
                delta=delta,
                r=lims.r,
            )
    raise AssertionError("could not sample a resolvable footprint in 500 tries")


def sample_swarm(rng, n, min_f_gap=0.0, box=4.0, shared_limits=False):
    """n agents with nonempty guaranteed regions; when min_f_gap > 0,
    resample until all pairwise quality gaps exceed it (non-degenerate for
    finite differencing and dominance tests)."""
    for _ in range(200):
        if shared_limits:
            lims = [sample_limits(rng)] * n
        else:
            lims = [sample_limits(rng) for _ in range(n)]
        states = [sample_state(rng, l, box) for l in lims]
        f = [quality(s, l).f for s, l in zip(states, lims)]
        gaps = [abs(f[i] - f[j]) for i in range(n) for j in range(i + 1, n)]
        if not gaps or min(gaps) > min_f_gap:
            return states, lims
    raise AssertionError("could not sample a non-degenerate swarm in 200 tries")


@pytest.fixture(scope="session")
def omega():
    return octagon()


@pytest.fixture(scope="session")
def case1_scenario():
    return load_scenario(bundled_path("case1"))


@pytest.fixture(scope="session")
def case2_scenario():
    return load_scenario(bundled_path("case2"))


@pytest.fixture(scope="session")
def case1_ptz(case1_scenario):
    return run(case1_scenario)


@pytest.fixture(scope="session")
def case1_fixed(case1_scenario):
    return run(replace(case1_scenario, mode="fixed"))


@pytest.fixture(scope="session")
def case2_ptz(case2_scenario):
    return run(case2_scenario)


@pytest.fixture(scope="session")
def case2_fixed(case2_scenario):
    return run(replace(case2_scenario, mode="fixed"))
