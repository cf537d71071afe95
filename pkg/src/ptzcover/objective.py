"""Coverage-quality objective H, evaluated two independent ways.

Production path: sum f_i * mass(W_i) over partition cells plus f^l * mass(W_c^l)
over common regions; quality is uniform inside a guaranteed region, so each
integral collapses to a mass times a constant.

Oracle path: brute-force pointwise maximization on a dense grid with exact
ellipse membership tests. The two paths share no geometry code (polygon
booleans never touch the oracle), so their agreement localizes bugs; the
oracle also backs finite-difference gradient checks in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom2d import ConvexPolygon, DensityField, area
from .partition import Partition
from .sensing import AgentLimits, AgentState, QualityValue, guaranteed_region, quality


@dataclass(frozen=True)
class ObjectiveReport:
    """H with its additive breakdown: H = sum(per_agent) + sum(per_common)."""

    H: float
    per_agent: tuple[float, ...]
    per_common: tuple[float, ...]
    neutral_area: float


def _f_values(qualities) -> list[float]:
    return [q.f if isinstance(q, QualityValue) else float(q) for q in qualities]


def objective_from_partition(
    p: Partition,
    qualities,
    density: DensityField | None = None,
) -> ObjectiveReport:
    """Partitioned objective: quality is constant per cell, so each term is
    f times the cell's density mass. qualities holds one f (or QualityValue)
    per agent, aligned with p.cells."""
    f = _f_values(qualities)
    if len(f) != len(p.cells):
        raise ValueError(f"{len(f)} qualities for {len(p.cells)} cells")
    per_agent = tuple(fi * area(cell, density) for fi, cell in zip(f, p.cells))
    per_common = tuple(c.f * area(c.region, density) for c in p.common)
    return ObjectiveReport(
        H=float(sum(per_agent) + sum(per_common)),
        per_agent=per_agent,
        per_common=per_common,
        neutral_area=area(p.neutral, density),
    )


def objective_grid_oracle(
    states: list[AgentState],
    lims: list[AgentLimits],
    omega: ConvexPolygon,
    density: DensityField | None = None,
    resolution: int = 512,
) -> float:
    """H by brute force: at each of resolution^2 cell centers over Omega's
    bounding box (kept if inside Omega), take the best quality among agents
    whose exact guaranteed ellipse contains the point, weight by the density,
    and sum. Test/diagnostic path only; shares no geometry with the partition."""
    if resolution < 32:
        raise ValueError(f"resolution must be >= 32, got {resolution}")
    xmin, ymin, xmax, ymax = omega.bounds
    dx = (xmax - xmin) / resolution
    dy = (ymax - ymin) / resolution
    cx = xmin + (np.arange(resolution) + 0.5) * dx
    cy = ymin + (np.arange(resolution) + 0.5) * dy
    gx, gy = np.meshgrid(cx, cy)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[omega.contains_xy(pts, eps=0.0)]
    if pts.shape[0] == 0:
        return 0.0
    best = np.zeros(pts.shape[0])
    for s, l in zip(states, lims):
        e = guaranteed_region(s)
        if e is None:
            continue
        fi = quality(s, l).f
        covered = e.quadratic_form(pts) <= 1.0
        np.maximum(best, np.where(covered, fi, 0.0), out=best)
    phi = 1.0 if density is None else density(pts)
    return float(np.sum(best * phi) * dx * dy)
