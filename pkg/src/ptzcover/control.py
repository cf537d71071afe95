"""Gradient control laws: boundary line integrals plus interior quality terms.

Each agent ascends the coverage objective H. Because a state change of agent i
moves only agent i's own guaranteed boundary (every point of it translates,
scales, or rotates with the state, while other agents' boundaries and the
workspace edge stay put), the gradient of H in each state coordinate reduces
to a line integral over agent i's own boundary, weighted by how much quality
the moving boundary sweeps in or out:

    weight f_i            where the boundary borders uncovered ground,
    weight f_i - f_j      where it cuts through neighbor j's region,
    weight 0              on arcs outside the workspace or strictly dominated
                          (those arcs are not part of the cell boundary).

Altitude, tilt, and zoom also change the quality f_i everywhere inside the
cell at once, adding an interior term (df/d.) * mass(W_i). Pan and position
leave f_i untouched, so they have boundary terms only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geom2d import (
    ConvexPolygon,
    DensityField,
    DEFAULT_POLYGONIZATION,
    area,
    project_to_polygon,
)
from .partition import DEFAULT_EPS_F, Partition, compute_partition
from .sensing import (
    AgentLimits,
    AgentState,
    boundary_jacobians,
    boundary_point,
    guaranteed_region,
    quality,
)

log = logging.getLogger(__name__)

DEFAULT_BOUNDARY_SAMPLES = 360

# Tilt clamp margin: h lives in the open interval (-h_max, h_max).
H_MARGIN = 1e-6


class ArcKind(Enum):
    """Where a boundary sample of agent i's own guaranteed boundary sits."""

    OUTSIDE_OMEGA = "outside_omega"   # beyond the workspace; workspace edge is static
    FREE = "free"                     # borders ground no one else covers
    DOMINATED = "dominated"           # inside a covering neighbor's region
    SUPPRESSED = "suppressed"         # strictly dominated; not part of the cell boundary


@dataclass(frozen=True, eq=False)
class BoundarySample:
    """One classified quadrature node on agent i's guaranteed boundary.

    neighbor/neighbor_f identify the best covering neighbor for DOMINATED
    samples (None otherwise). arc_weight is the local arc-length measure
    ||dgamma/dt|| * dt carried by the sample.
    """

    t: float
    point: np.ndarray
    normal: np.ndarray
    kind: ArcKind
    neighbor: int | None
    neighbor_f: float | None
    arc_weight: float


@dataclass(frozen=True)
class Gains:
    """Positive per-channel gains of the control laws."""

    K_q: float = 1.0
    K_z: float = 1.0
    K_theta: float = 1.0
    K_h: float = 1.0
    K_delta: float = 1.0

    def __post_init__(self):
        for name in ("K_q", "K_z", "K_theta", "K_h", "K_delta"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"gain {name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class ControlInput:
    """Per-agent control: planar velocity u_q plus four scalar channel rates."""

    u_q: np.ndarray
    u_z: float
    u_theta: float
    u_h: float
    u_delta: float

    @staticmethod
    def zero() -> "ControlInput":
        return ControlInput(np.zeros(2), 0.0, 0.0, 0.0, 0.0)

    @property
    def sup_norm(self) -> float:
        return max(
            abs(float(self.u_q[0])),
            abs(float(self.u_q[1])),
            abs(self.u_z),
            abs(self.u_theta),
            abs(self.u_h),
            abs(self.u_delta),
        )


_OUTSIDE, _FREE, _DOMINATED, _SUPPRESSED = 0, 1, 2, 3
_KIND_OF_CODE = {
    _OUTSIDE: ArcKind.OUTSIDE_OMEGA,
    _FREE: ArcKind.FREE,
    _DOMINATED: ArcKind.DOMINATED,
    _SUPPRESSED: ArcKind.SUPPRESSED,
}


def _classify_batch(i, pts, states, lims, eps_f, omega):
    """Vectorized arc classification for points on agent i's own boundary.

    Returns (kind codes, best covering neighbor index or -1, its quality or
    -inf, f_i). Containment in neighbors uses the exact ellipse form.
    """
    f_i = quality(states[i], lims[i]).f
    m = pts.shape[0]
    best_f = np.full(m, -np.inf)
    best_j = np.full(m, -1, dtype=int)
    for j in range(len(states)):
        if j == i:
            continue
        e = guaranteed_region(states[j])
        if e is None:
            continue
        f_j = quality(states[j], lims[j]).f
        covered = e.quadratic_form(pts) <= 1.0
        take = covered & (f_j > best_f)
        best_f[take] = f_j
        best_j[take] = j
    kind = np.full(m, _FREE, dtype=np.int8)
    kind[best_j >= 0] = _DOMINATED
    kind[best_f > f_i + eps_f] = _SUPPRESSED
    kind[~omega.contains_xy(pts)] = _OUTSIDE
    return kind, best_j, best_f, f_i


def classify_boundary(
    i: int,
    t: float,
    states: list[AgentState],
    lims: list[AgentLimits],
    omega: ConvexPolygon,
    eps_f: float = DEFAULT_EPS_F,
    dt_measure: float = 1.0,
) -> BoundarySample:
    """Classify the boundary point gamma_i(t); dt_measure scales arc_weight."""
    if np.ndim(t) != 0:
        raise ValueError("classify_boundary takes a scalar parameter t")
    pt = boundary_point(states[i], t)[None, :]
    kind, best_j, best_f, _ = _classify_batch(i, pt, states, lims, eps_f, omega)
    jac = boundary_jacobians(states[i], float(t))
    code = int(kind[0])
    dominated = code == _DOMINATED
    return BoundarySample(
        t=float(t),
        point=pt[0],
        normal=jac.normal,
        kind=_KIND_OF_CODE[code],
        neighbor=int(best_j[0]) if dominated else None,
        neighbor_f=float(best_f[0]) if dominated else None,
        arc_weight=jac.speed * dt_measure,
    )


def control_input(
    i: int,
    states: list[AgentState],
    lims: list[AgentLimits],
    omega: ConvexPolygon,
    density: DensityField | None = None,
    gains: Gains | None = None,
    M: int = DEFAULT_BOUNDARY_SAMPLES,
    eps_f: float = DEFAULT_EPS_F,
    partition: Partition | None = None,
    n_vertices: int = DEFAULT_POLYGONIZATION,
) -> ControlInput:
    """Gradient control for agent i from a synchronous snapshot of all states.

    M uniform parameter samples discretize the own-boundary integral; the
    interior terms use the cell W_i from the given partition (computed here
    when not supplied, so callers stepping a whole swarm should pass it in).
    """
    if M < 64:
        raise ValueError(f"need at least 64 boundary samples, got M={M}")
    gains = gains if gains is not None else Gains()
    s = states[i]
    if guaranteed_region(s) is None:
        return ControlInput.zero()

    dt_par = 2.0 * math.pi / M
    ts = np.arange(M) * dt_par
    pts = boundary_point(s, ts)
    jac = boundary_jacobians(s, ts)
    kind, _, best_f, f_i = _classify_batch(i, pts, states, lims, eps_f, omega)

    w = np.zeros(M)
    w[kind == _FREE] = f_i
    dom = kind == _DOMINATED
    w[dom] = f_i - best_f[dom]
    phi = np.ones(M) if density is None else density(pts)
    c = w * phi * jac.speed * dt_par

    u_q = jac.normal.T @ c
    bz = float(c @ np.einsum("ij,ij->i", jac.v, jac.normal))
    bth = float(c @ np.einsum("ij,ij->i", jac.tau, jac.normal))
    bh = float(c @ np.einsum("ij,ij->i", jac.sigma, jac.normal))
    bd = float(c @ np.einsum("ij,ij->i", jac.mu, jac.normal))

    if partition is None:
        partition = compute_partition(states, lims, omega, eps_f, n_vertices)
    cell_mass = area(partition.cells[i], density)
    if cell_mass == 0.0 and not np.any(w != 0.0):
        log.warning("agent %d is fully dominated: empty cell, zero control (stranded)", i)
    qv = quality(s, lims[i])

    return ControlInput(
        u_q=gains.K_q * u_q,
        u_z=gains.K_z * (bz + qv.df_dz * cell_mass),
        u_theta=gains.K_theta * bth,
        u_h=gains.K_h * (bh + qv.df_dh * cell_mass),
        u_delta=gains.K_delta * (bd + qv.df_ddelta * cell_mass),
    )


def _wrap_angle(x: float) -> float:
    """Map into (-pi, pi]; values already there pass through unchanged."""
    if -math.pi < x <= math.pi:
        return x
    return math.pi - (math.pi - x) % (2.0 * math.pi)


def project_state(
    s: AgentState,
    u: ControlInput,
    dt: float,
    lims: AgentLimits,
    omega: ConvexPolygon,
) -> AgentState:
    """Explicit Euler step followed by constraint projection.

    z and delta clamp to their closed intervals, h to the open tilt interval
    with a small safety margin, q projects onto Omega, theta wraps to
    (-pi, pi]. The uncertainty radius is part of the platform, not a control.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    h_lim = lims.h_max - H_MARGIN
    return AgentState(
        q=project_to_polygon(omega, s.q + dt * u.u_q),
        z=min(max(s.z + dt * u.u_z, lims.z_min), lims.z_max),
        theta=_wrap_angle(s.theta + dt * u.u_theta),
        h=min(max(s.h + dt * u.u_h, -h_lim), h_lim),
        delta=min(max(s.delta + dt * u.u_delta, lims.delta_min), lims.delta_max),
        r=s.r,
    )
