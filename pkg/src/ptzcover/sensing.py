"""Camera sensing geometry: footprint ellipse, guaranteed region, quality, Jacobians.

A downward camera at altitude z with tilt h and half view-angle delta cuts the
ground plane in an ellipse. With pan angle theta and the agent's planar
position q, the ellipse is

    a = (z/2) [tan(h+delta) - tan(h-delta)]          (semi-major, along pan)
    b = z tan(delta) sqrt(1 + S^2),  S = [tan(h+delta) + tan(h-delta)] / 2
    center = q + z S w,              w = (cos theta, sin theta)

valid while |h| < pi/2 - delta so the cone section stays elliptical. At h = 0
this degenerates to the circle a = b = z tan(delta) centered at q.

Positioning uncertainty of radius r shrinks both semi-axes by r (same center
and orientation), giving the guaranteed sensed region; the region is empty
once r reaches the semi-minor axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom2d import DegenerateShapeError, Ellipse, as_point

# Semi-axis ordering snap: a and b are analytically equal at h = 0 but come
# from different expressions; differences below this (relative) are roundoff.
_AXIS_TIE_EPS = 1e-12


class TiltDomainError(ValueError):
    """Tilt magnitude at or past pi/2 - delta: the cone section is no longer an ellipse."""


@dataclass(frozen=True, eq=False)
class AgentState:
    """Full camera state: planar position q, altitude z, pan theta, tilt h,
    half view-angle delta, and positioning uncertainty radius r."""

    q: np.ndarray
    z: float
    theta: float
    h: float
    delta: float
    r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", as_point(self.q))
        self.q.setflags(write=False)
        if not (self.z > 0.0 and math.isfinite(self.z)):
            raise ValueError(f"altitude must be positive, got z={self.z}")
        if not (0.0 < self.delta < math.pi / 2):
            raise ValueError(f"half view-angle must lie in (0, pi/2), got delta={self.delta}")
        if not (self.r >= 0.0 and math.isfinite(self.r)):
            raise ValueError(f"uncertainty radius must be nonnegative, got r={self.r}")
        if not (math.isfinite(self.theta) and math.isfinite(self.h)):
            raise ValueError("pan and tilt must be finite")


@dataclass(frozen=True)
class AgentLimits:
    """Box constraints for one agent.

    h_max defaults to pi/2 - delta_max, the largest tilt keeping every
    reachable footprint elliptical; a platform may declare a stricter cap
    (never a looser one).
    """

    z_min: float
    z_max: float
    delta_min: float
    delta_max: float
    r: float = 0.0
    h_max: float | None = None

    def __post_init__(self):
        if not (0.0 < self.z_min < self.z_max):
            raise ValueError(f"need 0 < z_min < z_max, got [{self.z_min}, {self.z_max}]")
        if not (0.0 < self.delta_min < self.delta_max < math.pi / 2):
            raise ValueError(
                f"need 0 < delta_min < delta_max < pi/2, got [{self.delta_min}, {self.delta_max}]"
            )
        if not (0.0 <= self.r < self.z_min * math.tan(self.delta_min)):
            # r any larger and the guaranteed region can vanish mid-run.
            raise ValueError(
                f"uncertainty radius r={self.r} must satisfy 0 <= r < "
                f"z_min tan(delta_min) = {self.z_min * math.tan(self.delta_min):.6g}"
            )
        derived = math.pi / 2 - self.delta_max
        if self.h_max is None:
            object.__setattr__(self, "h_max", derived)
        elif not (0.0 < self.h_max <= derived):
            raise ValueError(
                f"h_max={self.h_max} must lie in (0, pi/2 - delta_max] = (0, {derived:.6g}]"
            )

    def admits(self, s: AgentState, tol: float = 1e-12) -> bool:
        return (
            self.z_min - tol <= s.z <= self.z_max + tol
            and abs(s.h) < self.h_max
            and self.delta_min - tol <= s.delta <= self.delta_max + tol
        )


@dataclass(frozen=True)
class QualityValue:
    """Coverage quality f in [0, 1] plus its partial derivatives."""

    f: float
    df_dz: float
    df_dh: float
    df_ddelta: float


@dataclass(frozen=True, eq=False)
class BoundaryJacobians:
    """Sensitivities of a guaranteed-boundary point gamma(t) to the agent state.

    u is the 2x2 position Jacobian (always the identity: the whole pattern
    translates with q). v, tau, sigma, mu are the 2-vector derivatives with
    respect to z, theta, h, delta. normal is the outward unit normal and
    speed = ||d gamma/dt||, the arc-length rate for quadrature. For array t,
    vectors have shape (len(t), 2) and scalars shape (len(t),).
    """

    u: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    normal: np.ndarray
    speed: np.ndarray


def _pattern_terms(s: AgentState) -> tuple[float, float, float]:
    """(a, b, center offset) of the sensing ellipse; raises outside the elliptical regime."""
    if abs(s.h) >= math.pi / 2 - s.delta:
        raise TiltDomainError(
            f"|h|={abs(s.h):.6g} >= pi/2 - delta = {math.pi / 2 - s.delta:.6g}; "
            "sensing pattern is not an ellipse"
        )
    tp = math.tan(s.h + s.delta)
    tm = math.tan(s.h - s.delta)
    half_diff = 0.5 * (tp - tm)
    half_sum = 0.5 * (tp + tm)
    a = s.z * half_diff
    b = s.z * math.tan(s.delta) * math.hypot(1.0, half_sum)
    if b > a:
        if b - a <= _AXIS_TIE_EPS * max(a, 1.0):
            b = a
        else:
            # Happens only for delta > 45 deg with nonzero tilt; the pattern is
            # still an ellipse but with swapped axes, which downstream code
            # does not model.
            raise DegenerateShapeError(
                f"semi-minor {b:.6g} exceeds semi-major {a:.6g} (delta > pi/4 regime)"
            )
    return a, b, s.z * half_sum


def sensing_pattern(s: AgentState) -> Ellipse:
    """Ground-plane footprint ellipse of the camera at state s."""
    a, b, off = _pattern_terms(s)
    w = np.array([math.cos(s.theta), math.sin(s.theta)])
    return Ellipse(center=s.q + off * w, a=a, b=b, theta=s.theta)


def guaranteed_region(s: AgentState) -> Ellipse | None:
    """Footprint shrunk by the uncertainty radius: semi-axes (a-r, b-r), same
    center and orientation. None when r >= min(a, b) (nothing is guaranteed)."""
    a, b, off = _pattern_terms(s)
    if s.r >= min(a, b):
        return None
    w = np.array([math.cos(s.theta), math.sin(s.theta)])
    return Ellipse(center=s.q + off * w, a=a - s.r, b=b - s.r, theta=s.theta)


def _p(x: float, x_min: float, x_max: float) -> tuple[float, float]:
    """Quartic taper on [x_min, x_max]: 1 at x_min, 0 at x_max, flat at both ends.

    p(x) = ((x - x_min)^2 - L^2)^2 / L^4 with L = x_max - x_min; returns (p, dp/dx).
    """
    L2 = (x_max - x_min) ** 2
    d = x - x_min
    core = d * d - L2
    return core * core / (L2 * L2), 4.0 * d * core / (L2 * L2)


def quality(s: AgentState, lims: AgentLimits) -> QualityValue:
    """Coverage quality f = [p(z) + p(h) + p(delta)] / 3 and its partials.

    Best (f = 1) at z = z_min, h = 0, delta = delta_min; decays to 0 as each
    coordinate reaches its far limit. The tilt term p(h, 0, h_max) is even in
    h, so negative tilts score the same as positive ones. The value applies
    uniformly over the guaranteed region.
    """
    pz, dpz = _p(s.z, lims.z_min, lims.z_max)
    # With x_min = 0 the taper reduces to (h^2 - h_max^2)^2 / h_max^4: even in
    # h, derivative odd, so negative tilts need no special casing.
    ph, dph = _p(s.h, 0.0, lims.h_max)
    pd, dpd = _p(s.delta, lims.delta_min, lims.delta_max)
    return QualityValue(
        f=(pz + ph + pd) / 3.0,
        df_dz=dpz / 3.0,
        df_dh=dph / 3.0,
        df_ddelta=dpd / 3.0,
    )


def _require_region(s: AgentState) -> tuple[float, float, float]:
    """(a - r, b - r, center offset), raising when the guaranteed region is empty."""
    a, b, off = _pattern_terms(s)
    if s.r >= min(a, b):
        raise DegenerateShapeError(
            f"guaranteed region is empty: r={s.r:.6g} >= min(a, b)={min(a, b):.6g}"
        )
    return a - s.r, b - s.r, off


def boundary_point(s: AgentState, t) -> np.ndarray:
    """Point(s) gamma(t) on the guaranteed-region boundary for scalar or array t."""
    ra, rb, off = _require_region(s)
    t = np.asarray(t, dtype=float)
    ct, st = math.cos(s.theta), math.sin(s.theta)
    x = off + ra * np.cos(t)
    y = rb * np.sin(t)
    return np.stack([ct * x - st * y, st * x + ct * y], axis=-1) + s.q


def boundary_jacobians(s: AgentState, t) -> BoundaryJacobians:
    """All five state sensitivities of gamma(t), plus outward normal and speed.

    gamma(t) = q + off(z,h,delta) w + R(theta) ((a-r) cos t, (b-r) sin t), so
    each sensitivity is (d off) w + R (da cos t, db sin t), with the theta one
    picking up the rotations of w and R instead. The closed-form derivatives
    below follow from d tan(x)/dx = sec^2 x = 1 + tan^2 x.
    """
    ra, rb, off = _require_region(s)
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    ct, st = np.cos(t), np.sin(t)

    tp = math.tan(s.h + s.delta)
    tm = math.tan(s.h - s.delta)
    sp = 1.0 + tp * tp  # sec^2(h + delta)
    sm = 1.0 + tm * tm  # sec^2(h - delta)
    S = 0.5 * (tp + tm)
    g = math.hypot(1.0, S)
    td = math.tan(s.delta)
    z = s.z

    # d{a, b, off}/dz
    a_z, b_z, off_z = 0.5 * (tp - tm), td * g, S
    # d{a, b, off}/dh
    S_h = 0.5 * (sp + sm)
    a_h = z * 0.5 * (sp - sm)
    b_h = z * td * S * S_h / g
    off_h = z * S_h
    # d{a, b, off}/ddelta
    S_d = 0.5 * (sp - sm)
    a_d = z * 0.5 * (sp + sm)
    b_d = z * ((1.0 + td * td) * g + td * S * S_d / g)
    off_d = z * S_d

    cth, sth = math.cos(s.theta), math.sin(s.theta)
    w = np.array([cth, sth])
    w_perp = np.array([-sth, cth])

    def frame(ax: float, bx: float, offx: float) -> np.ndarray:
        # offx w + R(theta) (ax cos t, bx sin t), vectorized over t
        x = offx + ax * ct
        y = bx * st
        return np.stack([cth * x - sth * y, sth * x + cth * y], axis=-1)

    v = frame(a_z, b_z, off_z)
    sigma = frame(a_h, b_h, off_h)
    mu = frame(a_d, b_d, off_d)
    # d gamma/dtheta: R'(theta) rotates both the body-frame point and w.
    bx = off + ra * ct
    by = rb * st
    tau = np.stack([-sth * bx - cth * by, cth * bx - sth * by], axis=-1)

    nx = ct / ra
    ny = st / rb
    normal = np.stack([cth * nx - sth * ny, sth * nx + cth * ny], axis=-1)
    normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
    speed = np.hypot(ra * st, rb * ct)

    if scalar:
        v, sigma, mu, tau = v[0], sigma[0], mu[0], tau[0]
        normal, speed = normal[0], float(speed[0])
    return BoundaryJacobians(
        u=np.eye(2), v=v, tau=tau, sigma=sigma, mu=mu, normal=normal, speed=speed
    )
